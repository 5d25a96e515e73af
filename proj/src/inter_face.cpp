#include "hicom/inter_face.hpp"

#include <algorithm>
#include <stdexcept>

#include "hicom/gaze.hpp"  // image_to_mat
#include "hicom/rng.hpp"

namespace hicom {

std::vector<FacePair> sample_pairs(const std::vector<int>& labels, int pair_cap, uint64_t seed) {
    const int n = static_cast<int>(labels.size());
    std::vector<FacePair> all;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            all.push_back({i, j, labels[i] == labels[j] ? 1 : 0, 0.0});
    if (static_cast<int>(all.size()) <= pair_cap) return all;

    Rng rng(seed);
    // Keep one dissimilar pair when the frame has mixed labels, then fill
    // uniformly from the rest (partial Fisher-Yates).
    std::vector<FacePair> out;
    std::vector<FacePair> pool;
    int keep_dissimilar = -1;
    for (size_t k = 0; k < all.size(); ++k)
        if (all[k].y_pl == 0) { keep_dissimilar = static_cast<int>(k); break; }
    for (size_t k = 0; k < all.size(); ++k)
        if (static_cast<int>(k) != keep_dissimilar) pool.push_back(all[k]);
    if (keep_dissimilar >= 0) out.push_back(all[keep_dissimilar]);

    const int need = pair_cap - static_cast<int>(out.size());
    for (int k = 0; k < need; ++k) {
        size_t pick = k + rng.next_below(pool.size() - k);
        std::swap(pool[k], pool[pick]);
        out.push_back(pool[k]);
    }
    std::sort(out.begin(), out.end(), [](const FacePair& a, const FacePair& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    return out;
}

double contrastive_term(const std::vector<FacePair>& pairs, double margin) {
    if (pairs.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& p : pairs) {
        if (p.y_pl)
            acc += p.dis_pl;
        else
            acc += std::max(0.0, margin - p.dis_pl);
    }
    return acc / static_cast<double>(pairs.size());
}

double loss_app(const nn::Mat& face_logits, const std::vector<int>& labels,
                const std::vector<FacePair>& pairs, const InterFaceConfig& cfg,
                nn::Mat* dlogits) {
    double ce = nn::softmax_ce(face_logits, labels, dlogits);
    return ce + cfg.lambda_comp * contrastive_term(pairs, cfg.margin);
}

double loss_app_frame(const std::vector<nn::Vec>& embeddings, const nn::Mat& logits,
                      const std::vector<int>& labels, std::vector<FacePair>& pairs,
                      const InterFaceConfig& cfg,
                      std::vector<nn::Vec>* dembeddings, nn::Mat* dlogits) {
    for (auto& p : pairs)
        p.dis_pl = (embeddings[p.i] - embeddings[p.j]).norm();
    double loss = loss_app(logits, labels, pairs, cfg, dlogits);
    if (!dembeddings) return loss;

    dembeddings->assign(embeddings.size(), nn::Vec::Zero(embeddings[0].size()));
    if (pairs.empty()) return loss;
    const double w = cfg.lambda_comp / static_cast<double>(pairs.size());
    for (const auto& p : pairs) {
        if (p.dis_pl < 1e-12) continue;  // subgradient 0 at coincident embeddings
        nn::Vec unit = (embeddings[p.i] - embeddings[p.j]) / p.dis_pl;
        if (p.y_pl) {
            (*dembeddings)[p.i] += w * unit;
            (*dembeddings)[p.j] -= w * unit;
        } else if (cfg.margin - p.dis_pl > 0.0) {
            (*dembeddings)[p.i] -= w * unit;
            (*dembeddings)[p.j] += w * unit;
        }
    }
    return loss;
}

InterFaceNet::InterFaceNet(const InterFaceConfig& cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg.input_size % cfg.patch != 0)
        throw std::invalid_argument("InterFaceNet: input size not a multiple of patch");
    const int per_side = cfg.input_size / cfg.patch;
    n_patches_ = per_side * per_side;
    const int d = cfg.embed_dim;

    Rng rng(seed);
    patch_embed_.init(d, 3 * cfg.patch * cfg.patch, rng);
    pos_embed_.resize(d, n_patches_ + 1);
    for (long j = 0; j < pos_embed_.cols(); ++j)
        for (long i = 0; i < pos_embed_.rows(); ++i) pos_embed_(i, j) = rng.uniform(-0.02, 0.02);
    gpos_embed_ = nn::Mat::Zero(d, n_patches_ + 1);
    cls_token_.resize(d);
    for (long i = 0; i < d; ++i) cls_token_[i] = rng.uniform(-0.02, 0.02);
    gcls_token_ = nn::Vec::Zero(d);

    blocks_.resize(cfg.blocks);
    for (auto& b : blocks_) {
        b.ln1.init(d);
        b.attn.init(d, cfg.heads, rng);
        b.ln2.init(d);
        b.fc1.init(cfg.mlp_dim, d, rng);
        b.fc2.init(d, cfg.mlp_dim, rng);
    }
    final_ln_.init(d);
    head_.init(2, d, rng);
}

nn::Mat InterFaceNet::patches_of(const Image& crop) const {
    if (crop.h != cfg_.input_size || crop.w != cfg_.input_size)
        throw std::invalid_argument("InterFaceNet: crop size mismatch (expected " +
                                    std::to_string(cfg_.input_size) + ", got " +
                                    std::to_string(crop.h) + "x" + std::to_string(crop.w) + ")");
    const int p = cfg_.patch;
    const int per_side = cfg_.input_size / p;
    nn::Mat patches(3 * p * p, n_patches_);
    for (int py = 0; py < per_side; ++py)
        for (int px = 0; px < per_side; ++px) {
            long col = static_cast<long>(py) * per_side + px;
            long row = 0;
            for (int c = 0; c < 3; ++c)
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx, ++row)
                        patches(row, col) = crop.at(c, py * p + dy, px * p + dx);
        }
    return patches;
}

void InterFaceNet::forward(const Image& crop, Acts& a, nn::Vec& embedding, nn::Vec& logits) const {
    a.patches = patches_of(crop);
    nn::Mat embedded = patch_embed_.forward(a.patches);  // (D x n_patches)

    const long t = n_patches_ + 1;
    a.tokens0.resize(cfg_.embed_dim, t);
    a.tokens0.col(0) = cls_token_;
    a.tokens0.rightCols(n_patches_) = embedded;
    a.tokens0 += pos_embed_;

    nn::Mat x = a.tokens0;
    a.blocks.resize(blocks_.size());
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
        const Block& b = blocks_[bi];
        auto& ba = a.blocks[bi];
        ba.in_tokens = x;
        ba.ln1_out = b.ln1.forward(x);
        nn::Mat attn_out = b.attn.forward(ba.ln1_out, ba.attn_ctx);
        ba.after_attn = x + attn_out;
        ba.ln2_out = b.ln2.forward(ba.after_attn);
        ba.fc1_out = b.fc1.forward(ba.ln2_out);
        ba.fc1_act = nn::gelu(ba.fc1_out);
        x = ba.after_attn + b.fc2.forward(ba.fc1_act);
    }
    a.final_in = x;
    a.final_out = final_ln_.forward(x);
    embedding = a.final_out.col(0);
    logits = head_.forward(embedding);
}

void InterFaceNet::backward(const nn::Vec& dembedding, const nn::Vec& dlogits, const Acts& a) {
    nn::Vec demb = dembedding;
    if (dlogits.size() > 0) {
        nn::Mat d = head_.backward(dlogits, a.final_out.col(0));
        demb += d.col(0);
    }
    nn::Mat dfinal = nn::Mat::Zero(a.final_out.rows(), a.final_out.cols());
    dfinal.col(0) = demb;
    nn::Mat dx = final_ln_.backward(dfinal, a.final_in);

    for (size_t bi = blocks_.size(); bi-- > 0;) {
        auto& b = blocks_[bi];
        const auto& ba = a.blocks[bi];
        nn::Mat dfc1_act = b.fc2.backward(dx, ba.fc1_act);
        nn::Mat dfc1 = nn::gelu_backward(dfc1_act, ba.fc1_out);
        nn::Mat dln2 = b.fc1.backward(dfc1, ba.ln2_out);
        nn::Mat dafter = dx + b.ln2.backward(dln2, ba.after_attn);
        nn::Mat dattn = b.attn.backward(dafter, ba.attn_ctx);
        nn::Mat dln1 = b.ln1.backward(dattn, ba.in_tokens);
        dx = dafter + dln1;
    }

    gcls_token_ += dx.col(0);
    gpos_embed_ += dx;
    patch_embed_.backward(dx.rightCols(n_patches_), a.patches);
}

InterFaceNet::FaceOutput InterFaceNet::embed_face(const Image& crop) const {
    Acts a;
    FaceOutput out;
    forward(crop, a, out.embedding, out.logits);
    return out;
}

std::vector<InterFaceNet::FaceOutput> InterFaceNet::embed_faces(
    const std::vector<Image>& crops) const {
    if (crops.empty()) throw std::invalid_argument("embed_faces: no crops");
    std::vector<FaceOutput> out;
    out.reserve(crops.size());
    for (const auto& c : crops) out.push_back(embed_face(c));
    return out;
}

double InterFaceNet::score_face(const Image& crop) const {
    FaceOutput out = embed_face(crop);
    return nn::softmax(out.logits)[1];
}

nn::ParamSet InterFaceNet::params() {
    nn::ParamSet p;
    patch_embed_.collect("m2.patch_embed", p.views);
    p.views.push_back({"m2.pos_embed", pos_embed_.data(), gpos_embed_.data(),
                       static_cast<long>(pos_embed_.size())});
    p.views.push_back({"m2.cls_token", cls_token_.data(), gcls_token_.data(),
                       static_cast<long>(cls_token_.size())});
    for (size_t i = 0; i < blocks_.size(); ++i) {
        std::string prefix = "m2.block" + std::to_string(i);
        blocks_[i].ln1.collect(prefix + ".ln1", p.views);
        blocks_[i].attn.collect(prefix + ".attn", p.views);
        blocks_[i].ln2.collect(prefix + ".ln2", p.views);
        blocks_[i].fc1.collect(prefix + ".fc1", p.views);
        blocks_[i].fc2.collect(prefix + ".fc2", p.views);
    }
    final_ln_.collect("m2.final_ln", p.views);
    head_.collect("m2.head", p.views);
    return p;
}

}  // namespace hicom
