#pragma once

#include <cstdint>
#include <vector>

#include "hicom/image.hpp"
#include "hicom/nn.hpp"

namespace hicom {

struct InterFaceConfig {
    int input_size = 224;   // face crop edge; must be a multiple of patch
    int patch = 16;
    int embed_dim = 64;     // transformer width and embedding size
    int heads = 2;
    int blocks = 4;
    int mlp_dim = 256;
    double margin = 1.0;    // minimum distance for dissimilar pairs
    double lambda_comp = 0.3;
    int pair_cap = 32;      // max pairs per frame
    double threshold = 0.5;
};

// Unordered within-frame face pair (i < j). y_pl = 1 when both faces share
// the same real/fake label, dis_pl = Euclidean distance of embeddings.
struct FacePair {
    int i = 0;
    int j = 0;
    int y_pl = 0;
    double dis_pl = 0.0;
};

// All within-frame pairs when their count fits the cap, otherwise a seeded
// uniform subsample guaranteed to keep at least one dissimilar pair when
// the frame has one. Frames with fewer than two faces yield no pairs.
std::vector<FacePair> sample_pairs(const std::vector<int>& labels, int pair_cap, uint64_t seed);

// Mean over pairs of y*dis + (1-y)*max(0, margin - dis); 0 for no pairs.
double contrastive_term(const std::vector<FacePair>& pairs, double margin);

// 4-block patch-token transformer producing a face embedding (CLS token)
// and 2-class logits per crop.
class InterFaceNet {
public:
    InterFaceNet(const InterFaceConfig& cfg, uint64_t seed);

    struct FaceOutput {
        nn::Vec embedding;  // embed_dim
        nn::Vec logits;     // 2
    };
    FaceOutput embed_face(const Image& crop) const;
    // Batch convenience; element i equals embed_face(crops[i]).
    std::vector<FaceOutput> embed_faces(const std::vector<Image>& crops) const;

    double score_face(const Image& crop) const;  // softmax fake probability

    struct Acts;
    void forward(const Image& crop, Acts& acts, nn::Vec& embedding, nn::Vec& logits) const;
    void backward(const nn::Vec& dembedding, const nn::Vec& dlogits, const Acts& acts);

    nn::ParamSet params();
    const InterFaceConfig& config() const { return cfg_; }
    int n_patches() const { return n_patches_; }

private:
    InterFaceConfig cfg_;
    int n_patches_ = 0;

    nn::Linear patch_embed_;
    nn::Mat pos_embed_;  // (D x n_patches+1), learned
    nn::Vec cls_token_;
    nn::Mat gpos_embed_;
    nn::Vec gcls_token_;

    struct Block {
        nn::LayerNorm ln1, ln2;
        nn::SelfAttention attn;
        nn::Linear fc1, fc2;
    };
    std::vector<Block> blocks_;
    nn::LayerNorm final_ln_;
    nn::Linear head_;

    nn::Mat patches_of(const Image& crop) const;
};

struct InterFaceNet::Acts {
    nn::Mat patches;      // (patch_dim x n_patches)
    nn::Mat tokens0;      // embedded + positional (D x T)
    struct BlockActs {
        nn::Mat in_tokens;
        nn::Mat ln1_out;
        nn::SelfAttention::Ctx attn_ctx;
        nn::Mat after_attn;
        nn::Mat ln2_out;
        nn::Mat fc1_out;
        nn::Mat fc1_act;
    };
    std::vector<BlockActs> blocks;
    nn::Mat final_in;
    nn::Mat final_out;
};

// Loss pieces shared by training and the acceptance checks:
// CE(face logits, labels) + lambda_comp * contrastive_term(pairs, margin).
double loss_app(const nn::Mat& face_logits, const std::vector<int>& labels,
                const std::vector<FacePair>& pairs, const InterFaceConfig& cfg,
                nn::Mat* dlogits = nullptr);

// Full frame loss: fills pair distances from the embeddings, returns
// CE + lambda_comp * contrastive, and optionally the gradients w.r.t.
// every embedding and logit column.
double loss_app_frame(const std::vector<nn::Vec>& embeddings, const nn::Mat& logits,
                      const std::vector<int>& labels, std::vector<FacePair>& pairs,
                      const InterFaceConfig& cfg,
                      std::vector<nn::Vec>* dembeddings = nullptr, nn::Mat* dlogits = nullptr);

}  // namespace hicom
