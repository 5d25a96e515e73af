#include "hicom/scene_motion.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "hicom/gaze.hpp"  // image_to_mat
#include "hicom/rng.hpp"

namespace hicom {

namespace {

struct RoiGrid {
    double x0, y0, cw, ch;  // in map-cell coordinates
};

RoiGrid roi_grid(const FeatureMap& map, const FaceBox& box, int g) {
    if (!box.valid())
        throw std::invalid_argument("roi_align: zero-area box after stride scaling");
    const double s = static_cast<double>(map.stride);
    FaceBox mb{box.x / s, box.y / s, box.w / s, box.h / s};
    if (mb.w <= 0.0 || mb.h <= 0.0)
        throw std::invalid_argument("roi_align: zero-area box after stride scaling");
    return {mb.x, mb.y, mb.w / g, mb.h / g};
}

inline bool inside(const FaceBox& b, double x, double y) {
    return x >= b.x && x < b.x2() && y >= b.y && y < b.y2();
}

}  // namespace

nn::Mat roi_align_sample(const FeatureMap& map, const FaceBox& box, int g,
                         const std::optional<FaceBox>& hole) {
    RoiGrid grid = roi_grid(map, box, g);
    const double s = static_cast<double>(map.stride);
    nn::Mat out(map.data.rows(), static_cast<long>(g) * g);
    for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
            const long col = static_cast<long>(iy) * g + ix;
            double sx = grid.x0 + (ix + 0.5) * grid.cw - 0.5;
            double sy = grid.y0 + (iy + 0.5) * grid.ch - 0.5;
            if (hole && inside(*hole, (sx + 0.5) * s, (sy + 0.5) * s)) {
                out.col(col).setZero();
                continue;
            }
            double cx = std::clamp(sx, 0.0, static_cast<double>(map.w - 1));
            double cy = std::clamp(sy, 0.0, static_cast<double>(map.h - 1));
            int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
            int x1 = std::min(x0 + 1, map.w - 1), y1 = std::min(y0 + 1, map.h - 1);
            double fx = cx - x0, fy = cy - y0;
            out.col(col) = (1 - fy) * ((1 - fx) * map.data.col(static_cast<long>(y0) * map.w + x0) +
                                       fx * map.data.col(static_cast<long>(y0) * map.w + x1)) +
                           fy * ((1 - fx) * map.data.col(static_cast<long>(y1) * map.w + x0) +
                                 fx * map.data.col(static_cast<long>(y1) * map.w + x1));
        }
    return out;
}

void roi_align_backward(const nn::Mat& dpooled, FeatureMap& dmap, const FaceBox& box, int g,
                        const std::optional<FaceBox>& hole) {
    RoiGrid grid = roi_grid(dmap, box, g);
    const double s = static_cast<double>(dmap.stride);
    for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
            const long col = static_cast<long>(iy) * g + ix;
            double sx = grid.x0 + (ix + 0.5) * grid.cw - 0.5;
            double sy = grid.y0 + (iy + 0.5) * grid.ch - 0.5;
            if (hole && inside(*hole, (sx + 0.5) * s, (sy + 0.5) * s)) continue;
            double cx = std::clamp(sx, 0.0, static_cast<double>(dmap.w - 1));
            double cy = std::clamp(sy, 0.0, static_cast<double>(dmap.h - 1));
            int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
            int x1 = std::min(x0 + 1, dmap.w - 1), y1 = std::min(y0 + 1, dmap.h - 1);
            double fx = cx - x0, fy = cy - y0;
            dmap.data.col(static_cast<long>(y0) * dmap.w + x0) += (1 - fy) * (1 - fx) * dpooled.col(col);
            dmap.data.col(static_cast<long>(y0) * dmap.w + x1) += (1 - fy) * fx * dpooled.col(col);
            dmap.data.col(static_cast<long>(y1) * dmap.w + x0) += fy * (1 - fx) * dpooled.col(col);
            dmap.data.col(static_cast<long>(y1) * dmap.w + x1) += fy * fx * dpooled.col(col);
        }
}

double loss_sp(const nn::Mat& face_logits, const nn::Vec& frame_logits,
               const std::vector<int>& y_fa, int y_fr, double lambda_fa, double lambda_fr,
               nn::Mat* dface_logits, nn::Vec* dframe_logits) {
    if (y_fa.empty()) throw std::invalid_argument("loss_sp: empty face list");
    if (!face_logits.allFinite() || !frame_logits.allFinite())
        throw std::runtime_error("loss_sp: non-finite logits (training diverged)");

    double face_ce = nn::softmax_ce(face_logits, y_fa, dface_logits);
    nn::Mat frame_dl;
    nn::Mat frame_logits_m = frame_logits;
    double frame_ce = nn::softmax_ce(frame_logits_m, {y_fr}, dframe_logits ? &frame_dl : nullptr);
    if (dface_logits) *dface_logits *= lambda_fa;
    if (dframe_logits) *dframe_logits = lambda_fr * frame_dl.col(0);
    return lambda_fa * face_ce + lambda_fr * frame_ce;
}

SceneMotionNet::SceneMotionNet(const SceneMotionConfig& cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg.n_scales < 1 || cfg.n_scales > 3)
        throw std::invalid_argument("SceneMotionNet: n_scales must be in [1,3]");
    if (cfg.temporal_window < 1)
        throw std::invalid_argument("SceneMotionNet: temporal window must be >= 1");
    Rng rng(seed);
    conv1_.init(3, cfg.c1, 5, 4, 2, rng);
    conv2_.init(cfg.c1, cfg.c2, 3, 2, 1, rng);
    conv3_.init(cfg.c2, cfg.c3, 3, 2, 1, rng);
    face_proj_.init(cfg.embed_dim, pooled_dim(), rng);
    bg_proj_.init(cfg.embed_dim, pooled_dim(), rng);
    const int token_dim = 2 * cfg.embed_dim;
    // temporal filter shared across steps of a track
    face_fc1_.init(cfg.hidden, token_dim, rng);
    face_fc2_.init(2, cfg.hidden, rng);
    frame_pool_.init(token_dim, rng);
    frame_head_.init(2, token_dim, rng);
}

FramePyramid SceneMotionNet::extract_multiscale_features(const Image& frame,
                                                         TrunkActs& a) const {
    if (frame.h != cfg_.input_h || frame.w != cfg_.input_w)
        throw std::invalid_argument("SceneMotionNet: frame size mismatch");
    a.h0 = frame.h;
    a.w0 = frame.w;
    a.x0 = image_to_mat(frame);

    a.c1_out = conv1_.forward(a.x0, a.h0, a.w0, a.c1_cols);
    int h1 = conv1_.out_h(a.h0), w1 = conv1_.out_w(a.w0);
    nn::Mat act1 = nn::gelu(a.c1_out);

    a.c2_out = conv2_.forward(act1, h1, w1, a.c2_cols);
    int h2 = conv2_.out_h(h1), w2 = conv2_.out_w(w1);
    nn::Mat act2 = nn::gelu(a.c2_out);

    a.c3_out = conv3_.forward(act2, h2, w2, a.c3_cols);
    int h3 = conv3_.out_h(h2), w3 = conv3_.out_w(w2);
    nn::Mat act3 = nn::gelu(a.c3_out);

    if (!act3.allFinite())
        throw std::runtime_error("SceneMotionNet: non-finite activations (training diverged)");

    FramePyramid pyr;
    pyr.push_back({std::move(act1), h1, w1, 4});
    pyr.push_back({std::move(act2), h2, w2, 8});
    pyr.push_back({std::move(act3), h3, w3, 16});
    pyr.resize(cfg_.n_scales);
    return pyr;
}

FramePyramid SceneMotionNet::extract_multiscale_features(const Image& frame) const {
    TrunkActs a;
    return extract_multiscale_features(frame, a);
}

nn::Vec SceneMotionNet::pool_region(const FramePyramid& pyramid, const FaceBox& box,
                                    bool background) const {
    const int g = cfg_.roi_output;
    nn::Vec concat(pooled_dim());
    long off = 0;
    FaceBox region = box;
    std::optional<FaceBox> hole;
    if (background) {
        region = box.dilated(cfg_.bg_dilation)
                     .clamped(cfg_.input_h, cfg_.input_w);
        hole = box;
    }
    for (const auto& map : pyramid) {
        nn::Mat pooled = roi_align_sample(map, region, g, hole);
        for (long c = 0; c < pooled.rows(); ++c)
            for (long i = 0; i < pooled.cols(); ++i) concat[off++] = pooled(c, i);
    }
    const nn::Linear& proj = background ? bg_proj_ : face_proj_;
    return proj.forward(concat);
}

void SceneMotionNet::forward(const std::vector<Image>& frames,
                             const std::vector<std::vector<FaceBox>>& boxes, ClipActs& a,
                             nn::Mat& face_logits, nn::Vec& frame_logits) const {
    if (frames.empty()) throw std::invalid_argument("SceneMotionNet: empty clip");
    if (frames.size() != boxes.size())
        throw std::invalid_argument("SceneMotionNet: frames/boxes mismatch");
    const int T = static_cast<int>(frames.size());
    const int F = static_cast<int>(boxes[0].size());
    if (F == 0) throw std::invalid_argument("SceneMotionNet: no face tracks");
    if (T != cfg_.temporal_window)
        throw std::invalid_argument("SceneMotionNet: clip window must match T");
    for (const auto& b : boxes)
        if (static_cast<int>(b.size()) != F)
            throw std::invalid_argument("SceneMotionNet: inconsistent face count across frames");

    a.n_faces = F;
    a.n_frames = T;
    a.boxes = boxes;
    a.trunk.resize(T);
    a.pyramids.resize(T);
    for (int t = 0; t < T; ++t)
        a.pyramids[t] = extract_multiscale_features(frames[t], a.trunk[t]);

    const int g = cfg_.roi_output;
    const int token_dim = 2 * cfg_.embed_dim;
    const int n_diffs = std::max(1, T - 1);
    a.pooled.assign(T, std::vector<std::array<nn::Mat, 2>>(F));
    a.tokens.resize(token_dim, static_cast<long>(F) * T);

    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f) {
            const FaceBox& box = boxes[t][f];
            FaceBox bg = box.dilated(cfg_.bg_dilation).clamped(cfg_.input_h, cfg_.input_w);
            nn::Vec face_concat(pooled_dim()), bg_concat(pooled_dim());
            long off_face = 0, off_bg = 0;
            for (int s = 0; s < static_cast<int>(a.pyramids[t].size()); ++s) {
                nn::Mat pf = roi_align_sample(a.pyramids[t][s], box, g);
                nn::Mat pb = roi_align_sample(a.pyramids[t][s], bg, g, box);
                for (long c = 0; c < pf.rows(); ++c)
                    for (long i = 0; i < pf.cols(); ++i) {
                        face_concat[off_face++] = pf(c, i);
                        bg_concat[off_bg++] = pb(c, i);
                    }
            }
            a.pooled[t][f][0] = face_concat;
            a.pooled[t][f][1] = bg_concat;
            long col = static_cast<long>(f) * T + t;
            a.tokens.col(col).head(cfg_.embed_dim) = face_proj_.forward(face_concat);
            a.tokens.col(col).tail(cfg_.embed_dim) = bg_proj_.forward(bg_concat);
        }

    // Motion tokens: consecutive differences per face track.
    a.diff_tokens.resize(token_dim, static_cast<long>(F) * n_diffs);
    for (int f = 0; f < F; ++f)
        for (int d = 0; d < n_diffs; ++d) {
            long col = static_cast<long>(f) * n_diffs + d;
            if (T > 1)
                a.diff_tokens.col(col) = a.tokens.col(static_cast<long>(f) * T + d + 1) -
                                         a.tokens.col(static_cast<long>(f) * T + d);
            else
                a.diff_tokens.col(col).setZero();
        }

    // Per-face temporal head: shared filter on every motion token, then
    // mean pooling over the track.
    face_logits.resize(2, F);
    a.fc1_out = face_fc1_.forward(a.diff_tokens);
    nn::Mat fc1_act = nn::gelu(a.fc1_out);
    a.face_hidden.resize(cfg_.hidden, F);
    for (int f = 0; f < F; ++f) {
        a.face_hidden.col(f) =
            fc1_act.middleCols(static_cast<long>(f) * n_diffs, n_diffs).rowwise().mean();
        face_logits.col(f) = face_fc2_.forward(a.face_hidden.col(f));
    }

    // Frame head: attention pooling over every motion token.
    a.frame_vec = frame_pool_.forward(a.diff_tokens, a.pool_ctx);
    frame_logits = frame_head_.forward(a.frame_vec);
}

void SceneMotionNet::backward(const nn::Mat& dface_logits, const nn::Vec& dframe_logits,
                              ClipActs& a) {
    const int T = a.n_frames, F = a.n_faces;
    const int token_dim = 2 * cfg_.embed_dim;
    const int n_diffs = std::max(1, T - 1);
    nn::Mat ddiff = nn::Mat::Zero(token_dim, static_cast<long>(F) * n_diffs);

    // Frame head.
    nn::Mat dframe_vec = frame_head_.backward(dframe_logits, a.frame_vec);
    ddiff += frame_pool_.backward(dframe_vec.col(0), a.pool_ctx);

    // Per-face heads: fc2 backward per face, spread through the mean pool,
    // then one shared fc1 backward over all motion tokens.
    nn::Mat dfc1_act = nn::Mat::Zero(cfg_.hidden, a.fc1_out.cols());
    for (int f = 0; f < F; ++f) {
        nn::Mat dh = face_fc2_.backward(dface_logits.col(f), a.face_hidden.col(f));
        for (int d = 0; d < n_diffs; ++d)
            dfc1_act.col(static_cast<long>(f) * n_diffs + d) =
                dh.col(0) / static_cast<double>(n_diffs);
    }
    nn::Mat dfc1 = nn::gelu_backward(dfc1_act, a.fc1_out);
    ddiff += face_fc1_.backward(dfc1, a.diff_tokens);

    // Diff tokens back to per-frame tokens.
    nn::Mat dtokens = nn::Mat::Zero(token_dim, static_cast<long>(F) * T);
    if (T > 1)
        for (int f = 0; f < F; ++f)
            for (int d = 0; d < n_diffs; ++d) {
                long col = static_cast<long>(f) * n_diffs + d;
                dtokens.col(static_cast<long>(f) * T + d + 1) += ddiff.col(col);
                dtokens.col(static_cast<long>(f) * T + d) -= ddiff.col(col);
            }

    // Region projections and RoI scatter into per-frame pyramid grads.
    std::vector<FramePyramid> dpyr(T);
    for (int t = 0; t < T; ++t) {
        dpyr[t].resize(a.pyramids[t].size());
        for (size_t s = 0; s < a.pyramids[t].size(); ++s) {
            dpyr[t][s].data = nn::Mat::Zero(a.pyramids[t][s].data.rows(),
                                            a.pyramids[t][s].data.cols());
            dpyr[t][s].h = a.pyramids[t][s].h;
            dpyr[t][s].w = a.pyramids[t][s].w;
            dpyr[t][s].stride = a.pyramids[t][s].stride;
        }
    }
    const int g = cfg_.roi_output;
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f) {
            long col = static_cast<long>(f) * T + t;
            nn::Vec dfv = dtokens.col(col).head(cfg_.embed_dim);
            nn::Vec dbv = dtokens.col(col).tail(cfg_.embed_dim);
            nn::Mat dface_concat = face_proj_.backward(dfv, a.pooled[t][f][0]);
            nn::Mat dbg_concat = bg_proj_.backward(dbv, a.pooled[t][f][1]);

            const FaceBox& box = a.boxes[t][f];
            FaceBox bg = box.dilated(cfg_.bg_dilation).clamped(cfg_.input_h, cfg_.input_w);
            long off = 0;
            for (size_t s = 0; s < a.pyramids[t].size(); ++s) {
                long rows = a.pyramids[t][s].data.rows();
                nn::Mat dpf(rows, static_cast<long>(g) * g), dpb(rows, static_cast<long>(g) * g);
                for (long c = 0; c < rows; ++c)
                    for (long i = 0; i < static_cast<long>(g) * g; ++i) {
                        dpf(c, i) = dface_concat(off, 0);
                        dpb(c, i) = dbg_concat(off, 0);
                        ++off;
                    }
                roi_align_backward(dpf, dpyr[t][s], box, g);
                roi_align_backward(dpb, dpyr[t][s], bg, g, box);
            }
        }

    // Trunk backward per frame.
    for (int t = 0; t < T; ++t) {
        TrunkActs& ta = a.trunk[t];
        int h1 = conv1_.out_h(ta.h0), w1 = conv1_.out_w(ta.w0);
        int h2 = conv2_.out_h(h1), w2 = conv2_.out_w(w1);

        nn::Mat dact3 = dpyr[t].size() > 2 ? dpyr[t][2].data
                                           : nn::Mat::Zero(cfg_.c3, ta.c3_out.cols());
        nn::Mat dc3 = nn::gelu_backward(dact3, ta.c3_out);
        nn::Mat dact2 = conv3_.backward(dc3, ta.c3_cols, h2, w2);
        if (dpyr[t].size() > 1) dact2 += dpyr[t][1].data;
        nn::Mat dc2 = nn::gelu_backward(dact2, ta.c2_out);
        nn::Mat dact1 = conv2_.backward(dc2, ta.c2_cols, h1, w1);
        dact1 += dpyr[t][0].data;
        nn::Mat dc1 = nn::gelu_backward(dact1, ta.c1_out);
        conv1_.backward(dc1, ta.c1_cols, ta.h0, ta.w0);
    }
}

SceneMotionNet::ClipScores SceneMotionNet::score_clip(
    const std::vector<Image>& frames, const std::vector<std::vector<FaceBox>>& boxes) const {
    std::vector<Image> fr = frames;
    std::vector<std::vector<FaceBox>> bx = boxes;
    pad_clip_window(fr, bx, cfg_.temporal_window);

    ClipActs a;
    nn::Mat face_logits;
    nn::Vec frame_logits;
    forward(fr, bx, a, face_logits, frame_logits);

    ClipScores out;
    out.face_scores.resize(a.n_faces);
    for (int f = 0; f < a.n_faces; ++f)
        out.face_scores[f] = nn::softmax(face_logits.col(f))[1];
    out.frame_score = nn::softmax(frame_logits)[1];
    return out;
}

nn::ParamSet SceneMotionNet::params() {
    nn::ParamSet p;
    conv1_.collect("m1.conv1", p.views);
    conv2_.collect("m1.conv2", p.views);
    conv3_.collect("m1.conv3", p.views);
    face_proj_.collect("m1.face_proj", p.views);
    bg_proj_.collect("m1.bg_proj", p.views);
    face_fc1_.collect("m1.face_fc1", p.views);
    face_fc2_.collect("m1.face_fc2", p.views);
    frame_pool_.collect("m1.frame_pool", p.views);
    frame_head_.collect("m1.frame_head", p.views);
    return p;
}

void pad_clip_window(std::vector<Image>& frames, std::vector<std::vector<FaceBox>>& boxes, int T) {
    if (frames.empty()) throw std::invalid_argument("pad_clip_window: empty clip");
    if (static_cast<int>(frames.size()) > T) {
        frames.resize(T);
        boxes.resize(T);
        return;
    }
    while (static_cast<int>(frames.size()) < T) {
        frames.push_back(frames.back());
        boxes.push_back(boxes.back());
    }
}

}  // namespace hicom
