#pragma once

#include <optional>
#include <vector>

#include "hicom/geometry.hpp"
#include "hicom/image.hpp"
#include "hicom/nn.hpp"

namespace hicom {

struct SceneMotionConfig {
    int input_h = 720, input_w = 1280;  // desk profile scales this down
    int temporal_window = 8;            // T
    int n_scales = 3;                   // pyramid levels at strides 4/8/16
    int roi_output = 7;                 // pooled grid edge
    int embed_dim = 128;                // region embedding width
    double lambda_fa = 0.5, lambda_fr = 0.5;
    int c1 = 12, c2 = 24, c3 = 32;      // trunk widths
    int hidden = 64;                    // temporal head width
    double bg_dilation = 2.0;           // background region = box dilated 2x minus box
    double threshold = 0.5;
};

struct FeatureMap {
    nn::Mat data;  // (channels x h*w)
    int h = 0, w = 0;
    int stride = 1;  // spatial stride relative to the input image
};

using FramePyramid = std::vector<FeatureMap>;

// Bilinear RoIAlign sampling: a roi_output x roi_output grid of cell-centre
// samples over `box` (input-pixel coordinates, divided by the map stride).
// Samples falling inside `hole` (same coordinates) are zeroed, which carves
// the face out of its dilated background region. Returns (channels x G*G).
nn::Mat roi_align_sample(const FeatureMap& map, const FaceBox& box, int roi_output,
                         const std::optional<FaceBox>& hole = std::nullopt);

// Gradient scatter matching roi_align_sample.
void roi_align_backward(const nn::Mat& dpooled, FeatureMap& dmap, const FaceBox& box,
                        int roi_output, const std::optional<FaceBox>& hole = std::nullopt);

// Eq.-style joint loss: lambda_fa * CE(face logits, y_fa) + lambda_fr *
// CE(frame logits, y_fr). Gradients are written when pointers are given.
double loss_sp(const nn::Mat& face_logits, const nn::Vec& frame_logits,
               const std::vector<int>& y_fa, int y_fr, double lambda_fa, double lambda_fr,
               nn::Mat* dface_logits = nullptr, nn::Vec* dframe_logits = nullptr);

// M1: multi-scale trunk over each frame, RoIAlign pooling of face and
// background regions, temporal per-face head and attention-pooled frame head.
class SceneMotionNet {
public:
    SceneMotionNet(const SceneMotionConfig& cfg, uint64_t seed);

    struct TrunkActs;
    FramePyramid extract_multiscale_features(const Image& frame) const;
    FramePyramid extract_multiscale_features(const Image& frame, TrunkActs& acts) const;

    // Projects pooled multi-scale region features to embed_dim.
    nn::Vec pool_region(const FramePyramid& pyramid, const FaceBox& box, bool background) const;

    struct ClipActs;
    // boxes[t][f]: face f's box in frame t; the face set must be consistent
    // across frames. Emits one logit pair per face and one per clip window.
    void forward(const std::vector<Image>& frames,
                 const std::vector<std::vector<FaceBox>>& boxes, ClipActs& acts,
                 nn::Mat& face_logits, nn::Vec& frame_logits) const;
    void backward(const nn::Mat& dface_logits, const nn::Vec& dframe_logits, ClipActs& acts);

    struct ClipScores {
        std::vector<double> face_scores;  // fake probability per face track
        double frame_score = 0.0;
    };
    ClipScores score_clip(const std::vector<Image>& frames,
                          const std::vector<std::vector<FaceBox>>& boxes) const;

    nn::ParamSet params();
    const SceneMotionConfig& config() const { return cfg_; }

private:
    SceneMotionConfig cfg_;
    nn::Conv2d conv1_, conv2_, conv3_;
    nn::Linear face_proj_, bg_proj_;
    nn::Linear face_fc1_, face_fc2_;  // temporal head over concatenated tokens
    nn::AttentionPool frame_pool_;
    nn::Linear frame_head_;

    int pooled_dim() const {
        int ch = cfg_.c1;
        if (cfg_.n_scales >= 2) ch += cfg_.c2;
        if (cfg_.n_scales >= 3) ch += cfg_.c3;
        return ch * cfg_.roi_output * cfg_.roi_output;
    }
};

struct SceneMotionNet::TrunkActs {
    nn::Mat x0;
    nn::Mat c1_cols, c1_out;
    nn::Mat c2_cols, c2_out;
    nn::Mat c3_cols, c3_out;
    int h0 = 0, w0 = 0;
};

struct SceneMotionNet::ClipActs {
    std::vector<TrunkActs> trunk;          // per frame
    std::vector<FramePyramid> pyramids;    // per frame (post-activation)
    std::vector<std::vector<FaceBox>> boxes;
    // pooled[t][f][0] = face sample matrix, [1] = background sample matrix
    std::vector<std::vector<std::array<nn::Mat, 2>>> pooled;
    nn::Mat tokens;      // (2D x F*T), token (f,t) at column f*T + t
    // motion tokens: consecutive-frame differences, (2D x F*(T-1));
    // appearance cancels, so the heads see motion only
    nn::Mat diff_tokens;
    nn::Mat fc1_out;      // shared temporal filter pre-activations
    nn::Mat face_hidden;  // (hidden x F), mean-pooled over each track
    nn::AttentionPool::Ctx pool_ctx;
    nn::Vec frame_vec;
    int n_faces = 0, n_frames = 0;
};

// Pads a short clip window by edge repetition (or truncates) to length T.
void pad_clip_window(std::vector<Image>& frames, std::vector<std::vector<FaceBox>>& boxes, int T);

}  // namespace hicom
