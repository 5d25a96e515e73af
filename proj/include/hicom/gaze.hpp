#pragma once

#include <vector>

#include "hicom/image.hpp"
#include "hicom/nn.hpp"
#include "hicom/types.hpp"

namespace hicom {

struct GazeConfig {
    int eye_size = 32;        // eye crop input edge
    double threshold = 0.5;   // p_locked decision threshold
    int c1 = 8, c2 = 16, c3 = 32;
};

struct GazeCounts {
    int n_locked = 0;
    int n_off = 0;
    int total() const { return n_locked + n_off; }
};

// Group-consensus rule over per-face locked flags:
//   - majority not looking at camera (n_O > n_L): every face -> NA;
//   - an off-camera face -> fake iff n_L - n_O > 1 or n_T == 2;
//   - a camera-locked face -> real; off-camera otherwise -> real.
std::vector<ModuleVerdict::Flag> gaze_rule(const std::vector<int>& locked_flags);

GazeCounts count_gaze(const std::vector<int>& locked_flags);

// Small residual convnet scoring p(gaze locked on camera) from an eye crop.
class GazeNet {
public:
    explicit GazeNet(const GazeConfig& cfg, uint64_t seed);

    // p_locked in [0,1]; crop must match the configured eye size.
    double classify_gaze(const Image& eye_crop) const;

    struct Acts;
    // Training path: returns logits (2), keeps intermediates in acts.
    nn::Vec forward(const Image& eye_crop, Acts& acts) const;
    void backward(const nn::Vec& dlogits, const Acts& acts);

    nn::ParamSet params();
    const GazeConfig& config() const { return cfg_; }

private:
    GazeConfig cfg_;
    nn::Conv2d conv1_, conv2_, res_a_, res_b_, conv3_;
    nn::Linear head_;

    friend struct GazeNetActs;
};

struct GazeNet::Acts {
    nn::Mat x0;
    nn::Mat c1_cols, c1_out;
    nn::Mat c2_cols, c2_out, c2_act;
    nn::Mat ra_cols, ra_out, ra_act;
    nn::Mat rb_cols, rb_out, sum, sum_act;
    nn::Mat c3_cols, c3_out, c3_act;
    nn::Vec pooled;
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0, h3 = 0, w3 = 0;
};

// Converts a planar image to the (3 x H*W) matrix layout used by conv nets.
nn::Mat image_to_mat(const Image& img);

}  // namespace hicom
