#include "hicom/gaze.hpp"

#include <stdexcept>

namespace hicom {

GazeCounts count_gaze(const std::vector<int>& locked_flags) {
    GazeCounts c;
    for (int f : locked_flags) (f ? c.n_locked : c.n_off)++;
    return c;
}

std::vector<ModuleVerdict::Flag> gaze_rule(const std::vector<int>& locked_flags) {
    if (locked_flags.empty()) throw std::invalid_argument("gaze_rule: no faces");
    GazeCounts c = count_gaze(locked_flags);
    std::vector<ModuleVerdict::Flag> out(locked_flags.size());
    if (c.n_off > c.n_locked) {
        std::fill(out.begin(), out.end(), ModuleVerdict::Flag::na);
        return out;
    }
    const bool flag_condition = (c.n_locked - c.n_off > 1) || (c.total() == 2);
    for (size_t i = 0; i < locked_flags.size(); ++i) {
        if (locked_flags[i])
            out[i] = ModuleVerdict::Flag::real;
        else
            out[i] = flag_condition ? ModuleVerdict::Flag::fake : ModuleVerdict::Flag::real;
    }
    return out;
}

nn::Mat image_to_mat(const Image& img) {
    nn::Mat m(3, static_cast<long>(img.h) * img.w);
    for (int c = 0; c < 3; ++c)
        for (long i = 0; i < static_cast<long>(img.h) * img.w; ++i)
            m(c, i) = img.data[static_cast<size_t>(c) * img.h * img.w + i];
    return m;
}

GazeNet::GazeNet(const GazeConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    conv1_.init(3, cfg.c1, 3, 1, 1, rng);
    conv2_.init(cfg.c1, cfg.c2, 3, 2, 1, rng);
    res_a_.init(cfg.c2, cfg.c2, 3, 1, 1, rng);
    res_b_.init(cfg.c2, cfg.c2, 3, 1, 1, rng);
    conv3_.init(cfg.c2, cfg.c3, 3, 2, 1, rng);
    head_.init(2, cfg.c3, rng);
}

nn::Vec GazeNet::forward(const Image& eye_crop, Acts& a) const {
    if (eye_crop.h != cfg_.eye_size || eye_crop.w != cfg_.eye_size)
        throw std::invalid_argument("GazeNet: eye crop size mismatch");
    if (eye_crop.h < 4 || eye_crop.w < 4)
        throw std::invalid_argument("GazeNet: degenerate eye crop");

    a.x0 = image_to_mat(eye_crop);
    int h = eye_crop.h, w = eye_crop.w;
    a.c1_out = conv1_.forward(a.x0, h, w, a.c1_cols);
    a.h1 = conv1_.out_h(h); a.w1 = conv1_.out_w(w);
    nn::Mat c1_act = nn::gelu(a.c1_out);

    a.c2_out = conv2_.forward(c1_act, a.h1, a.w1, a.c2_cols);
    a.h2 = conv2_.out_h(a.h1); a.w2 = conv2_.out_w(a.w1);
    a.c2_act = nn::gelu(a.c2_out);

    a.ra_out = res_a_.forward(a.c2_act, a.h2, a.w2, a.ra_cols);
    a.ra_act = nn::gelu(a.ra_out);
    a.rb_out = res_b_.forward(a.ra_act, a.h2, a.w2, a.rb_cols);
    a.sum = a.rb_out + a.c2_act;
    a.sum_act = nn::gelu(a.sum);

    a.c3_out = conv3_.forward(a.sum_act, a.h2, a.w2, a.c3_cols);
    a.h3 = conv3_.out_h(a.h2); a.w3 = conv3_.out_w(a.w2);
    a.c3_act = nn::gelu(a.c3_out);

    a.pooled = a.c3_act.rowwise().mean();
    return head_.forward(a.pooled);
}

void GazeNet::backward(const nn::Vec& dlogits, const Acts& a) {
    nn::Mat dpooled = head_.backward(dlogits, a.pooled);
    const double inv = 1.0 / static_cast<double>(a.c3_act.cols());
    nn::Mat dc3_act = (dpooled * inv).replicate(1, a.c3_act.cols());
    nn::Mat dc3 = nn::gelu_backward(dc3_act, a.c3_out);
    nn::Mat dsum_act = conv3_.backward(dc3, a.c3_cols, a.h2, a.w2);
    nn::Mat dsum = nn::gelu_backward(dsum_act, a.sum);

    nn::Mat drb = dsum;  // residual branch
    nn::Mat dra_act = res_b_.backward(drb, a.rb_cols, a.h2, a.w2);
    nn::Mat dra = nn::gelu_backward(dra_act, a.ra_out);
    nn::Mat dc2_act = res_a_.backward(dra, a.ra_cols, a.h2, a.w2);
    dc2_act += dsum;  // skip connection

    nn::Mat dc2 = nn::gelu_backward(dc2_act, a.c2_out);
    nn::Mat dc1_act = conv2_.backward(dc2, a.c2_cols, a.h1, a.w1);
    nn::Mat dc1 = nn::gelu_backward(dc1_act, a.c1_out);
    conv1_.backward(dc1, a.c1_cols, cfg_.eye_size, cfg_.eye_size);
}

double GazeNet::classify_gaze(const Image& eye_crop) const {
    Acts a;
    nn::Vec logits = forward(eye_crop, a);
    // class 1 = locked on camera
    return nn::softmax(logits)[1];
}

nn::ParamSet GazeNet::params() {
    nn::ParamSet p;
    conv1_.collect("gaze.conv1", p.views);
    conv2_.collect("gaze.conv2", p.views);
    res_a_.collect("gaze.res_a", p.views);
    res_b_.collect("gaze.res_b", p.views);
    conv3_.collect("gaze.conv3", p.views);
    head_.collect("gaze.head", p.views);
    return p;
}

}  // namespace hicom
