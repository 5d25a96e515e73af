#include "hicom/body_face.hpp"

#include <cmath>
#include <stdexcept>

#include "hicom/gaze.hpp"  // image_to_mat

namespace hicom {

Image block_face_in_body(const Image& body_crop, const FaceBox& face_box_in_body) {
    FaceBox box = face_box_in_body.clamped(body_crop.h, body_crop.w);
    if (!box.valid()) throw std::invalid_argument("block_face_in_body: face box outside crop");
    if (box.area() > 0.9 * body_crop.h * body_crop.w)
        throw std::invalid_argument("block_face_in_body: face covers >90% of body crop");

    const double sigma = 0.25 * box.w;
    Image out = body_crop;
    if (sigma <= 0.0) return out;

    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const int x0 = static_cast<int>(std::floor(box.x));
    const int y0 = static_cast<int>(std::floor(box.y));
    const int x1 = std::min(static_cast<int>(std::ceil(box.x2())), body_crop.w);
    const int y1 = std::min(static_cast<int>(std::ceil(box.y2())), body_crop.h);

    // Horizontal pass over the band of rows the vertical kernel can reach.
    const int band0 = std::max(0, y0 - radius);
    const int band1 = std::min(body_crop.h, y1 + radius);
    Image tmp = body_crop;
    for (int c = 0; c < 3; ++c)
        for (int y = band0; y < band1; ++y)
            for (int x = 0; x < body_crop.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int xi = std::clamp(x + i, 0, body_crop.w - 1);
                    acc += kernel[i + radius] * body_crop.at(c, y, xi);
                }
                tmp.at(c, y, x) = acc;
            }
    // Vertical pass, writing only inside the box.
    for (int c = 0; c < 3; ++c)
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int yi = std::clamp(y + i, 0, body_crop.h - 1);
                    acc += kernel[i + radius] * tmp.at(c, yi, x);
                }
                out.at(c, y, x) = acc;
            }
    return out;
}

int mismatch_rule(const AttributePrediction& pred) {
    if (!pred.body_available) return 0;
    return (pred.age_face != pred.age_body || pred.gender_face != pred.gender_body) ? 1 : 0;
}

AttributeNet::AttributeNet(const BodyFaceConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    conv1_.init(3, cfg.c1, 3, 2, 1, rng);
    conv2_.init(cfg.c1, cfg.c2, 3, 2, 1, rng);
    res_a_.init(cfg.c2, cfg.c2, 3, 1, 1, rng);
    res_b_.init(cfg.c2, cfg.c2, 3, 1, 1, rng);
    conv3_.init(cfg.c2, cfg.c3, 3, 2, 1, rng);
    age_head_.init(3, cfg.c3, rng);
    gender_head_.init(2, cfg.c3, rng);
}

void AttributeNet::forward(const Image& crop, Acts& a, nn::Vec& age_logits,
                           nn::Vec& gender_logits) const {
    if (crop.h != cfg_.input_size || crop.w != cfg_.input_size)
        throw std::invalid_argument("AttributeNet: crop size mismatch");
    a.h0 = crop.h; a.w0 = crop.w;
    a.x0 = image_to_mat(crop);

    a.c1_out = conv1_.forward(a.x0, a.h0, a.w0, a.c1_cols);
    a.h1 = conv1_.out_h(a.h0); a.w1 = conv1_.out_w(a.w0);
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
    age_logits = age_head_.forward(a.pooled);
    gender_logits = gender_head_.forward(a.pooled);
}

void AttributeNet::backward(const nn::Vec& dage, const nn::Vec& dgender, const Acts& a) {
    nn::Mat dpooled = age_head_.backward(dage, a.pooled);
    dpooled += gender_head_.backward(dgender, a.pooled);
    const double inv = 1.0 / static_cast<double>(a.c3_act.cols());
    nn::Mat dc3_act = (dpooled * inv).replicate(1, a.c3_act.cols());
    nn::Mat dc3 = nn::gelu_backward(dc3_act, a.c3_out);
    nn::Mat dsum_act = conv3_.backward(dc3, a.c3_cols, a.h2, a.w2);
    nn::Mat dsum = nn::gelu_backward(dsum_act, a.sum);

    nn::Mat dra_act = res_b_.backward(dsum, a.rb_cols, a.h2, a.w2);
    nn::Mat dra = nn::gelu_backward(dra_act, a.ra_out);
    nn::Mat dc2_act = res_a_.backward(dra, a.ra_cols, a.h2, a.w2);
    dc2_act += dsum;

    nn::Mat dc2 = nn::gelu_backward(dc2_act, a.c2_out);
    nn::Mat dc1_act = conv2_.backward(dc2, a.c2_cols, a.h1, a.w1);
    nn::Mat dc1 = nn::gelu_backward(dc1_act, a.c1_out);
    conv1_.backward(dc1, a.c1_cols, a.h0, a.w0);
}

AttributeNet::Output AttributeNet::classify(const Image& crop) const {
    Acts a;
    nn::Vec age_logits, gender_logits;
    forward(crop, a, age_logits, gender_logits);
    Output out;
    out.age_conf = nn::softmax(age_logits);
    out.gender_conf = nn::softmax(gender_logits);
    int ai = 0, gi = 0;
    out.age_conf.maxCoeff(&ai);
    out.gender_conf.maxCoeff(&gi);
    out.age = static_cast<AgeClass>(ai);
    out.gender = static_cast<GenderClass>(gi);
    return out;
}

nn::ParamSet AttributeNet::params() {
    nn::ParamSet p;
    conv1_.collect("attr.conv1", p.views);
    conv2_.collect("attr.conv2", p.views);
    res_a_.collect("attr.res_a", p.views);
    res_b_.collect("attr.res_b", p.views);
    conv3_.collect("attr.conv3", p.views);
    age_head_.collect("attr.age_head", p.views);
    gender_head_.collect("attr.gender_head", p.views);
    return p;
}

}  // namespace hicom
