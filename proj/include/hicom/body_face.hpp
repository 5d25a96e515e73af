#pragma once

#include <optional>

#include "hicom/geometry.hpp"
#include "hicom/image.hpp"
#include "hicom/nn.hpp"
#include "hicom/types.hpp"

namespace hicom {

struct BodyFaceConfig {
    int input_size = 64;  // face and blocked-body crops share this edge
    int c1 = 12, c2 = 24, c3 = 48;
    // Optional confidence floor for the mismatch flag; disabled by default.
    std::optional<double> confidence_floor;
};

struct AttributePrediction {
    AgeClass age_face = AgeClass::middle;
    GenderClass gender_face = GenderClass::male;
    AgeClass age_body = AgeClass::middle;
    GenderClass gender_body = GenderClass::male;
    nn::Vec age_face_conf, gender_face_conf;  // softmax confidences
    nn::Vec age_body_conf, gender_body_conf;
    bool body_available = true;
};

// Gaussian blur restricted to the face box inside a body crop;
// sigma = 0.25 * face box width, kernel truncated at 3 sigma. Pixels
// outside the box are bit-identical to the input. Throws when the face
// box covers more than 90% of the crop (no body signal left).
Image block_face_in_body(const Image& body_crop, const FaceBox& face_box_in_body);

// 1 iff age classes differ or gender classes differ. A prediction without
// body evidence yields 0 (no-evidence annotation carried by the caller).
int mismatch_rule(const AttributePrediction& pred);

// Shared residual trunk with independent age and gender heads.
class AttributeNet {
public:
    explicit AttributeNet(const BodyFaceConfig& cfg, uint64_t seed);

    struct Output {
        AgeClass age;
        GenderClass gender;
        nn::Vec age_conf;     // 3 softmax probabilities
        nn::Vec gender_conf;  // 2 softmax probabilities
    };
    Output classify(const Image& crop) const;
    AgeClass classify_age(const Image& crop) const { return classify(crop).age; }
    GenderClass classify_gender(const Image& crop) const { return classify(crop).gender; }

    struct Acts;
    // Training path: age logits (3) and gender logits (2).
    void forward(const Image& crop, Acts& acts, nn::Vec& age_logits, nn::Vec& gender_logits) const;
    void backward(const nn::Vec& dage, const nn::Vec& dgender, const Acts& acts);

    nn::ParamSet params();
    const BodyFaceConfig& config() const { return cfg_; }

private:
    BodyFaceConfig cfg_;
    nn::Conv2d conv1_, conv2_, res_a_, res_b_, conv3_;
    nn::Linear age_head_, gender_head_;
};

struct AttributeNet::Acts {
    nn::Mat x0;
    nn::Mat c1_cols, c1_out;
    nn::Mat c2_cols, c2_out, c2_act;
    nn::Mat ra_cols, ra_out, ra_act;
    nn::Mat rb_cols, rb_out, sum, sum_act;
    nn::Mat c3_cols, c3_out, c3_act;
    nn::Vec pooled;
    int h0 = 0, w0 = 0, h1 = 0, w1 = 0, h2 = 0, w2 = 0, h3 = 0, w3 = 0;
};

}  // namespace hicom
