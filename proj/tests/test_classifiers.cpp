#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hicom/body_face.hpp"
#include "hicom/gaze.hpp"
#include "hicom/rng.hpp"
#include "test_util.hpp"

using namespace hicom;
using nn::Mat;
using nn::Vec;

namespace {

Image noise_crop(int size, uint64_t seed) {
    Image img(size, size);
    Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("gaze classifier is deterministic and bounded") {
    GazeConfig cfg;
    cfg.eye_size = 16;
    GazeNet net(cfg, 4);
    Image crop = noise_crop(16, 8);
    double p1 = net.classify_gaze(crop);
    double p2 = net.classify_gaze(crop);
    CHECK(p1 == p2);
    CHECK(p1 >= 0.0);
    CHECK(p1 <= 1.0);
    CHECK_THROWS(net.classify_gaze(noise_crop(8, 1)));
}

TEST_CASE("gaze net CE gradient check") {
    GazeConfig cfg;
    cfg.eye_size = 12;
    cfg.c1 = 4;
    cfg.c2 = 6;
    cfg.c3 = 8;
    GazeNet net(cfg, 6);
    std::vector<Image> crops = {noise_crop(12, 21), noise_crop(12, 22)};
    std::vector<int> labels = {1, 0};

    nn::ParamSet p = net.params();
    auto loss = [&](bool with_grad) {
        Mat logits(2, 2);
        std::vector<GazeNet::Acts> acts(2);
        for (int i = 0; i < 2; ++i) logits.col(i) = net.forward(crops[i], acts[i]);
        Mat dlogits;
        double l = nn::softmax_ce(logits, labels, with_grad ? &dlogits : nullptr);
        if (with_grad)
            for (int i = 0; i < 2; ++i) net.backward(dlogits.col(i), acts[i]);
        return l;
    };
    Rng rng(888);
    CHECK(hicom::testutil::grad_check(p, loss, 20, 1e-4, rng) < 1e-3);
}

TEST_CASE("attribute net classifies deterministically with softmax confidences") {
    BodyFaceConfig cfg;
    cfg.input_size = 16;
    cfg.c1 = 4;
    cfg.c2 = 6;
    cfg.c3 = 8;
    AttributeNet net(cfg, 5);
    Image crop = noise_crop(16, 9);
    auto a = net.classify(crop);
    auto b = net.classify(crop);
    CHECK(a.age == b.age);
    CHECK(a.gender == b.gender);
    CHECK(a.age_conf.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.gender_conf.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(net.classify_age(crop) == a.age);
    CHECK(net.classify_gender(crop) == a.gender);
    CHECK_THROWS(net.classify(noise_crop(8, 1)));
}

TEST_CASE("attribute net joint CE gradient check") {
    BodyFaceConfig cfg;
    cfg.input_size = 16;
    cfg.c1 = 4;
    cfg.c2 = 6;
    cfg.c3 = 8;
    AttributeNet net(cfg, 15);
    std::vector<Image> crops = {noise_crop(16, 61), noise_crop(16, 62)};
    std::vector<int> age_labels = {2, 0};
    std::vector<int> gender_labels = {1, 0};

    nn::ParamSet p = net.params();
    auto loss = [&](bool with_grad) {
        Mat age_logits(3, 2), gender_logits(2, 2);
        std::vector<AttributeNet::Acts> acts(2);
        for (int i = 0; i < 2; ++i) {
            Vec al, gl;
            net.forward(crops[i], acts[i], al, gl);
            age_logits.col(i) = al;
            gender_logits.col(i) = gl;
        }
        Mat dage, dgender;
        double l = nn::softmax_ce(age_logits, age_labels, with_grad ? &dage : nullptr) +
                   nn::softmax_ce(gender_logits, gender_labels, with_grad ? &dgender : nullptr);
        if (with_grad)
            for (int i = 0; i < 2; ++i) net.backward(dage.col(i), dgender.col(i), acts[i]);
        return l;
    };
    Rng rng(999);
    CHECK(hicom::testutil::grad_check(p, loss, 20, 1e-4, rng) < 1e-3);
}
