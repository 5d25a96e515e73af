#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hicom/rng.hpp"
#include "hicom/scene_motion.hpp"
#include "test_util.hpp"

using namespace hicom;
using nn::Mat;
using nn::Vec;

namespace {

SceneMotionConfig tiny_config() {
    SceneMotionConfig cfg;
    cfg.input_h = 32;
    cfg.input_w = 48;
    cfg.temporal_window = 2;
    cfg.embed_dim = 16;
    cfg.roi_output = 3;
    cfg.c1 = 4;
    cfg.c2 = 6;
    cfg.c3 = 8;
    cfg.hidden = 12;
    return cfg;
}

Image noise_image(int h, int w, uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

FeatureMap constant_map(int c, int h, int w, int stride, double value) {
    FeatureMap m;
    m.data = Mat::Constant(c, static_cast<long>(h) * w, value);
    m.h = h;
    m.w = w;
    m.stride = stride;
    return m;
}

// Brute-force bilinear sampler used as the independent pooling oracle.
double bilinear_oracle(const FeatureMap& m, int c, double y, double x) {
    x = std::clamp(x, 0.0, static_cast<double>(m.w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(m.h - 1));
    int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, m.w - 1), y1 = std::min(y0 + 1, m.h - 1);
    double fx = x - x0, fy = y - y0;
    auto at = [&](int yy, int xx) { return m.data(c, static_cast<long>(yy) * m.w + xx); };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

}  // namespace

TEST_CASE("static clips give temporally constant feature maps") {
    SceneMotionConfig cfg = tiny_config();
    SceneMotionNet net(cfg, 7);

    Image frame(cfg.input_h, cfg.input_w);
    frame.fill(0.3, 0.5, 0.7);
    auto pyr_a = net.extract_multiscale_features(frame);
    auto pyr_b = net.extract_multiscale_features(frame);
    REQUIRE(pyr_a.size() == 3);
    for (size_t s = 0; s < pyr_a.size(); ++s)
        CHECK((pyr_a[s].data - pyr_b[s].data).cwiseAbs().maxCoeff() < 1e-5);

    // replicated single image: every frame's maps identical
    Image img = noise_image(cfg.input_h, cfg.input_w, 11);
    auto p0 = net.extract_multiscale_features(img);
    auto p1 = net.extract_multiscale_features(img);
    for (size_t s = 0; s < p0.size(); ++s)
        CHECK(p0[s].data == p1[s].data);
}

TEST_CASE("feature map strides and shape arithmetic") {
    SceneMotionConfig cfg = tiny_config();
    SceneMotionNet net(cfg, 7);
    auto pyr = net.extract_multiscale_features(noise_image(cfg.input_h, cfg.input_w, 3));
    CHECK(pyr[0].stride == 4);
    CHECK(pyr[1].stride == 8);
    CHECK(pyr[2].stride == 16);
    CHECK(pyr[0].h == cfg.input_h / 4);
    CHECK(pyr[0].w == cfg.input_w / 4);

    // doubling the input doubles the map extents
    SceneMotionConfig big = cfg;
    big.input_h *= 2;
    big.input_w *= 2;
    SceneMotionNet net2(big, 7);
    auto pyr2 = net2.extract_multiscale_features(noise_image(big.input_h, big.input_w, 3));
    for (int s = 0; s < 3; ++s) {
        CHECK(pyr2[s].h == 2 * pyr[s].h);
        CHECK(pyr2[s].w == 2 * pyr[s].w);
    }
}

TEST_CASE("roi sampling of a constant map is constant") {
    FeatureMap m = constant_map(5, 10, 12, 4, 0.37);
    Mat pooled = roi_align_sample(m, FaceBox{6, 5, 18, 14}, 3);
    CHECK(pooled.rows() == 5);
    CHECK(pooled.cols() == 9);
    for (long i = 0; i < pooled.size(); ++i)
        CHECK(pooled.data()[i] == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("roi sampling equals the brute-force bilinear oracle") {
    Rng rng(21);
    FeatureMap m;
    m.h = 9;
    m.w = 11;
    m.stride = 4;
    m.data.resize(3, m.h * m.w);
    for (long i = 0; i < m.data.size(); ++i) m.data.data()[i] = rng.uniform();

    const int g = 4;
    FaceBox box{8, 4, 24, 20};  // integer-aligned in map units (2,1,6,5)
    Mat pooled = roi_align_sample(m, box, g);
    for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
            double sx = 2.0 + (ix + 0.5) * 6.0 / g - 0.5;
            double sy = 1.0 + (iy + 0.5) * 5.0 / g - 0.5;
            for (int c = 0; c < 3; ++c)
                CHECK(pooled(c, iy * g + ix) ==
                      doctest::Approx(bilinear_oracle(m, c, sy, sx)).epsilon(1e-12));
        }
}

TEST_CASE("roi sampling is equivariant to one-stride shifts of a translated map") {
    Rng rng(22);
    FeatureMap a;
    a.h = 8;
    a.w = 10;
    a.stride = 4;
    a.data.resize(2, a.h * a.w);
    for (long i = 0; i < a.data.size(); ++i) a.data.data()[i] = rng.uniform();

    // b = a translated one cell to the right
    FeatureMap b = a;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            int sx = std::max(0, x - 1);
            b.data.col(static_cast<long>(y) * a.w + x) = a.data.col(static_cast<long>(y) * a.w + sx);
        }

    FaceBox box{4, 4, 16, 12};
    FaceBox shifted{4 + 4, 4, 16, 12};  // +1 stride in x
    Mat pa = roi_align_sample(a, box, 3);
    Mat pb = roi_align_sample(b, shifted, 3);
    CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-area projected boxes are rejected") {
    FeatureMap m = constant_map(2, 8, 8, 16, 0.0);
    CHECK_THROWS(roi_align_sample(m, FaceBox{4, 4, 0, 10}, 3));
}

TEST_CASE("loss_sp closed forms") {
    // uniform logits, lambda 0.5/0.5 -> ln 2
    Mat face_logits = Mat::Zero(2, 3);
    Vec frame_logits = Vec::Zero(2);
    double l = loss_sp(face_logits, frame_logits, {0, 1, 1}, 1, 0.5, 0.5);
    CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // certain correct predictions -> loss ~ 0
    Mat sure(2, 2);
    sure << 30.0, -30.0, -30.0, 30.0;  // col0 -> class 0, col1 -> class 1
    Vec fsure(2);
    fsure << -30.0, 30.0;
    l = loss_sp(sure, fsure, {0, 1}, 1, 0.5, 0.5);
    CHECK(l < 1e-9);

    // lambda_fr = 0 reduces to lambda_fa * CE(faces)
    l = loss_sp(face_logits, frame_logits, {0, 1, 1}, 1, 0.7, 0.0);
    CHECK(l == doctest::Approx(0.7 * std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS(loss_sp(Mat(2, 0), frame_logits, {}, 0, 0.5, 0.5));
}

TEST_CASE("per-face logits are equivariant, frame logits invariant") {
    SceneMotionConfig cfg = tiny_config();
    SceneMotionNet net(cfg, 9);
    const int T = cfg.temporal_window;

    std::vector<Image> frames;
    for (int t = 0; t < T; ++t) frames.push_back(noise_image(cfg.input_h, cfg.input_w, 50 + t));
    std::vector<std::vector<FaceBox>> boxes(T);
    for (int t = 0; t < T; ++t)
        boxes[t] = {FaceBox{4.0 + t, 6, 10, 12}, FaceBox{26, 10.0 + t, 12, 14}};

    SceneMotionNet::ClipActs acts;
    Mat fl;
    Vec frl;
    net.forward(frames, boxes, acts, fl, frl);

    // duplicate face track -> identical logits for the duplicates
    auto boxes_dup = boxes;
    for (int t = 0; t < T; ++t) boxes_dup[t].push_back(boxes[t][0]);
    SceneMotionNet::ClipActs acts2;
    Mat fl2;
    Vec frl2;
    net.forward(frames, boxes_dup, acts2, fl2, frl2);
    CHECK((fl2.col(0) - fl2.col(2)).cwiseAbs().maxCoeff() < 1e-12);

    // permuted face order -> permuted per-face logits, frame logits unchanged
    auto boxes_perm = boxes;
    for (int t = 0; t < T; ++t) std::swap(boxes_perm[t][0], boxes_perm[t][1]);
    SceneMotionNet::ClipActs acts3;
    Mat fl3;
    Vec frl3;
    net.forward(frames, boxes_perm, acts3, fl3, frl3);
    CHECK((fl.col(0) - fl3.col(1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fl.col(1) - fl3.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((frl - frl3).cwiseAbs().maxCoeff() < 1e-12);

    // fixed seed reproducibility
    SceneMotionNet net_b(cfg, 9);
    SceneMotionNet::ClipActs acts4;
    Mat fl4;
    Vec frl4;
    net_b.forward(frames, boxes, acts4, fl4, frl4);
    CHECK((fl - fl4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full M1 gradient check on the frozen tiny config") {
    SceneMotionConfig cfg = tiny_config();
    SceneMotionNet net(cfg, 13);
    const int T = cfg.temporal_window;

    std::vector<Image> frames;
    for (int t = 0; t < T; ++t) frames.push_back(noise_image(cfg.input_h, cfg.input_w, 80 + t));
    std::vector<std::vector<FaceBox>> boxes(T);
    for (int t = 0; t < T; ++t)
        boxes[t] = {FaceBox{5.0 + 2 * t, 6, 10, 12}, FaceBox{27, 9.0 + t, 11, 13}};
    std::vector<int> y_fa = {0, 1};
    const int y_fr = 1;

    nn::ParamSet p = net.params();
    auto loss = [&](bool with_grad) {
        SceneMotionNet::ClipActs acts;
        Mat fl;
        Vec frl;
        net.forward(frames, boxes, acts, fl, frl);
        if (!with_grad) return loss_sp(fl, frl, y_fa, y_fr, 0.5, 0.5);
        Mat dfl;
        Vec dfrl;
        double l = loss_sp(fl, frl, y_fa, y_fr, 0.5, 0.5, &dfl, &dfrl);
        net.backward(dfl, dfrl, acts);
        return l;
    };

    Rng rng(555);
    double worst = hicom::testutil::grad_check(p, loss, 25, 1e-4, rng);
    CHECK(worst < 1e-3);
}

TEST_CASE("pad_clip_window repeats the trailing edge") {
    std::vector<Image> frames = {noise_image(8, 8, 1), noise_image(8, 8, 2)};
    std::vector<std::vector<FaceBox>> boxes = {{FaceBox{1, 1, 3, 3}}, {FaceBox{2, 1, 3, 3}}};
    pad_clip_window(frames, boxes, 5);
    REQUIRE(frames.size() == 5);
    CHECK(frames[4].data == frames[1].data);
    CHECK(boxes[4][0].x == boxes[1][0].x);
}
