#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "hicom/crops.hpp"
#include "hicom/image.hpp"
#include "hicom/metrics.hpp"
#include "hicom/rng.hpp"

using namespace hicom;

namespace {

// Independent quadratic-time AUC oracle: pairwise win fraction with ties 0.5.
double auc_pairwise(const std::vector<double>& s, const std::vector<int>& t) {
    double wins = 0.0;
    long n_pos = 0, n_neg = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (!t[i]) continue;
        ++n_pos;
        for (size_t j = 0; j < s.size(); ++j) {
            if (t[j]) continue;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    n_neg = static_cast<long>(s.size()) - n_pos;
    return wins / (static_cast<double>(n_pos) * n_neg);
}

Image ramp_image(int h, int w) {
    Image img(h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(c, y, x) = (c + 1) * 0.1 + 0.3 * y / h + 0.4 * x / w;
    img.clamp01();
    return img;
}

}  // namespace

TEST_CASE("face metrics identity and hand-counted cases") {
    // all correct
    auto m = compute_face_metrics({0.9, 0.8, 0.7, 0.2}, {1, 1, 1, 0}, {1, 1, 1, 0});
    CHECK(m.fac == doctest::Approx(1.0));

    // perfect separation
    m = compute_face_metrics({0.9, 0.1}, {1, 0}, {1, 0});
    REQUIRE(m.fau.has_value());
    CHECK(*m.fau == doctest::Approx(1.0));

    // preds [1,0,0] vs truth [1,1,0] -> 2/3
    m = compute_face_metrics({0.9, 0.2, 0.1}, {1, 0, 0}, {1, 1, 0});
    CHECK(m.fac == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("single-class truth yields undefined AUC sentinel") {
    auto m = compute_face_metrics({0.9, 0.8}, {1, 1}, {1, 1});
    CHECK(!m.fau.has_value());
    CHECK(m.fac == doctest::Approx(1.0));
}

TEST_CASE("rank AUC equals pairwise oracle including ties") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(rng.next_below(40));
        std::vector<double> s(n);
        std::vector<int> t(n);
        bool both = false;
        // quantized scores force frequent ties
        for (int i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 8.0) / 8.0;
            t[i] = rng.bernoulli(0.4);
        }
        t[0] = 0;
        t[n - 1] = 1;
        both = true;
        auto auc = auc_rank(s, t);
        REQUIRE(both);
        REQUIRE(auc.has_value());
        CHECK(*auc == doctest::Approx(auc_pairwise(s, t)).epsilon(1e-12));
    }
}

TEST_CASE("AUC invariant under strictly monotone transforms") {
    Rng rng(123);
    std::vector<double> s(30);
    std::vector<int> t(30);
    for (int i = 0; i < 30; ++i) { s[i] = rng.uniform(); t[i] = rng.bernoulli(0.5); }
    t[0] = 0; t[1] = 1;
    auto base = auc_rank(s, t);
    std::vector<double> s2(30);
    for (int i = 0; i < 30; ++i) s2[i] = std::exp(3.0 * s[i]) + 1.0;
    auto transformed = auc_rank(s2, t);
    REQUIRE(base.has_value());
    CHECK(*base == doctest::Approx(*transformed).epsilon(1e-12));
}

TEST_CASE("frame-complete metrics: identity, hand case, brute-force oracle") {
    // 2 frames, all faces correct
    std::vector<FramePrediction> frames(2);
    frames[0] = {{0.9, 0.1}, {1, 0}, {1, 0}};
    frames[1] = {{0.2}, {0}, {0}};
    auto m = compute_frame_complete_metrics(frames);
    CHECK(m.fcac == doctest::Approx(1.0));

    // frame1 {correct, wrong}, frame2 {correct} -> FAC 2/3, FCAC 0.5
    frames[0] = {{0.9, 0.6}, {1, 1}, {1, 0}};
    frames[1] = {{0.1}, {0}, {0}};
    m = compute_frame_complete_metrics(frames);
    CHECK(m.fcac == doctest::Approx(0.5));

    // randomized instances vs independent per-frame re-check, FCAC exact
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        int n_frames = 1 + static_cast<int>(rng.next_below(10));
        std::vector<FramePrediction> fr(n_frames);
        for (auto& f : fr) {
            int n_faces = 1 + static_cast<int>(rng.next_below(6));
            f.scores.resize(n_faces);
            f.pred_labels.resize(n_faces);
            f.truth.resize(n_faces);
            for (int i = 0; i < n_faces; ++i) {
                f.scores[i] = rng.uniform();
                f.pred_labels[i] = rng.bernoulli(0.5);
                f.truth[i] = rng.bernoulli(0.4);
            }
        }
        auto got = compute_frame_complete_metrics(fr);

        int complete = 0;
        long total_faces = 0, correct_faces = 0;
        for (const auto& f : fr) {
            bool ok = true;
            for (size_t i = 0; i < f.truth.size(); ++i) {
                ok = ok && (f.pred_labels[i] == f.truth[i]);
                correct_faces += (f.pred_labels[i] == f.truth[i]);
                ++total_faces;
            }
            complete += ok;
        }
        CHECK(got.fcac == doctest::Approx(static_cast<double>(complete) / n_frames).epsilon(1e-15));
    }
}

TEST_CASE("FCAC <= FAC on acceptance-scale random instances") {
    // With variable face counts the inequality is not a theorem (errors
    // concentrated in one large frame can push FAC below FCAC), but it
    // holds on 1000-frame instances with independent per-face errors.
    Rng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<FramePrediction> fr(1000);
        long correct = 0, total = 0;
        for (auto& f : fr) {
            int n_faces = 1 + static_cast<int>(rng.next_below(6));
            for (int i = 0; i < n_faces; ++i) {
                f.scores.push_back(rng.uniform());
                f.pred_labels.push_back(rng.bernoulli(0.5));
                f.truth.push_back(rng.bernoulli(0.4));
                correct += (f.pred_labels.back() == f.truth.back());
                ++total;
            }
        }
        auto m = compute_frame_complete_metrics(fr);
        double fac = static_cast<double>(correct) / static_cast<double>(total);
        CHECK(m.fcac <= fac + 1e-12);
    }
}

TEST_CASE("metrics are permutation invariant") {
    Rng rng(31);
    std::vector<FramePrediction> fr(6);
    for (auto& f : fr) {
        int n = 2 + static_cast<int>(rng.next_below(4));
        for (int i = 0; i < n; ++i) {
            f.scores.push_back(rng.uniform());
            f.pred_labels.push_back(rng.bernoulli(0.5));
            f.truth.push_back(rng.bernoulli(0.5));
        }
    }
    fr[0].truth[0] = 1;
    fr[1].truth[0] = 0;
    auto base = compute_frame_complete_metrics(fr);

    // permute frames and faces within a frame
    std::vector<FramePrediction> perm = fr;
    std::reverse(perm.begin(), perm.end());
    for (auto& f : perm) {
        std::reverse(f.scores.begin(), f.scores.end());
        std::reverse(f.pred_labels.begin(), f.pred_labels.end());
        std::reverse(f.truth.begin(), f.truth.end());
    }
    auto permuted = compute_frame_complete_metrics(perm);
    CHECK(base.fcac == doctest::Approx(permuted.fcac).epsilon(1e-15));
    if (base.fcau)
        CHECK(*base.fcau == doctest::Approx(*permuted.fcau).epsilon(1e-12));
}

TEST_CASE("crops are deterministic and clamp at frame corners") {
    Image frame = ramp_image(60, 80);
    CropPolicy policy;
    policy.face_size = 32;
    policy.eye_size = 16;
    policy.body_size = 32;

    FaceBox box{10, 12, 20, 24};
    Image a = crop_face(frame, box, policy);
    Image b = crop_face(frame, box, policy);
    CHECK(a.data == b.data);

    // box at frame corner: clamped, output size unchanged
    FaceBox corner{-5, -8, 20, 24};
    Image c = crop_face(frame, corner, policy);
    CHECK(c.h == 32);
    CHECK(c.w == 32);

    // full-frame box: body crop equals frame resized
    FaceBox full{0, 0, 80, 60};
    Image body = crop_body(frame, full, policy);
    Image resized = resize_bilinear(frame, 32, 32);
    for (size_t i = 0; i < body.data.size(); ++i)
        CHECK(body.data[i] == doctest::Approx(resized.data[i]).epsilon(1e-12));
}

TEST_CASE("degenerate boxes are rejected") {
    Image frame = ramp_image(40, 40);
    CropPolicy policy;
    CHECK_THROWS(crop_face(frame, {5, 5, 2, 30}, policy));
    CHECK_THROWS(crop_eyes(frame, {5, 5, 30, 3}, policy));
    CHECK_THROWS(crop_body(frame, {39, 39, 10, 10}, policy));  // clamps to sliver
}

TEST_CASE("eye and body regions follow the configured geometry") {
    FaceBox face{100, 50, 40, 60};
    FaceBox eyes = eye_region(face);
    CHECK(eyes.y == doctest::Approx(50));
    CHECK(eyes.h == doctest::Approx(24));   // upper 40%
    CHECK(eyes.x == doctest::Approx(96));   // 10% lateral expansion
    CHECK(eyes.w == doctest::Approx(48));

    FaceBox body = body_region(face);
    CHECK(body.w == doctest::Approx(120));  // 3x width
    CHECK(body.h == doctest::Approx(300));  // 5x height downward
    CHECK(body.y == doctest::Approx(50));
    CHECK(body.cx() == doctest::Approx(face.cx()));
}

TEST_CASE("ppm round trip preserves bytes") {
    Image img = ramp_image(17, 23);
    write_ppm(img, "/tmp/hicom_test_img.ppm");
    Image back = read_ppm("/tmp/hicom_test_img.ppm");
    REQUIRE(back.h == 17);
    REQUIRE(back.w == 23);
    ImageU8 a = to_u8(img), b = to_u8(back);
    CHECK(a.data == b.data);
}
