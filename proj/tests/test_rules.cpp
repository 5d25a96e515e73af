#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "hicom/body_face.hpp"
#include "hicom/fusion.hpp"
#include "hicom/gaze.hpp"

using namespace hicom;
using Flag = ModuleVerdict::Flag;

namespace {

// Independent re-statement of the gaze consensus rule for the oracle.
std::vector<Flag> gaze_oracle(const std::vector<int>& locked) {
    int n_l = 0, n_o = 0;
    for (int f : locked) (f ? n_l : n_o)++;
    int n_t = n_l + n_o;
    std::vector<Flag> out(locked.size());
    if (n_o > n_l) {
        std::fill(out.begin(), out.end(), Flag::na);
        return out;
    }
    for (size_t i = 0; i < locked.size(); ++i) {
        if (locked[i]) out[i] = Flag::real;
        else if (n_l - n_o > 1 || n_t == 2) out[i] = Flag::fake;
        else out[i] = Flag::real;
    }
    return out;
}

FaceVerdicts make_verdicts(int f1, int f2, Flag f3, int f4) {
    FaceVerdicts v;
    v.m1 = ModuleVerdict::scored(ModuleId::M1, f1 ? 0.9 : 0.1, 0.5);
    v.m2 = ModuleVerdict::scored(ModuleId::M2, f2 ? 0.8 : 0.2, 0.5);
    v.m3 = ModuleVerdict{ModuleId::M3, std::nullopt, f3};
    v.m4 = ModuleVerdict::flagged(ModuleId::M4, f4 != 0);
    return v;
}

}  // namespace

TEST_CASE("gaze rule spec cases") {
    // 5 faces, 4 locked, 1 off -> off face flagged
    auto v = gaze_rule({1, 1, 0, 1, 1});
    CHECK(v[2] == Flag::fake);
    CHECK(v[0] == Flag::real);

    // 2 faces, 1 locked, 1 off -> off face flagged via n_T == 2
    v = gaze_rule({1, 0});
    CHECK(v[1] == Flag::fake);
    CHECK(v[0] == Flag::real);

    // 3 faces, 1 locked, 2 off -> majority off, all NA
    v = gaze_rule({1, 0, 0});
    CHECK(v == std::vector<Flag>{Flag::na, Flag::na, Flag::na});
}

TEST_CASE("gaze rule matches exhaustive enumeration up to 6 faces") {
    for (int n = 1; n <= 6; ++n) {
        for (int bits = 0; bits < (1 << n); ++bits) {
            std::vector<int> locked(n);
            for (int i = 0; i < n; ++i) locked[i] = (bits >> i) & 1;
            auto got = gaze_rule(locked);
            auto want = gaze_oracle(locked);
            REQUIRE_MESSAGE(got == want, "n=" << n << " bits=" << bits);
        }
    }
}

TEST_CASE("gaze rule invariants") {
    // no locked face is ever flagged; all locked -> all real
    auto v = gaze_rule({1, 1, 1, 1});
    for (auto f : v) CHECK(f == Flag::real);

    // tie with n_T != 2: off faces get 0, not NA
    v = gaze_rule({1, 1, 0, 0});
    CHECK(v == std::vector<Flag>{Flag::real, Flag::real, Flag::real, Flag::real});

    // permutation equivariance
    auto a = gaze_rule({1, 0, 1, 1, 0});
    auto b = gaze_rule({0, 1, 1, 0, 1});
    CHECK(a[1] == b[0]);
    CHECK(a[0] == b[1]);
    CHECK(a[4] == b[3]);
}

TEST_CASE("mismatch rule: full 36-case truth table") {
    for (int af = 0; af < 3; ++af)
        for (int gf = 0; gf < 2; ++gf)
            for (int ab = 0; ab < 3; ++ab)
                for (int gb = 0; gb < 2; ++gb) {
                    AttributePrediction pred;
                    pred.age_face = static_cast<AgeClass>(af);
                    pred.gender_face = static_cast<GenderClass>(gf);
                    pred.age_body = static_cast<AgeClass>(ab);
                    pred.gender_body = static_cast<GenderClass>(gb);
                    int want = (af != ab || gf != gb) ? 1 : 0;
                    CHECK(mismatch_rule(pred) == want);

                    // symmetry under swapping face and body predictions
                    AttributePrediction swapped = pred;
                    std::swap(swapped.age_face, swapped.age_body);
                    std::swap(swapped.gender_face, swapped.gender_body);
                    CHECK(mismatch_rule(swapped) == mismatch_rule(pred));
                }
}

TEST_CASE("mismatch rule spec cases and missing body") {
    AttributePrediction p;
    p.age_face = AgeClass::child; p.gender_face = GenderClass::female;
    p.age_body = AgeClass::child; p.gender_body = GenderClass::female;
    CHECK(mismatch_rule(p) == 0);

    p.gender_face = GenderClass::male; p.gender_body = GenderClass::male;
    p.age_body = AgeClass::senior;
    CHECK(mismatch_rule(p) == 1);

    p.age_face = AgeClass::middle; p.age_body = AgeClass::middle;
    p.gender_face = GenderClass::female; p.gender_body = GenderClass::male;
    CHECK(mismatch_rule(p) == 1);

    p.body_available = false;
    CHECK(mismatch_rule(p) == 0);
}

TEST_CASE("fusion spec cases") {
    FusionConfig cfg;

    // flags (0,0,NA,0), scores (0.2,0.3) -> real, empty attribution
    FaceVerdicts v;
    v.m1 = ModuleVerdict::scored(ModuleId::M1, 0.2, 0.5);
    v.m2 = ModuleVerdict::scored(ModuleId::M2, 0.3, 0.5);
    v.m3 = ModuleVerdict::not_applicable(ModuleId::M3);
    v.m4 = ModuleVerdict::flagged(ModuleId::M4, false);
    auto r = fuse(v, cfg);
    CHECK(r.label == 0);
    CHECK(r.attribution.empty());

    // flags (0,0,NA,1) -> fake via M4
    v.m4 = ModuleVerdict::flagged(ModuleId::M4, true);
    r = fuse(v, cfg);
    CHECK(r.label == 1);
    CHECK(r.attribution == std::set<ModuleId>{ModuleId::M4});

    // flags (1,1,0,0) -> fake, attribution {M1, M2}
    v = make_verdicts(1, 1, Flag::real, 0);
    r = fuse(v, cfg);
    CHECK(r.label == 1);
    CHECK(r.attribution == std::set<ModuleId>{ModuleId::M1, ModuleId::M2});
}

TEST_CASE("fusion errors") {
    FusionConfig cfg;
    FaceVerdicts v = make_verdicts(0, 0, Flag::real, 0);
    v.m1.score.reset();
    CHECK_THROWS(fuse(v, cfg));
    v = make_verdicts(0, 0, Flag::real, 0);
    CHECK_THROWS(ablation_stack(v, {}, cfg));
    CHECK_THROWS(ablation_stack(v, {ModuleId::M2}, cfg));
}

TEST_CASE("ablation monotonicity and attribution over all verdict patterns") {
    FusionConfig cfg;
    auto subsets = ablation_subsets();
    REQUIRE(subsets.size() == 4);

    for (int m1 = 0; m1 <= 1; ++m1)
        for (int m2 = 0; m2 <= 1; ++m2)
            for (int m3s = 0; m3s < 3; ++m3s)  // real / fake / NA
                for (int m4 = 0; m4 <= 1; ++m4) {
                    Flag f3 = m3s == 0 ? Flag::real : (m3s == 1 ? Flag::fake : Flag::na);
                    FaceVerdicts v = make_verdicts(m1, m2, f3, m4);

                    int prev_label = 0;
                    std::set<ModuleId> prev_attr;
                    for (const auto& subset : subsets) {
                        auto r = ablation_stack(v, subset, cfg);

                        // never flips fake -> real as modules are added
                        CHECK(r.label >= prev_label);
                        // attribution grows monotonically and is exact
                        for (ModuleId m : prev_attr) CHECK(r.attribution.count(m) == 1);
                        std::set<ModuleId> want;
                        if (m1 && subset.count(ModuleId::M1)) want.insert(ModuleId::M1);
                        if (m2 && subset.count(ModuleId::M2)) want.insert(ModuleId::M2);
                        if (f3 == Flag::fake && subset.count(ModuleId::M3)) want.insert(ModuleId::M3);
                        if (m4 && subset.count(ModuleId::M4)) want.insert(ModuleId::M4);
                        CHECK(r.attribution == want);
                        prev_label = r.label;
                        prev_attr = r.attribution;
                    }

                    // full subset equals fuse
                    auto full = fuse(v, cfg);
                    auto last = ablation_stack(v, subsets.back(), cfg);
                    CHECK(full.label == last.label);
                    CHECK(full.attribution == last.attribution);
                    CHECK(full.score == doctest::Approx(last.score));

                    // NA from M3 never changes the result vs M3 absent
                    if (f3 == Flag::na) {
                        auto without = ablation_stack(v, {ModuleId::M1, ModuleId::M2, ModuleId::M4}, cfg);
                        CHECK(full.label == without.label);
                        CHECK(full.attribution == without.attribution);
                    }
                }
}

TEST_CASE("weighted mode normalizes over available modules") {
    FusionConfig cfg;
    cfg.mode = FusionMode::weighted_score;

    // all module scores equal s -> fused score = s
    FaceVerdicts v;
    v.m1 = ModuleVerdict::scored(ModuleId::M1, 0.7, 0.5);
    v.m2 = ModuleVerdict::scored(ModuleId::M2, 0.7, 0.5);
    v.m3 = ModuleVerdict{ModuleId::M3, 0.7, Flag::fake};
    v.m4 = ModuleVerdict{ModuleId::M4, 0.7, Flag::fake};
    auto r = fuse(v, cfg);
    CHECK(r.score == doctest::Approx(0.7).epsilon(1e-12));

    // NA M3 renormalizes the remaining weights
    v.m3 = ModuleVerdict::not_applicable(ModuleId::M3);
    v.m4 = ModuleVerdict::flagged(ModuleId::M4, false);  // evidence 0
    r = fuse(v, cfg);
    double w1 = 0.342, w2 = 0.315, w4 = 0.075;
    double want = (w1 * 0.7 + w2 * 0.7 + w4 * 0.0) / (w1 + w2 + w4);
    CHECK(r.score == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("block_face_in_body contracts") {
    // constant image stays constant inside the box
    Image body(40, 40);
    body.fill(0.4, 0.5, 0.6);
    FaceBox face{10, 10, 16, 16};
    Image out = block_face_in_body(body, face);
    for (size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(body.data[i]).epsilon(1e-12));

    // pixels outside the box bit-identical on a patterned image
    Image patt(40, 40);
    Rng rng(5);
    for (auto& v : patt.data) v = rng.uniform();
    out = block_face_in_body(patt, face);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x) {
                bool inside = x >= 10 && x < 26 && y >= 10 && y < 26;
                if (!inside) CHECK(out.at(c, y, x) == patt.at(c, y, x));
            }

    // box interior differs from the original (it actually blurred)
    double diff = 0.0;
    for (int y = 12; y < 24; ++y)
        for (int x = 12; x < 24; ++x) diff += std::abs(out.at(0, y, x) - patt.at(0, y, x));
    CHECK(diff > 0.1);

    // oversized face box -> error
    CHECK_THROWS(block_face_in_body(patt, FaceBox{0, 0, 39, 39}));
}

TEST_CASE("large-sigma blur drives the box toward its local mean") {
    // Checkerboard with mean 0.5; the box sits far enough from the image
    // border that the truncated kernel never samples replicated pixels.
    Image body(120, 120);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 120; ++y)
            for (int x = 0; x < 120; ++x) body.at(c, y, x) = ((x + y) % 2) ? 1.0 : 0.0;
    FaceBox face{45, 45, 30, 30};  // sigma = 7.5, radius 23
    Image out = block_face_in_body(body, face);
    for (int y = 45; y < 75; ++y)
        for (int x = 45; x < 75; ++x)
            CHECK(std::abs(out.at(1, y, x) - 0.5) < 2.0 / 255.0);
}
