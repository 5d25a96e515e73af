#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include "hicom/gaze.hpp"
#include "hicom/body_face.hpp"
#include "hicom/manifest.hpp"
#include "hicom/metrics.hpp"
#include "hicom/synth.hpp"

using namespace hicom;
namespace fs = std::filesystem;

namespace {

GeneratorOptions small_opts() {
    GeneratorOptions opts;
    opts.canvas_h = 120;
    opts.canvas_w = 220;
    opts.t_frames = 4;
    return opts;
}

std::map<int, std::vector<double>> pixel_histogram(const Image& img, int x0, int y0, int x1,
                                                   int y1) {
    std::map<int, std::vector<double>> h;  // unused key, simple container
    std::vector<double> vals;
    for (int c = 0; c < 3; ++c)
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) vals.push_back(img.at(c, y, x));
    std::sort(vals.begin(), vals.end());
    h[0] = vals;
    return h;
}

}  // namespace

TEST_CASE("same spec renders bit-identical clips") {
    GeneratorOptions opts = small_opts();
    ScenarioSchedule sched;
    sched.primary = AnomalyKind::motion_jitter;
    sched.n_faces = 3;
    SceneSpec spec = make_scene_spec(77, opts, sched);
    ClipSample a = generate_clip(spec);
    ClipSample b = generate_clip(spec);
    REQUIRE(a.frames.size() == b.frames.size());
    for (size_t t = 0; t < a.frames.size(); ++t) {
        CHECK(a.frames[t].image.data == b.frames[t].image.data);
        REQUIRE(a.frames[t].faces.size() == b.frames[t].faces.size());
        for (size_t f = 0; f < a.frames[t].faces.size(); ++f) {
            CHECK(a.frames[t].faces[f].box.x == b.frames[t].faces[f].box.x);
            CHECK(a.frames[t].faces[f].label == b.frames[t].faces[f].label);
        }
    }
}

TEST_CASE("scene spec JSON sidecar round-trips") {
    GeneratorOptions opts = small_opts();
    ScenarioSchedule sched;
    sched.primary = AnomalyKind::body_face_mismatch;
    sched.n_faces = 4;
    SceneSpec spec = make_scene_spec(123, opts, sched);
    SceneSpec back = SceneSpec::from_json(spec.to_json());
    CHECK(back.seed == spec.seed);
    REQUIRE(back.faces.size() == spec.faces.size());
    for (size_t i = 0; i < spec.faces.size(); ++i) {
        CHECK(back.faces[i].fake == spec.faces[i].fake);
        CHECK(back.faces[i].anomalies == spec.faces[i].anomalies);
        CHECK(back.faces[i].cx0 == spec.faces[i].cx0);
        CHECK(back.faces[i].jitter_seed == spec.faces[i].jitter_seed);
    }
    // renders identically from the round-tripped spec
    ClipSample a = generate_clip(spec);
    ClipSample b = generate_clip(back);
    CHECK(a.frames[0].image.data == b.frames[0].image.data);
}

TEST_CASE("generator truth is self-consistent with the gaze and mismatch rules") {
    GeneratorOptions opts = small_opts();
    for (uint64_t seed = 1; seed <= 60; ++seed) {
        ScenarioSchedule sched;
        sched.all_real = (seed % 5 == 0);
        sched.primary = static_cast<AnomalyKind>(seed % 4);
        sched.n_faces = 2 + static_cast<int>(seed % 4);
        SceneSpec spec = make_scene_spec(seed * 31, opts, sched);

        // every fake face carries >= 1 anomaly, real faces none
        for (const auto& f : spec.faces) {
            if (f.fake) CHECK(!f.anomalies.empty());
            else CHECK(f.anomalies.empty());
        }

        // Eq.-3-style rule applied to ground-truth gaze flags marks exactly
        // the gaze_outlier faces
        std::vector<int> locked;
        for (const auto& f : spec.faces) locked.push_back(f.gaze_locked ? 1 : 0);
        auto flags = gaze_rule(locked);
        for (size_t i = 0; i < spec.faces.size(); ++i) {
            bool has_gaze = spec.faces[i].anomalies.count(AnomalyKind::gaze_outlier) > 0;
            CHECK((flags[i] == ModuleVerdict::Flag::fake) == has_gaze);
        }

        // Eq.-4-style rule on ground-truth attributes marks exactly the
        // body_face_mismatch faces
        for (const auto& f : spec.faces) {
            AttributePrediction pred;
            pred.age_face = f.age_face;
            pred.gender_face = f.gender_face;
            pred.age_body = f.age_body;
            pred.gender_body = f.gender_body;
            bool has_mismatch = f.anomalies.count(AnomalyKind::body_face_mismatch) > 0;
            CHECK(mismatch_rule(pred) == (has_mismatch ? 1 : 0));
        }

        // boxes never overlap beyond the cap
        ClipSample clip = generate_clip(spec);
        for (const auto& frame : clip.frames)
            for (size_t i = 0; i < frame.faces.size(); ++i)
                for (size_t j = i + 1; j < frame.faces.size(); ++j)
                    CHECK(iou(frame.faces[i].box, frame.faces[j].box) <= opts.max_overlap_iou + 1e-9);
    }
}

TEST_CASE("perturbations: identity at severity 0, determinism, label safety") {
    GeneratorOptions opts = small_opts();
    ScenarioSchedule sched;
    sched.n_faces = 2;
    SceneSpec spec = make_scene_spec(5, opts, sched);
    Image frame = generate_clip(spec).frames[0].image;

    for (int k = 0; k < kNumPerturbationKinds; ++k) {
        auto kind = static_cast<PerturbationKind>(k);
        Image id0 = apply_perturbation(frame, kind, 0, 9);
        CHECK(id0.data == frame.data);

        Image a = apply_perturbation(frame, kind, 3, 42);
        Image b = apply_perturbation(frame, kind, 3, 42);
        CHECK(a.data == b.data);
        CHECK(a.h == frame.h);
        CHECK(a.w == frame.w);

        // mid severity must actually change the image
        CHECK(a.data != frame.data);
    }
    CHECK_THROWS(apply_perturbation(frame, PerturbationKind::color_manipulation, 6, 1));
}

TEST_CASE("blockwise distortion preserves the pixel multiset of the shuffled area") {
    GeneratorOptions opts = small_opts();
    ScenarioSchedule sched;
    sched.n_faces = 2;
    SceneSpec spec = make_scene_spec(8, opts, sched);
    Image frame = generate_clip(spec).frames[0].image;
    Image out = apply_perturbation(frame, PerturbationKind::blockwise_distortion, 3, 17);

    // the transform touches a rectangle; globally the multiset is unchanged
    auto a = pixel_histogram(frame, 0, 0, frame.w, frame.h);
    auto b = pixel_histogram(out, 0, 0, out.w, out.h);
    CHECK(a[0] == b[0]);
}

TEST_CASE("build_dataset splits, stratification and determinism") {
    fs::path dir = fs::temp_directory_path() / "hicom_synth_test";
    fs::remove_all(dir);

    DatasetSpec spec;
    spec.out_dir = (dir / "a").string();
    spec.n_clips = 60;
    spec.split_ratios = {0.7, 0.15, 0.15};
    spec.master_seed = 99;
    spec.gen = small_opts();

    DatasetAudit audit = build_dataset(spec);
    CHECK(audit.split_sizes[0] == 42);
    CHECK(audit.split_sizes[1] == 9);
    CHECK(audit.split_sizes[2] == 9);

    // every anomaly kind appears in every split
    for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 4; ++k)
            CHECK(audit.scenario_counts[s][k] > 0);

    // manifests parse and point at existing images with valid labels
    Manifest m = read_manifest((fs::path(spec.out_dir) / "test.jsonl").string());
    CHECK(m.clips.size() == 9);
    for (const auto& clip : m.clips) {
        CHECK(clip.frames.size() == 4);
        for (const auto& fr : clip.frames) {
            CHECK(fs::exists(fs::path(spec.out_dir) / fr.image_path));
            CHECK(!fr.faces.empty());
            for (const auto& f : fr.faces) {
                CHECK(f.gaze_locked.has_value());
                CHECK(f.age.has_value());
                CHECK(f.gender.has_value());
            }
        }
    }
    // sidecar truth exists per clip
    CHECK(fs::exists(fs::path(spec.out_dir) / "test" / m.clips[0].clip_id / "scene_spec.json"));

    // same master seed regenerates identical manifests + images
    DatasetSpec spec_b = spec;
    spec_b.out_dir = (dir / "b").string();
    build_dataset(spec_b);
    for (const auto& name : kSplitNames) {
        std::ifstream fa(fs::path(spec.out_dir) / (name + ".jsonl"));
        std::ifstream fb(fs::path(spec_b.out_dir) / (name + ".jsonl"));
        std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }
    Image ia = read_ppm((fs::path(spec.out_dir) / "train" / "train_0000" / "frame_000.ppm").string());
    Image ib = read_ppm((fs::path(spec_b.out_dir) / "train" / "train_0000" / "frame_000.ppm").string());
    CHECK(ia.data == ib.data);

    // rerunning into the same directory collides
    CHECK_THROWS(build_dataset(spec));

    fs::remove_all(dir);
}

TEST_CASE("manifest jsonl round trip and clip loading") {
    fs::path dir = fs::temp_directory_path() / "hicom_manifest_test";
    fs::remove_all(dir);

    DatasetSpec spec;
    spec.out_dir = dir.string();
    spec.n_clips = 8;
    spec.master_seed = 3;
    spec.gen = small_opts();
    build_dataset(spec);

    Manifest m = read_manifest((dir / "train.jsonl").string());
    ClipSample clip = load_clip(m, m.clips[0]);
    CHECK(clip.frames.size() == 4);
    CHECK(clip.frames[0].image.h == spec.gen.canvas_h);
    CHECK(!clip.frames[0].faces.empty());

    // round trip through serialization
    std::string line = clip_to_jsonl(m.clips[0]);
    ClipRecord back = clip_from_jsonl(line);
    CHECK(back.clip_id == m.clips[0].clip_id);
    CHECK(back.frames.size() == m.clips[0].frames.size());
    CHECK(back.frames[0].faces[0].box.w == m.clips[0].frames[0].faces[0].box.w);

    fs::remove_all(dir);
}
