#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hicom/image.hpp"
#include "hicom/manifest.hpp"
#include "hicom/types.hpp"

namespace hicom {

enum class AnomalyKind {
    motion_jitter = 0,
    appearance_mismatch = 1,
    gaze_outlier = 2,
    body_face_mismatch = 3,
};

const char* anomaly_name(AnomalyKind k);

struct FaceSpec {
    int face_id = 0;
    bool fake = false;
    std::set<AnomalyKind> anomalies;

    // rendered cues; body attributes differ from face attributes exactly
    // when body_face_mismatch is injected
    AgeClass age_face = AgeClass::middle;
    GenderClass gender_face = GenderClass::male;
    AgeClass age_body = AgeClass::middle;
    GenderClass gender_body = GenderClass::male;
    bool gaze_locked = true;
    double gaze_dir = 0.0;  // radians, used when off-camera

    // appearance relative to the scene
    double hue = 0.0;            // hue rotation against the scene tint
    double illum = 1.0;          // illumination gain
    double resolution_factor = 1.0;  // > 1 pixelates the face region

    // geometry and motion (canvas pixels / frames)
    double cx0 = 0.0, cy0 = 0.0;
    double head_rx = 10.0, head_ry = 14.0;
    double vx = 0.0, vy = 0.0;
    double osc_amp = 0.0, osc_freq = 0.0, osc_phase = 0.0;
    double jitter_amp = 0.0;  // > 0 iff motion_jitter
    uint64_t jitter_seed = 0;
};

// Complete, seed-deterministic description of one synthetic clip.
struct SceneSpec {
    uint64_t seed = 0;
    int canvas_h = 180, canvas_w = 320;
    int t_frames = 8;
    double fps = 25.0;
    double scene_hue = 0.0;   // global tint rotation
    double scene_gain = 1.0;  // global illumination
    double pan_vx = 0.0, pan_vy = 0.0;  // camera drift
    std::vector<FaceSpec> faces;

    std::string to_json() const;
    static SceneSpec from_json(const std::string& text);
};

// Distribution knobs for scene sampling.
struct GeneratorOptions {
    int canvas_h = 180, canvas_w = 320;
    int t_frames = 8;
    double fps = 25.0;
    int min_faces = 2, max_faces = 5;
    double p_all_real = 0.25;       // clips with no fake face
    double p_two_fakes = 0.3;       // fake clips carrying two fake faces
    double p_second_anomaly = 0.65; // fakes carrying a second anomaly kind
    // human-cue prevalence weights over (motion, appearance, gaze, body)
    std::array<double, 4> prevalence = {0.342, 0.315, 0.250, 0.075};
    double max_overlap_iou = 0.3;
    // anomaly severities
    double jitter_min = 3.5, jitter_max = 7.0;
    double hue_shift_min = 1.1, hue_shift_max = 1.9;        // radians
    double illum_shift = 0.3;
    double resolution_blocky = 3.0;
    double gaze_offset = 0.75;  // pupil offset as a fraction of eye radius
};

// Samples a clip description; `schedule` pins the stratified scenario
// (primary anomaly kind or all-real, face count). Pure function of seed.
struct ScenarioSchedule {
    bool all_real = false;
    AnomalyKind primary = AnomalyKind::motion_jitter;
    int n_faces = 3;
};

SceneSpec make_scene_spec(uint64_t seed, const GeneratorOptions& opts,
                          const ScenarioSchedule& schedule);

// Renders the clip described by `spec`. Deterministic; the returned
// ClipSample carries ground-truth labels and attributes per face.
ClipSample generate_clip(const SceneSpec& spec);

enum class PerturbationKind {
    color_manipulation = 0,
    edge_manipulation = 1,
    blockwise_distortion = 2,
    image_corruption = 3,
    convolution_mask = 4,
    external_effects = 5,
};

const char* perturbation_name(PerturbationKind k);
constexpr int kNumPerturbationKinds = 6;

// Whole-frame deterministic transform; severity 0 is the identity and
// labels/boxes are never touched (the image is the only input).
Image apply_perturbation(const Image& frame, PerturbationKind kind, int severity, uint64_t seed);

// Dataset builder: disjoint per-split seed ranges, stratified over anomaly
// kinds and face counts; writes PPM frames, JSONL manifests and per-clip
// SceneSpec sidecars plus a stratification audit.
struct DatasetSpec {
    std::string out_dir;
    int n_clips = 1000;
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
    uint64_t master_seed = 1234;
    GeneratorOptions gen;
};

struct DatasetAudit {
    std::array<int, 3> split_sizes = {0, 0, 0};
    // per split: counts per anomaly kind (+ index 4 = all-real clips)
    std::array<std::array<int, 5>, 3> scenario_counts{};
    std::string to_json() const;
};

DatasetAudit build_dataset(const DatasetSpec& spec);

inline const std::array<std::string, 3> kSplitNames = {"train", "val", "test"};

}  // namespace hicom
