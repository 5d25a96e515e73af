#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hicom/body_face.hpp"
#include "hicom/config.hpp"
#include "hicom/gaze.hpp"
#include "hicom/inter_face.hpp"
#include "hicom/manifest.hpp"
#include "hicom/metrics.hpp"
#include "hicom/scene_motion.hpp"
#include "hicom/synth.hpp"
#include "hicom/types.hpp"

namespace hicom {

struct Models {
    std::unique_ptr<SceneMotionNet> m1;
    std::unique_ptr<InterFaceNet> m2;
    std::unique_ptr<GazeNet> gaze;
    std::unique_ptr<AttributeNet> attr;
};

// Loads checkpoints for the requested modules; a missing file throws.
Models load_models(const RunConfig& cfg, const std::string& ckpt_dir,
                   const std::set<ModuleId>& needed);

// Verdicts of all four modules for every face of every frame of one clip.
std::vector<std::vector<FaceVerdicts>> clip_verdicts(const Models& models, const RunConfig& cfg,
                                                     const ClipSample& clip,
                                                     const std::set<ModuleId>& subset);

// One face-level detection record, written to detections.jsonl for the
// explanation pipeline.
struct FaceDetection {
    std::string clip_id;
    int frame_id = 0;
    int face_id = 0;
    int truth = 0;
    int final_label = 0;
    double fused_score = 0.0;
    std::set<ModuleId> attribution;
    FaceVerdicts verdicts;
};

struct PerturbRow {
    std::string kind;
    int severity = 3;
    std::optional<double> fac_full, fcac_full;
    std::optional<double> fac_m1, fcac_m1;
};

struct EvaluationReport {
    MetricsReport metrics;  // full stack + the four cumulative ablation rows
    std::vector<PerturbRow> perturb;
    long n_clips = 0;

    std::string to_json() const;
    static EvaluationReport from_json(const std::string& text);
    bool operator==(const EvaluationReport& other) const;
};

struct EvalOptions {
    bool perturb = false;
    std::vector<int> perturb_severities = {3};
    uint64_t seed = 0;  // perturbation seed base
    std::set<ModuleId> subset = {ModuleId::M1, ModuleId::M2, ModuleId::M3, ModuleId::M4};
};

EvaluationReport evaluate_manifest(const Models& models, const RunConfig& cfg,
                                   const Manifest& manifest, const EvalOptions& opts,
                                   std::vector<FaceDetection>* detections = nullptr);

void write_detections(const std::vector<FaceDetection>& detections, const std::string& path);
std::vector<FaceDetection> read_detections(const std::string& path);

}  // namespace hicom
