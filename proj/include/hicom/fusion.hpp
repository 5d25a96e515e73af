#pragma once

#include <array>
#include <set>
#include <vector>

#include "hicom/types.hpp"

namespace hicom {

enum class FusionMode { any_anomaly, weighted_score };

struct FusionConfig {
    FusionMode mode = FusionMode::any_anomaly;
    double m1_threshold = 0.5;
    double m2_threshold = 0.5;
    // Human-cue prevalence weights for weighted_score mode, renormalized
    // over the modules that produced a verdict.
    std::array<double, 4> weights = {0.342, 0.315, 0.250, 0.075};
    double label_threshold = 0.5;
};

struct FusionResult {
    int label = 0;          // final per-face prediction
    double score = 0.0;     // fused fake score
    std::set<ModuleId> attribution;  // modules that flagged the face
};

// Per-face verdict set, M1..M4. M1/M2 must carry a score; M3 may be NA.
struct FaceVerdicts {
    ModuleVerdict m1, m2, m3, m4;
};

// Combines the four module verdicts: in any_anomaly mode a face is fake
// iff any non-NA module flags it; the fused score is the max of module
// evidence. In weighted_score mode the fused score is the prevalence-
// weighted mean over available modules.
FusionResult fuse(const FaceVerdicts& verdicts, const FusionConfig& cfg);

// fuse restricted to a cumulative module subset; must contain M1.
FusionResult ablation_stack(const FaceVerdicts& verdicts, const std::set<ModuleId>& subset,
                            const FusionConfig& cfg);

// The four cumulative rows M1 / M1+M2 / M1+M2+M3 / M1+M2+M3+M4.
std::vector<std::set<ModuleId>> ablation_subsets();
std::string subset_name(const std::set<ModuleId>& subset);

}  // namespace hicom
