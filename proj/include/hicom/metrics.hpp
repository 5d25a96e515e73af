#pragma once

#include <optional>
#include <vector>

#include "hicom/types.hpp"

namespace hicom {

// ROC AUC of scores against binary truth via the Mann-Whitney rank
// statistic with averaged ranks for ties. Returns nullopt when truth
// contains a single class (undefined, never coerced to 0).
std::optional<double> auc_rank(const std::vector<double>& scores,
                               const std::vector<int>& truth);

struct FaceMetrics {
    double fac = 0.0;
    std::optional<double> fau;
};

// Face-level accuracy and AUC; every face counts independently.
FaceMetrics compute_face_metrics(const std::vector<double>& pred_scores,
                                 const std::vector<int>& pred_labels,
                                 const std::vector<int>& truth);

// Per-frame predictions for the frame-level complete metrics.
struct FramePrediction {
    std::vector<double> scores;  // per-face fake scores
    std::vector<int> pred_labels;
    std::vector<int> truth;
};

struct FrameCompleteMetrics {
    double fcac = 0.0;
    std::optional<double> fcau;
};

// FCAC: fraction of frames whose faces are all classified correctly.
// FCAU: AUC over frames, frame score = max per-face fake score,
// frame label = 1 iff any face is fake.
FrameCompleteMetrics compute_frame_complete_metrics(const std::vector<FramePrediction>& frames);

}  // namespace hicom
