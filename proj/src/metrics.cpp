#include "hicom/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hicom {

std::optional<double> auc_rank(const std::vector<double>& scores,
                               const std::vector<int>& truth) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("auc_rank: scores and truth differ in length");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int t : truth) n_pos += (t != 0);
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Averaged ranks over tied score groups, ranks are 1-based.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>((i + 1) + (j + 1));
        for (size_t k = i; k <= j; ++k)
            if (truth[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

FaceMetrics compute_face_metrics(const std::vector<double>& pred_scores,
                                 const std::vector<int>& pred_labels,
                                 const std::vector<int>& truth) {
    if (truth.empty()) throw std::invalid_argument("compute_face_metrics: empty input");
    if (pred_scores.size() != truth.size() || pred_labels.size() != truth.size())
        throw std::invalid_argument("compute_face_metrics: length mismatch");

    size_t correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) correct += (pred_labels[i] == truth[i]);

    FaceMetrics m;
    m.fac = static_cast<double>(correct) / static_cast<double>(truth.size());
    m.fau = auc_rank(pred_scores, truth);
    return m;
}

FrameCompleteMetrics compute_frame_complete_metrics(const std::vector<FramePrediction>& frames) {
    if (frames.empty())
        throw std::invalid_argument("compute_frame_complete_metrics: no frames");

    size_t complete = 0;
    std::vector<double> frame_scores;
    std::vector<int> frame_truth;
    frame_scores.reserve(frames.size());
    frame_truth.reserve(frames.size());

    for (const auto& f : frames) {
        if (f.truth.empty())
            throw std::invalid_argument("compute_frame_complete_metrics: frame without faces");
        if (f.pred_labels.size() != f.truth.size() || f.scores.size() != f.truth.size())
            throw std::invalid_argument("compute_frame_complete_metrics: length mismatch");
        bool all_correct = true;
        for (size_t i = 0; i < f.truth.size(); ++i)
            if (f.pred_labels[i] != f.truth[i]) { all_correct = false; break; }
        complete += all_correct;

        frame_scores.push_back(*std::max_element(f.scores.begin(), f.scores.end()));
        int any_fake = 0;
        for (int t : f.truth) any_fake |= (t != 0);
        frame_truth.push_back(any_fake);
    }

    FrameCompleteMetrics m;
    m.fcac = static_cast<double>(complete) / static_cast<double>(frames.size());
    m.fcau = auc_rank(frame_scores, frame_truth);
    return m;
}

}  // namespace hicom
