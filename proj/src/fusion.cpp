#include "hicom/fusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace hicom {

namespace {

const ModuleVerdict& verdict_of(const FaceVerdicts& v, ModuleId m) {
    switch (m) {
        case ModuleId::M1: return v.m1;
        case ModuleId::M2: return v.m2;
        case ModuleId::M3: return v.m3;
        case ModuleId::M4: return v.m4;
    }
    throw std::logic_error("verdict_of: bad module id");
}

// Module evidence as a score in [0,1]: M1/M2 use their probability,
// M3/M4 contribute their flag.
double evidence_score(const ModuleVerdict& v) {
    if (v.score) return *v.score;
    return v.flag == ModuleVerdict::Flag::fake ? 1.0 : 0.0;
}

}  // namespace

std::vector<std::set<ModuleId>> ablation_subsets() {
    return {
        {ModuleId::M1},
        {ModuleId::M1, ModuleId::M2},
        {ModuleId::M1, ModuleId::M2, ModuleId::M3},
        {ModuleId::M1, ModuleId::M2, ModuleId::M3, ModuleId::M4},
    };
}

std::string subset_name(const std::set<ModuleId>& subset) {
    std::string out;
    for (ModuleId m : subset) {
        if (!out.empty()) out += "+";
        out += module_name(m);
    }
    return out;
}

FusionResult ablation_stack(const FaceVerdicts& verdicts, const std::set<ModuleId>& subset,
                            const FusionConfig& cfg) {
    if (subset.empty()) throw std::invalid_argument("ablation_stack: empty module subset");
    if (!subset.count(ModuleId::M1))
        throw std::invalid_argument("ablation_stack: subset must contain M1");
    if (subset.count(ModuleId::M1) && !verdicts.m1.score)
        throw std::invalid_argument("fuse: M1 verdict missing its score");
    if (subset.count(ModuleId::M2) && !verdicts.m2.score)
        throw std::invalid_argument("fuse: M2 verdict missing its score");

    // M1/M2 flags derive from their scores and the configured thresholds,
    // so the fusion config is the single place deciding them.
    auto is_flagged = [&cfg](const ModuleVerdict& v, ModuleId m) {
        if (m == ModuleId::M1) return *v.score >= cfg.m1_threshold;
        if (m == ModuleId::M2) return *v.score >= cfg.m2_threshold;
        return v.flag == ModuleVerdict::Flag::fake;
    };

    FusionResult result;
    if (cfg.mode == FusionMode::any_anomaly) {
        double score = 0.0;
        for (ModuleId m : subset) {
            const ModuleVerdict& v = verdict_of(verdicts, m);
            if (v.flag == ModuleVerdict::Flag::na) continue;
            if (is_flagged(v, m)) result.attribution.insert(m);
            score = std::max(score, evidence_score(v));
        }
        result.label = result.attribution.empty() ? 0 : 1;
        result.score = score;
        return result;
    }

    // weighted_score: NA modules contribute zero weight, the rest renormalize.
    double wsum = 0.0, acc = 0.0;
    for (ModuleId m : subset) {
        const ModuleVerdict& v = verdict_of(verdicts, m);
        if (v.flag == ModuleVerdict::Flag::na) continue;
        double w = cfg.weights[static_cast<size_t>(m)];
        wsum += w;
        acc += w * evidence_score(v);
        if (is_flagged(v, m)) result.attribution.insert(m);
    }
    result.score = wsum > 0.0 ? acc / wsum : 0.0;
    result.label = result.score >= cfg.label_threshold ? 1 : 0;
    return result;
}

FusionResult fuse(const FaceVerdicts& verdicts, const FusionConfig& cfg) {
    return ablation_stack(verdicts,
                          {ModuleId::M1, ModuleId::M2, ModuleId::M3, ModuleId::M4}, cfg);
}

}  // namespace hicom
