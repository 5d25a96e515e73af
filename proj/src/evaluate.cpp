#include "hicom/evaluate.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "hicom/checkpoint.hpp"
#include "hicom/crops.hpp"
#include "hicom/fusion.hpp"
#include "hicom/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hicom {

Models load_models(const RunConfig& cfg, const std::string& ckpt_dir,
                   const std::set<ModuleId>& needed) {
    Models models;
    auto require = [&](const std::string& name) {
        fs::path p = fs::path(ckpt_dir) / (name + ".ckpt");
        if (!fs::exists(p))
            throw std::runtime_error("load_models: missing checkpoint for " + name + " at " +
                                     p.string());
        return p.string();
    };
    if (needed.count(ModuleId::M1)) {
        models.m1 = std::make_unique<SceneMotionNet>(cfg.m1, 0);
        auto params = models.m1->params();
        load_checkpoint(require("m1"), params);
    }
    if (needed.count(ModuleId::M2)) {
        models.m2 = std::make_unique<InterFaceNet>(cfg.m2, 0);
        auto params = models.m2->params();
        load_checkpoint(require("m2"), params);
    }
    if (needed.count(ModuleId::M3)) {
        models.gaze = std::make_unique<GazeNet>(cfg.gaze, 0);
        auto params = models.gaze->params();
        load_checkpoint(require("gaze"), params);
    }
    if (needed.count(ModuleId::M4)) {
        models.attr = std::make_unique<AttributeNet>(cfg.body_face, 0);
        auto params = models.attr->params();
        load_checkpoint(require("attr"), params);
    }
    return models;
}

std::vector<std::vector<FaceVerdicts>> clip_verdicts(const Models& models, const RunConfig& cfg,
                                                     const ClipSample& clip,
                                                     const std::set<ModuleId>& subset) {
    const size_t n_frames = clip.frames.size();
    std::vector<std::vector<FaceVerdicts>> out(n_frames);
    if (n_frames == 0) return out;

    // M1 scores one face track per clip window and broadcasts across frames.
    std::vector<double> m1_scores;
    if (subset.count(ModuleId::M1)) {
        if (!models.m1) throw std::runtime_error("clip_verdicts: M1 requested but not loaded");
        std::vector<Image> frames;
        std::vector<std::vector<FaceBox>> boxes;
        for (const auto& fr : clip.frames) {
            frames.push_back(fr.image);
            std::vector<FaceBox> b;
            for (const auto& face : fr.faces) b.push_back(face.box);
            boxes.push_back(std::move(b));
        }
        m1_scores = models.m1->score_clip(frames, boxes).face_scores;
    }

    CropPolicy m2_policy = cfg.crops;
    m2_policy.face_size = cfg.m2.input_size;
    CropPolicy gaze_policy = cfg.crops;
    gaze_policy.eye_size = cfg.gaze.eye_size;
    CropPolicy attr_policy = cfg.crops;
    attr_policy.face_size = cfg.body_face.input_size;
    attr_policy.body_size = cfg.body_face.input_size;

    for (size_t t = 0; t < n_frames; ++t) {
        const auto& frame = clip.frames[t];
        const size_t n_faces = frame.faces.size();
        out[t].resize(n_faces);

        // M3 needs the whole frame's locked flags before the rule applies.
        std::vector<int> locked_flags;
        if (subset.count(ModuleId::M3)) {
            if (!models.gaze) throw std::runtime_error("clip_verdicts: M3 requested but not loaded");
            for (const auto& face : frame.faces) {
                double p = models.gaze->classify_gaze(
                    crop_eyes(frame.image, face.box, gaze_policy));
                locked_flags.push_back(p >= cfg.gaze.threshold ? 1 : 0);
            }
        }
        std::vector<ModuleVerdict::Flag> gaze_flags;
        if (!locked_flags.empty()) gaze_flags = gaze_rule(locked_flags);

        for (size_t i = 0; i < n_faces; ++i) {
            FaceVerdicts v;
            v.m1 = subset.count(ModuleId::M1)
                       ? ModuleVerdict::scored(ModuleId::M1,
                                               i < m1_scores.size() ? m1_scores[i] : 0.0,
                                               cfg.fusion.m1_threshold)
                       : ModuleVerdict::scored(ModuleId::M1, 0.0, cfg.fusion.m1_threshold);

            if (subset.count(ModuleId::M2)) {
                if (!models.m2)
                    throw std::runtime_error("clip_verdicts: M2 requested but not loaded");
                double s = models.m2->score_face(
                    crop_face(frame.image, frame.faces[i].box, m2_policy));
                v.m2 = ModuleVerdict::scored(ModuleId::M2, s, cfg.fusion.m2_threshold);
            } else {
                v.m2 = ModuleVerdict::scored(ModuleId::M2, 0.0, cfg.fusion.m2_threshold);
            }

            v.m3 = gaze_flags.empty()
                       ? ModuleVerdict::not_applicable(ModuleId::M3)
                       : ModuleVerdict{ModuleId::M3, std::nullopt, gaze_flags[i]};

            if (subset.count(ModuleId::M4)) {
                if (!models.attr)
                    throw std::runtime_error("clip_verdicts: M4 requested but not loaded");
                AttributePrediction pred;
                auto face_out = models.attr->classify(
                    crop_face(frame.image, frame.faces[i].box, attr_policy));
                pred.age_face = face_out.age;
                pred.gender_face = face_out.gender;
                pred.age_face_conf = face_out.age_conf;
                pred.gender_face_conf = face_out.gender_conf;
                try {
                    Image body = crop_body(frame.image, frame.faces[i].box, attr_policy);
                    FaceBox fib = face_box_in_body_crop(frame.image, frame.faces[i].box, attr_policy);
                    auto body_out = models.attr->classify(block_face_in_body(body, fib));
                    pred.age_body = body_out.age;
                    pred.gender_body = body_out.gender;
                    pred.age_body_conf = body_out.age_conf;
                    pred.gender_body_conf = body_out.gender_conf;
                } catch (const std::invalid_argument&) {
                    pred.body_available = false;  // no-evidence: verdict 0
                }
                if (cfg.body_face.confidence_floor && pred.body_available) {
                    double floor = *cfg.body_face.confidence_floor;
                    if (pred.age_face_conf.maxCoeff() < floor ||
                        pred.age_body_conf.maxCoeff() < floor)
                        pred.body_available = false;
                }
                v.m4 = ModuleVerdict::flagged(ModuleId::M4, mismatch_rule(pred) == 1);
            } else {
                v.m4 = ModuleVerdict::flagged(ModuleId::M4, false);
            }
            out[t][i] = v;
        }
    }
    return out;
}

namespace {

struct SplitAccumulator {
    std::vector<FramePrediction> frames;
    std::vector<double> face_scores;
    std::vector<int> face_preds, face_truth;
};

void accumulate(SplitAccumulator& acc, const std::vector<std::vector<FaceVerdicts>>& verdicts,
                const ClipSample& clip, const std::set<ModuleId>& subset,
                const FusionConfig& fusion) {
    for (size_t t = 0; t < verdicts.size(); ++t) {
        if (verdicts[t].empty()) continue;
        FramePrediction fp;
        for (size_t i = 0; i < verdicts[t].size(); ++i) {
            FusionResult r = ablation_stack(verdicts[t][i], subset, fusion);
            fp.scores.push_back(r.score);
            fp.pred_labels.push_back(r.label);
            fp.truth.push_back(clip.frames[t].faces[i].label);
            acc.face_scores.push_back(r.score);
            acc.face_preds.push_back(r.label);
            acc.face_truth.push_back(clip.frames[t].faces[i].label);
        }
        acc.frames.push_back(std::move(fp));
    }
}

AblationRow row_of(const SplitAccumulator& acc, const std::string& name) {
    AblationRow row;
    row.modules = name;
    auto fm = compute_face_metrics(acc.face_scores, acc.face_preds, acc.face_truth);
    row.fac = fm.fac;
    row.fau = fm.fau;
    auto fc = compute_frame_complete_metrics(acc.frames);
    row.fcac = fc.fcac;
    row.fcau = fc.fcau;
    return row;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
    return j.is_null() ? std::nullopt : std::make_optional(j.get<double>());
}

}  // namespace

EvaluationReport evaluate_manifest(const Models& models, const RunConfig& cfg,
                                   const Manifest& manifest, const EvalOptions& opts,
                                   std::vector<FaceDetection>* detections) {
    if (manifest.clips.empty()) throw std::invalid_argument("evaluate_manifest: empty manifest");

    auto subsets = ablation_subsets();
    // restrict rows to those the requested module subset can serve
    std::vector<std::set<ModuleId>> rows;
    for (auto& s : subsets) {
        bool ok = true;
        for (ModuleId m : s) ok = ok && opts.subset.count(m);
        if (ok) rows.push_back(s);
    }
    if (rows.empty()) throw std::invalid_argument("evaluate_manifest: subset must include M1");

    std::vector<SplitAccumulator> accs(rows.size());
    EvaluationReport report;
    report.n_clips = static_cast<long>(manifest.clips.size());

    for (const auto& rec : manifest.clips) {
        ClipSample clip = load_clip(manifest, rec);
        auto verdicts = clip_verdicts(models, cfg, clip, opts.subset);
        for (size_t r = 0; r < rows.size(); ++r) accumulate(accs[r], verdicts, clip, rows[r], cfg.fusion);

        if (detections) {
            for (size_t t = 0; t < verdicts.size(); ++t)
                for (size_t i = 0; i < verdicts[t].size(); ++i) {
                    FaceDetection d;
                    d.clip_id = clip.clip_id;
                    d.frame_id = clip.frames[t].frame_id;
                    d.face_id = clip.frames[t].faces[i].face_id;
                    d.truth = clip.frames[t].faces[i].label;
                    FusionResult r = ablation_stack(verdicts[t][i], rows.back(), cfg.fusion);
                    d.final_label = r.label;
                    d.fused_score = r.score;
                    d.attribution = r.attribution;
                    d.verdicts = verdicts[t][i];
                    detections->push_back(std::move(d));
                }
        }
    }

    for (size_t r = 0; r < rows.size(); ++r)
        report.metrics.ablation.push_back(row_of(accs[r], subset_name(rows[r])));
    const auto& full = report.metrics.ablation.back();
    report.metrics.fac = full.fac;
    report.metrics.fau = full.fau;
    report.metrics.fcac = full.fcac;
    report.metrics.fcau = full.fcau;
    report.metrics.n_frames = static_cast<long>(accs.back().frames.size());
    report.metrics.n_faces = static_cast<long>(accs.back().face_truth.size());

    if (opts.perturb) {
        const bool have_m1_row = rows.size() >= 1;
        for (int k = 0; k < kNumPerturbationKinds; ++k) {
            for (int severity : opts.perturb_severities) {
                SplitAccumulator acc_full, acc_m1;
                for (size_t ci = 0; ci < manifest.clips.size(); ++ci) {
                    ClipSample clip = load_clip(manifest, manifest.clips[ci]);
                    for (size_t t = 0; t < clip.frames.size(); ++t) {
                        uint64_t seed = mix_seed(mix_seed(opts.seed, static_cast<uint64_t>(k),
                                                          static_cast<uint64_t>(severity)),
                                                 ci, t);
                        clip.frames[t].image = apply_perturbation(
                            clip.frames[t].image, static_cast<PerturbationKind>(k), severity, seed);
                    }
                    auto verdicts = clip_verdicts(models, cfg, clip, opts.subset);
                    accumulate(acc_full, verdicts, clip, rows.back(), cfg.fusion);
                    if (have_m1_row) accumulate(acc_m1, verdicts, clip, rows.front(), cfg.fusion);
                }
                PerturbRow row;
                row.kind = perturbation_name(static_cast<PerturbationKind>(k));
                row.severity = severity;
                auto fm = compute_face_metrics(acc_full.face_scores, acc_full.face_preds,
                                               acc_full.face_truth);
                row.fac_full = fm.fac;
                row.fcac_full = compute_frame_complete_metrics(acc_full.frames).fcac;
                if (have_m1_row) {
                    auto m1m = compute_face_metrics(acc_m1.face_scores, acc_m1.face_preds,
                                                    acc_m1.face_truth);
                    row.fac_m1 = m1m.fac;
                    row.fcac_m1 = compute_frame_complete_metrics(acc_m1.frames).fcac;
                }
                report.perturb.push_back(std::move(row));
            }
        }
    }
    return report;
}

std::string EvaluationReport::to_json() const {
    json j;
    j["n_clips"] = n_clips;
    j["n_frames"] = metrics.n_frames;
    j["n_faces"] = metrics.n_faces;
    j["FAC"] = opt_json(metrics.fac);
    j["FAU"] = opt_json(metrics.fau);
    j["FCAC"] = opt_json(metrics.fcac);
    j["FCAU"] = opt_json(metrics.fcau);
    j["ablation"] = json::array();
    for (const auto& row : metrics.ablation)
        j["ablation"].push_back({{"modules", row.modules},
                                 {"FAC", opt_json(row.fac)},
                                 {"FAU", opt_json(row.fau)},
                                 {"FCAC", opt_json(row.fcac)},
                                 {"FCAU", opt_json(row.fcau)}});
    j["perturbations"] = json::array();
    for (const auto& p : perturb)
        j["perturbations"].push_back({{"kind", p.kind},
                                      {"severity", p.severity},
                                      {"fac_full", opt_json(p.fac_full)},
                                      {"fcac_full", opt_json(p.fcac_full)},
                                      {"fac_m1", opt_json(p.fac_m1)},
                                      {"fcac_m1", opt_json(p.fcac_m1)}});
    return j.dump(2);
}

EvaluationReport EvaluationReport::from_json(const std::string& text) {
    json j = json::parse(text);
    EvaluationReport r;
    r.n_clips = j.at("n_clips").get<long>();
    r.metrics.n_frames = j.at("n_frames").get<long>();
    r.metrics.n_faces = j.at("n_faces").get<long>();
    r.metrics.fac = opt_from(j.at("FAC"));
    r.metrics.fau = opt_from(j.at("FAU"));
    r.metrics.fcac = opt_from(j.at("FCAC"));
    r.metrics.fcau = opt_from(j.at("FCAU"));
    for (const auto& row : j.at("ablation")) {
        AblationRow a;
        a.modules = row.at("modules").get<std::string>();
        a.fac = opt_from(row.at("FAC"));
        a.fau = opt_from(row.at("FAU"));
        a.fcac = opt_from(row.at("FCAC"));
        a.fcau = opt_from(row.at("FCAU"));
        r.metrics.ablation.push_back(std::move(a));
    }
    for (const auto& row : j.at("perturbations")) {
        PerturbRow p;
        p.kind = row.at("kind").get<std::string>();
        p.severity = row.at("severity").get<int>();
        p.fac_full = opt_from(row.at("fac_full"));
        p.fcac_full = opt_from(row.at("fcac_full"));
        p.fac_m1 = opt_from(row.at("fac_m1"));
        p.fcac_m1 = opt_from(row.at("fcac_m1"));
        r.perturb.push_back(std::move(p));
    }
    return r;
}

bool EvaluationReport::operator==(const EvaluationReport& other) const {
    return to_json() == other.to_json();
}

void write_detections(const std::vector<FaceDetection>& detections, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_detections: cannot open " + path);
    for (const auto& d : detections) {
        json j;
        j["clip_id"] = d.clip_id;
        j["frame_id"] = d.frame_id;
        j["face_id"] = d.face_id;
        j["truth"] = d.truth;
        j["final_label"] = d.final_label;
        j["fused_score"] = d.fused_score;
        j["attribution"] = json::array();
        for (ModuleId m : d.attribution) j["attribution"].push_back(module_name(m));
        j["m1_score"] = d.verdicts.m1.score ? json(*d.verdicts.m1.score) : json(nullptr);
        j["m2_score"] = d.verdicts.m2.score ? json(*d.verdicts.m2.score) : json(nullptr);
        j["m3_flag"] = d.verdicts.m3.flag == ModuleVerdict::Flag::na
                           ? json(nullptr)
                           : json(d.verdicts.m3.flag == ModuleVerdict::Flag::fake ? 1 : 0);
        j["m4_flag"] = d.verdicts.m4.flag == ModuleVerdict::Flag::fake ? 1 : 0;
        f << j.dump() << "\n";
    }
}

std::vector<FaceDetection> read_detections(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_detections: cannot open " + path);
    std::vector<FaceDetection> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        FaceDetection d;
        d.clip_id = j.at("clip_id").get<std::string>();
        d.frame_id = j.at("frame_id").get<int>();
        d.face_id = j.at("face_id").get<int>();
        d.truth = j.at("truth").get<int>();
        d.final_label = j.at("final_label").get<int>();
        d.fused_score = j.at("fused_score").get<double>();
        for (const auto& m : j.at("attribution")) {
            std::string name = m.get<std::string>();
            for (int k = 0; k < 4; ++k)
                if (name == module_name(static_cast<ModuleId>(k)))
                    d.attribution.insert(static_cast<ModuleId>(k));
        }
        auto score_of = [&](const char* key) -> std::optional<double> {
            return j.at(key).is_null() ? std::nullopt
                                       : std::make_optional(j.at(key).get<double>());
        };
        d.verdicts.m1 = ModuleVerdict{ModuleId::M1, score_of("m1_score"),
                                      ModuleVerdict::Flag::real};
        d.verdicts.m2 = ModuleVerdict{ModuleId::M2, score_of("m2_score"),
                                      ModuleVerdict::Flag::real};
        if (j.at("m3_flag").is_null())
            d.verdicts.m3 = ModuleVerdict::not_applicable(ModuleId::M3);
        else
            d.verdicts.m3 = ModuleVerdict::flagged(ModuleId::M3, j.at("m3_flag").get<int>() == 1);
        d.verdicts.m4 = ModuleVerdict::flagged(ModuleId::M4, j.at("m4_flag").get<int>() == 1);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace hicom
