#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hicom/config.hpp"
#include "hicom/evaluate.hpp"
#include "hicom/explain.hpp"
#include "hicom/manifest.hpp"
#include "hicom/plots.hpp"
#include "hicom/synth.hpp"
#include "hicom/train.hpp"

namespace fs = std::filesystem;
using namespace hicom;

namespace {

RunConfig load_config_or_default(const std::string& config_path, const std::string& profile) {
    if (!config_path.empty()) return load_run_config(config_path);
    return profile == "paper" ? paper_profile() : desk_profile();
}

int run_generate(const std::string& config_path, const std::string& profile,
                 const std::string& out_dir, int clips, uint64_t seed, bool has_seed,
                 bool force) {
    RunConfig cfg = load_config_or_default(config_path, profile);
    if (clips > 0) cfg.n_clips = clips;
    if (has_seed) cfg.seed = seed;

    if (fs::exists(fs::path(out_dir) / "train.jsonl")) {
        if (!force) {
            std::cerr << "generate: output " << out_dir
                      << " already holds a dataset; pass --force to overwrite\n";
            return 2;
        }
        fs::remove_all(out_dir);
    }

    DatasetSpec spec;
    spec.out_dir = out_dir;
    spec.n_clips = cfg.n_clips;
    spec.split_ratios = cfg.split_ratios;
    spec.master_seed = cfg.seed;
    spec.gen = cfg.gen;
    DatasetAudit audit = build_dataset(spec);
    save_run_config(cfg, (fs::path(out_dir) / "config.json").string());
    std::cout << audit.to_json() << "\n";
    std::cout << "generate: wrote " << cfg.n_clips << " clips to " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& profile,
              const std::string& data_dir, const std::string& modules, const std::string& out_dir,
              uint64_t seed, bool has_seed) {
    RunConfig cfg = load_config_or_default(config_path, profile);
    if (has_seed) cfg.seed = seed;
    auto results = cmd_train(cfg, data_dir, modules, out_dir);
    for (const auto& r : results)
        std::cout << "train: " << r.module << " best epoch " << r.best_epoch << " val loss "
                  << r.best_val << " -> " << r.checkpoint_path << "\n";
    return 0;
}

std::set<ModuleId> parse_modules(const std::string& csv) {
    if (csv.empty() || csv == "all")
        return {ModuleId::M1, ModuleId::M2, ModuleId::M3, ModuleId::M4};
    std::set<ModuleId> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "M1") out.insert(ModuleId::M1);
        else if (tok == "M2") out.insert(ModuleId::M2);
        else if (tok == "M3" || tok == "gaze") out.insert(ModuleId::M3);
        else if (tok == "M4" || tok == "agegender") out.insert(ModuleId::M4);
        else throw CLI::ValidationError("--modules", "unknown module " + tok);
    }
    return out;
}

int run_evaluate(const std::string& config_path, const std::string& profile,
                 const std::string& data_dir, const std::string& split,
                 const std::string& ckpt_dir, const std::string& out_dir,
                 const std::string& modules, bool perturb, const std::vector<int>& severities,
                 uint64_t seed, bool has_seed) {
    RunConfig cfg = load_config_or_default(config_path, profile);
    if (has_seed) cfg.seed = seed;

    Manifest manifest = read_manifest((fs::path(data_dir) / (split + ".jsonl")).string());
    EvalOptions opts;
    opts.subset = parse_modules(modules);
    opts.perturb = perturb;
    if (!severities.empty()) opts.perturb_severities = severities;
    opts.seed = mix_seed(cfg.seed, 0xE7A1);

    Models models = load_models(cfg, ckpt_dir, opts.subset);
    std::vector<FaceDetection> detections;
    EvaluationReport report = evaluate_manifest(models, cfg, manifest, opts, &detections);

    fs::create_directories(out_dir);
    std::ofstream rf(fs::path(out_dir) / "report.json");
    rf << report.to_json() << "\n";
    rf.close();
    write_detections(detections, (fs::path(out_dir) / "detections.jsonl").string());
    save_plot(render_metric_bars(report.metrics),
              (fs::path(out_dir) / "metric_bars.ppm").string());
    if (perturb && report.metrics.fac && !report.metrics.ablation.empty() &&
        report.metrics.ablation.front().fac)
        save_plot(render_perturbation_chart(report.perturb, *report.metrics.fac,
                                            *report.metrics.ablation.front().fac),
                  (fs::path(out_dir) / "perturbation_chart.ppm").string());

    for (const auto& row : report.metrics.ablation)
        std::cout << "evaluate: " << row.modules << " FAC " << (row.fac ? *row.fac : -1)
                  << " FCAC " << (row.fcac ? *row.fcac : -1) << "\n";
    std::cout << "evaluate: report written to " << out_dir << "\n";
    return 0;
}

int run_explain(const std::string& detections_path, bool offline, const std::string& llm_url,
                const std::string& out_path) {
    auto detections = read_detections(detections_path);
    ExplainOptions opts;
    opts.offline = offline || llm_url.empty();
    opts.llm_url = llm_url;
    auto records = cmd_explain(detections, opts);
    write_explanations(records, out_path);
    size_t degraded = 0;
    for (const auto& r : records) degraded += r.degraded;
    std::cout << "explain: wrote " << records.size() << " records to " << out_path;
    if (degraded) std::cout << " (" << degraded << " degraded to offline)";
    std::cout << "\n";
    return 0;
}

int run_ingest(const std::string& in_path, const std::string& layout,
               const std::string& out_path) {
    IngestResult result = ingest_external_manifest(in_path, layout);
    write_manifest(result.manifest, out_path);
    std::cout << "ingest: " << result.manifest.clips.size() << " clips normalized to " << out_path
              << "\n";
    for (const auto& r : result.rejected)
        std::cout << "ingest: rejected record " << r.line << ": " << r.reason << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hicom: human-cue multi-face deepfake detection toolkit"};
    app.require_subcommand(1);

    std::string config_path, profile = "desk";
    std::string out_dir, data_dir = ".", ckpt_dir = "checkpoints", modules = "all";
    std::string split = "test";
    std::string detections_path, llm_url, layout = "jsonl", in_path;
    uint64_t seed = 0;
    int clips = 0;
    bool force = false, perturb = false, offline = false;
    std::vector<int> severities;

    auto* generate = app.add_subcommand("generate", "build a synthetic multi-face dataset");
    generate->add_option("--config", config_path, "run config JSON");
    generate->add_option("--profile", profile, "desk or paper (when no --config)");
    generate->add_option("--out", out_dir, "output dataset directory")->required();
    generate->add_option("--clips", clips, "number of clips");
    auto* gseed = generate->add_option("--seed", seed, "master seed");
    generate->add_flag("--force", force, "overwrite an existing dataset");

    auto* train = app.add_subcommand("train", "train detector modules");
    train->add_option("--config", config_path, "run config JSON");
    train->add_option("--profile", profile, "desk or paper (when no --config)");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--modules", modules, "M1|M2|gaze|agegender|all");
    train->add_option("--out", out_dir, "checkpoint directory")->required();
    auto* tseed = train->add_option("--seed", seed, "training seed");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate trained modules");
    evaluate->add_option("--config", config_path, "run config JSON");
    evaluate->add_option("--profile", profile, "desk or paper (when no --config)");
    evaluate->add_option("--data", data_dir, "dataset directory")->required();
    evaluate->add_option("--split", split, "manifest split to evaluate (default test)");
    evaluate->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
    evaluate->add_option("--out", out_dir, "report directory")->required();
    evaluate->add_option("--modules", modules, "module subset, e.g. M1,M2");
    evaluate->add_flag("--perturb", perturb, "run the perturbation sweep");
    evaluate->add_option("--perturb-severities", severities, "severity levels (default 3)");
    auto* eseed = evaluate->add_option("--seed", seed, "evaluation seed");

    auto* explain = app.add_subcommand("explain", "emit per-face explanations");
    explain->add_option("--detections", detections_path, "detections.jsonl from evaluate")
        ->required();
    explain->add_flag("--offline", offline, "use the deterministic template");
    explain->add_option("--llm", llm_url, "HTTP endpoint for LLM explanations");
    explain->add_option("--out", out_dir, "output explanations JSONL")->required();

    auto* ingest = app.add_subcommand("ingest", "normalize an external manifest");
    ingest->add_option("--in", in_path, "input manifest or dataset root")->required();
    ingest->add_option("--layout", layout, "jsonl or ffiw_like");
    ingest->add_option("--out", out_dir, "normalized manifest path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed())
            return run_generate(config_path, profile, out_dir, clips, seed, !gseed->empty(), force);
        if (train->parsed())
            return run_train(config_path, profile, data_dir, modules, out_dir, seed,
                             !tseed->empty());
        if (evaluate->parsed())
            return run_evaluate(config_path, profile, data_dir, split, ckpt_dir, out_dir, modules,
                                perturb, severities, seed, !eseed->empty());
        if (explain->parsed()) return run_explain(detections_path, offline, llm_url, out_dir);
        if (ingest->parsed()) return run_ingest(in_path, layout, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
