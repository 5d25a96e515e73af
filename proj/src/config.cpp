#include "hicom/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace hicom {

RunConfig desk_profile() {
    RunConfig cfg;
    cfg.profile = "desk";
    cfg.m1.input_h = 180;
    cfg.m1.input_w = 320;
    cfg.m1.embed_dim = 32;
    cfg.m1.hidden = 64;
    cfg.m1.c1 = 12;
    cfg.m1.c2 = 24;
    cfg.m1.c3 = 32;
    cfg.m2.input_size = 64;
    cfg.m2.embed_dim = 64;
    cfg.gaze.eye_size = 32;
    cfg.gaze.c1 = 8;
    cfg.gaze.c2 = 16;
    cfg.gaze.c3 = 32;
    cfg.body_face.input_size = 64;
    cfg.body_face.c1 = 10;
    cfg.body_face.c2 = 16;
    cfg.body_face.c3 = 32;
    cfg.crops.face_size = 64;
    cfg.crops.eye_size = 32;
    cfg.crops.body_size = 64;
    cfg.train.lr = 1e-3;
    cfg.train.epochs = 15;
    cfg.train.m1_max_clips = 400;
    cfg.gen.canvas_h = 180;
    cfg.gen.canvas_w = 320;
    return cfg;
}

RunConfig paper_profile() {
    RunConfig cfg;
    cfg.profile = "paper";
    cfg.m1.input_h = 720;
    cfg.m1.input_w = 1280;
    cfg.m1.embed_dim = 128;
    cfg.m2.input_size = 224;
    cfg.gaze.eye_size = 224;
    cfg.body_face.input_size = 224;
    cfg.crops.face_size = 224;
    cfg.crops.eye_size = 224;
    cfg.crops.body_size = 224;
    cfg.train.lr = 1e-4;
    cfg.train.epochs = 120;
    cfg.gen.canvas_h = 720;
    cfg.gen.canvas_w = 1280;
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["profile"] = cfg.profile;
    j["n_clips"] = cfg.n_clips;
    j["split_ratios"] = cfg.split_ratios;

    json m1;
    m1["input_h"] = cfg.m1.input_h;
    m1["input_w"] = cfg.m1.input_w;
    m1["temporal_window"] = cfg.m1.temporal_window;
    m1["n_scales"] = cfg.m1.n_scales;
    m1["roi_output"] = cfg.m1.roi_output;
    m1["embed_dim"] = cfg.m1.embed_dim;
    m1["lambda_fa"] = cfg.m1.lambda_fa;
    m1["lambda_fr"] = cfg.m1.lambda_fr;
    m1["channels"] = {cfg.m1.c1, cfg.m1.c2, cfg.m1.c3};
    m1["hidden"] = cfg.m1.hidden;
    m1["bg_dilation"] = cfg.m1.bg_dilation;
    m1["threshold"] = cfg.m1.threshold;
    j["m1"] = std::move(m1);

    json m2;
    m2["input_size"] = cfg.m2.input_size;
    m2["patch"] = cfg.m2.patch;
    m2["embed_dim"] = cfg.m2.embed_dim;
    m2["heads"] = cfg.m2.heads;
    m2["blocks"] = cfg.m2.blocks;
    m2["mlp_dim"] = cfg.m2.mlp_dim;
    m2["margin"] = cfg.m2.margin;
    m2["lambda_comp"] = cfg.m2.lambda_comp;
    m2["pair_cap"] = cfg.m2.pair_cap;
    m2["threshold"] = cfg.m2.threshold;
    j["m2"] = std::move(m2);

    json gz;
    gz["eye_size"] = cfg.gaze.eye_size;
    gz["threshold"] = cfg.gaze.threshold;
    gz["channels"] = {cfg.gaze.c1, cfg.gaze.c2, cfg.gaze.c3};
    j["gaze"] = std::move(gz);

    json bf;
    bf["input_size"] = cfg.body_face.input_size;
    bf["channels"] = {cfg.body_face.c1, cfg.body_face.c2, cfg.body_face.c3};
    if (cfg.body_face.confidence_floor) bf["confidence_floor"] = *cfg.body_face.confidence_floor;
    else bf["confidence_floor"] = nullptr;
    j["body_face"] = std::move(bf);

    json cr;
    cr["face_size"] = cfg.crops.face_size;
    cr["eye_size"] = cfg.crops.eye_size;
    cr["body_size"] = cfg.crops.body_size;
    cr["eye_top_fraction"] = cfg.crops.eye_top_fraction;
    cr["eye_lateral_expand"] = cfg.crops.eye_lateral_expand;
    cr["body_width_factor"] = cfg.crops.body_width_factor;
    cr["body_height_factor"] = cfg.crops.body_height_factor;
    j["crops"] = std::move(cr);

    json fu;
    fu["mode"] = cfg.fusion.mode == FusionMode::any_anomaly ? "any_anomaly" : "weighted_score";
    fu["m1_threshold"] = cfg.fusion.m1_threshold;
    fu["m2_threshold"] = cfg.fusion.m2_threshold;
    fu["weights"] = cfg.fusion.weights;
    j["fusion"] = std::move(fu);

    json tr;
    tr["lr"] = cfg.train.lr;
    tr["epochs"] = cfg.train.epochs;
    tr["decay_every"] = cfg.train.decay_every;
    tr["decay_factor"] = cfg.train.decay_factor;
    tr["batch_clips"] = cfg.train.batch_clips;
    tr["batch_frames"] = cfg.train.batch_frames;
    tr["batch_crops"] = cfg.train.batch_crops;
    tr["frame_stride"] = cfg.train.frame_stride;
    tr["m1_max_clips"] = cfg.train.m1_max_clips;
    j["train"] = std::move(tr);

    json gen;
    gen["canvas_h"] = cfg.gen.canvas_h;
    gen["canvas_w"] = cfg.gen.canvas_w;
    gen["t_frames"] = cfg.gen.t_frames;
    gen["min_faces"] = cfg.gen.min_faces;
    gen["max_faces"] = cfg.gen.max_faces;
    gen["p_all_real"] = cfg.gen.p_all_real;
    gen["p_two_fakes"] = cfg.gen.p_two_fakes;
    gen["p_second_anomaly"] = cfg.gen.p_second_anomaly;
    gen["prevalence"] = cfg.gen.prevalence;
    gen["max_overlap_iou"] = cfg.gen.max_overlap_iou;
    j["gen"] = std::move(gen);
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig cfg = j.value("profile", "desk") == std::string("paper") ? paper_profile()
                                                                       : desk_profile();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_clips = j.value("n_clips", cfg.n_clips);
    if (j.contains("split_ratios")) cfg.split_ratios = j["split_ratios"].get<std::array<double, 3>>();

    if (j.contains("m1")) {
        const auto& m = j["m1"];
        cfg.m1.input_h = m.value("input_h", cfg.m1.input_h);
        cfg.m1.input_w = m.value("input_w", cfg.m1.input_w);
        cfg.m1.temporal_window = m.value("temporal_window", cfg.m1.temporal_window);
        cfg.m1.n_scales = m.value("n_scales", cfg.m1.n_scales);
        cfg.m1.roi_output = m.value("roi_output", cfg.m1.roi_output);
        cfg.m1.embed_dim = m.value("embed_dim", cfg.m1.embed_dim);
        cfg.m1.lambda_fa = m.value("lambda_fa", cfg.m1.lambda_fa);
        cfg.m1.lambda_fr = m.value("lambda_fr", cfg.m1.lambda_fr);
        cfg.m1.hidden = m.value("hidden", cfg.m1.hidden);
        cfg.m1.bg_dilation = m.value("bg_dilation", cfg.m1.bg_dilation);
        cfg.m1.threshold = m.value("threshold", cfg.m1.threshold);
        if (m.contains("channels")) {
            cfg.m1.c1 = m["channels"][0];
            cfg.m1.c2 = m["channels"][1];
            cfg.m1.c3 = m["channels"][2];
        }
    }
    if (j.contains("m2")) {
        const auto& m = j["m2"];
        cfg.m2.input_size = m.value("input_size", cfg.m2.input_size);
        cfg.m2.patch = m.value("patch", cfg.m2.patch);
        cfg.m2.embed_dim = m.value("embed_dim", cfg.m2.embed_dim);
        cfg.m2.heads = m.value("heads", cfg.m2.heads);
        cfg.m2.blocks = m.value("blocks", cfg.m2.blocks);
        cfg.m2.mlp_dim = m.value("mlp_dim", cfg.m2.mlp_dim);
        cfg.m2.margin = m.value("margin", cfg.m2.margin);
        cfg.m2.lambda_comp = m.value("lambda_comp", cfg.m2.lambda_comp);
        cfg.m2.pair_cap = m.value("pair_cap", cfg.m2.pair_cap);
        cfg.m2.threshold = m.value("threshold", cfg.m2.threshold);
    }
    if (j.contains("gaze")) {
        const auto& m = j["gaze"];
        cfg.gaze.eye_size = m.value("eye_size", cfg.gaze.eye_size);
        cfg.gaze.threshold = m.value("threshold", cfg.gaze.threshold);
        if (m.contains("channels")) {
            cfg.gaze.c1 = m["channels"][0];
            cfg.gaze.c2 = m["channels"][1];
            cfg.gaze.c3 = m["channels"][2];
        }
    }
    if (j.contains("body_face")) {
        const auto& m = j["body_face"];
        cfg.body_face.input_size = m.value("input_size", cfg.body_face.input_size);
        if (m.contains("channels")) {
            cfg.body_face.c1 = m["channels"][0];
            cfg.body_face.c2 = m["channels"][1];
            cfg.body_face.c3 = m["channels"][2];
        }
        if (m.contains("confidence_floor") && !m["confidence_floor"].is_null())
            cfg.body_face.confidence_floor = m["confidence_floor"].get<double>();
    }
    if (j.contains("crops")) {
        const auto& m = j["crops"];
        cfg.crops.face_size = m.value("face_size", cfg.crops.face_size);
        cfg.crops.eye_size = m.value("eye_size", cfg.crops.eye_size);
        cfg.crops.body_size = m.value("body_size", cfg.crops.body_size);
        cfg.crops.eye_top_fraction = m.value("eye_top_fraction", cfg.crops.eye_top_fraction);
        cfg.crops.eye_lateral_expand = m.value("eye_lateral_expand", cfg.crops.eye_lateral_expand);
        cfg.crops.body_width_factor = m.value("body_width_factor", cfg.crops.body_width_factor);
        cfg.crops.body_height_factor = m.value("body_height_factor", cfg.crops.body_height_factor);
    }
    if (j.contains("fusion")) {
        const auto& m = j["fusion"];
        cfg.fusion.mode = m.value("mode", "any_anomaly") == std::string("weighted_score")
                              ? FusionMode::weighted_score
                              : FusionMode::any_anomaly;
        cfg.fusion.m1_threshold = m.value("m1_threshold", cfg.fusion.m1_threshold);
        cfg.fusion.m2_threshold = m.value("m2_threshold", cfg.fusion.m2_threshold);
        if (m.contains("weights")) cfg.fusion.weights = m["weights"].get<std::array<double, 4>>();
    }
    if (j.contains("train")) {
        const auto& m = j["train"];
        cfg.train.lr = m.value("lr", cfg.train.lr);
        cfg.train.epochs = m.value("epochs", cfg.train.epochs);
        cfg.train.decay_every = m.value("decay_every", cfg.train.decay_every);
        cfg.train.decay_factor = m.value("decay_factor", cfg.train.decay_factor);
        cfg.train.batch_clips = m.value("batch_clips", cfg.train.batch_clips);
        cfg.train.batch_frames = m.value("batch_frames", cfg.train.batch_frames);
        cfg.train.batch_crops = m.value("batch_crops", cfg.train.batch_crops);
        cfg.train.frame_stride = m.value("frame_stride", cfg.train.frame_stride);
        cfg.train.m1_max_clips = m.value("m1_max_clips", cfg.train.m1_max_clips);
    }
    if (j.contains("gen")) {
        const auto& m = j["gen"];
        cfg.gen.canvas_h = m.value("canvas_h", cfg.gen.canvas_h);
        cfg.gen.canvas_w = m.value("canvas_w", cfg.gen.canvas_w);
        cfg.gen.t_frames = m.value("t_frames", cfg.gen.t_frames);
        cfg.gen.min_faces = m.value("min_faces", cfg.gen.min_faces);
        cfg.gen.max_faces = m.value("max_faces", cfg.gen.max_faces);
        cfg.gen.p_all_real = m.value("p_all_real", cfg.gen.p_all_real);
        cfg.gen.p_two_fakes = m.value("p_two_fakes", cfg.gen.p_two_fakes);
        cfg.gen.p_second_anomaly = m.value("p_second_anomaly", cfg.gen.p_second_anomaly);
        cfg.gen.max_overlap_iou = m.value("max_overlap_iou", cfg.gen.max_overlap_iou);
        if (m.contains("prevalence"))
            cfg.gen.prevalence = m["prevalence"].get<std::array<double, 4>>();
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_run_config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_run_config: cannot open " + path);
    f << run_config_to_json(cfg) << "\n";
}

}  // namespace hicom
