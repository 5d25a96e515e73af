#pragma once

#include <string>

#include "hicom/body_face.hpp"
#include "hicom/crops.hpp"
#include "hicom/fusion.hpp"
#include "hicom/gaze.hpp"
#include "hicom/inter_face.hpp"
#include "hicom/scene_motion.hpp"
#include "hicom/synth.hpp"

namespace hicom {

struct TrainConfig {
    double lr = 1e-4;
    int epochs = 120;
    int decay_every = 10;       // lr *= decay_factor every decay_every epochs
    double decay_factor = 1.0 / 3.0;
    int batch_clips = 2;        // M1 clips per optimizer step
    int batch_frames = 4;       // M2 frames per step
    int batch_crops = 16;       // M3/M4 crops per step
    int frame_stride = 4;       // crop-training frames sampled every k-th frame
    int m1_max_clips = 0;       // 0 = use the whole split
    int balance_repeat = 4;     // gaze: balanced-list passes per epoch
};

struct RunConfig {
    uint64_t seed = 1234;
    std::string profile = "desk";
    SceneMotionConfig m1;
    InterFaceConfig m2;
    GazeConfig gaze;
    BodyFaceConfig body_face;
    CropPolicy crops;
    FusionConfig fusion;
    TrainConfig train;
    GeneratorOptions gen;
    int n_clips = 1000;
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
};

// Desk-scale profile: 180x320 M1 input, 64px crops, 15 epochs, sized so the
// whole train+evaluate cycle fits a single CPU budget.
RunConfig desk_profile();

// Publication-scale hyperparameters (720x1280 M1, 224px crops, Adam 1e-4,
// 120 epochs with 1/3 decay every 10). Selectable, not used by the tests.
RunConfig paper_profile();

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

}  // namespace hicom
