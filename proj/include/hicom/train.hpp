#pragma once

#include <string>
#include <vector>

#include "hicom/config.hpp"
#include "hicom/manifest.hpp"

namespace hicom {

struct EpochLog {
    int epoch = 0;       // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::string module;
    std::vector<EpochLog> log;
    int best_epoch = 0;       // epoch with minimum validation loss
    double best_val = 0.0;
    std::string checkpoint_path;
};

// Per-module trainers. Each reads train.jsonl/val.jsonl under data_dir,
// trains deterministically from cfg.seed, selects the epoch with minimum
// validation loss and writes <out_dir>/<module>.ckpt plus a JSON epoch log.
TrainResult train_m1(const RunConfig& cfg, const std::string& data_dir,
                     const std::string& out_dir);
TrainResult train_m2(const RunConfig& cfg, const std::string& data_dir,
                     const std::string& out_dir);
TrainResult train_gaze(const RunConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir);
TrainResult train_attributes(const RunConfig& cfg, const std::string& data_dir,
                             const std::string& out_dir);

// module is one of M1, M2, gaze, agegender, all.
std::vector<TrainResult> cmd_train(const RunConfig& cfg, const std::string& data_dir,
                                   const std::string& module, const std::string& out_dir);

// Learning rate after the configured step decays (1-based epoch).
double lr_at_epoch(const TrainConfig& tc, int epoch);

void write_train_log(const TrainResult& result, const std::string& path);

}  // namespace hicom
