#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "hicom/nn.hpp"

namespace hicom {

// Self-describing checkpoint container shared by all four modules:
// magic, JSON header (module name, config echo, RNG seed, epoch counter,
// tensor directory), then raw little-endian doubles in directory order.
struct CheckpointMeta {
    std::string module;
    nlohmann::json config;
    uint64_t seed = 0;
    int epoch = 0;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const nn::ParamSet& params);

// Loads tensors into `params` (names and sizes must match) and returns
// the stored metadata.
CheckpointMeta load_checkpoint(const std::string& path, nn::ParamSet& params);

// Reads only the metadata header.
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace hicom
