#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cranial/model.hpp"
#include "cranial/optim.hpp"

namespace cranial {

/// A checkpoint is a pair of files:
///   <stem>.json  manifest: format tag, model and optimizer configs, epoch,
///                optimizer step, seed, config hash, and a table of
///                {name, shape, offset, count} in parameter-naming order;
///   <stem>.bin   little-endian float64 payload: all parameter values in
///                manifest order, then all first moments, then all second
///                moments (three equal-length sections).
struct CheckpointMeta {
    int epoch = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

constexpr const char* kCheckpointFormat = "cranial-checkpoint-v1";

void save_checkpoint(const std::filesystem::path& stem, const MicroUNet& model, const AdamW& optim,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    MicroUNet model;
    AdamW optim;
    CheckpointMeta meta;
};

/// `path` may name the stem, the .json manifest or the .bin payload.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cranial
