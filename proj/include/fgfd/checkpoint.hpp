#pragma once

#include "fgfd/config.hpp"
#include "fgfd/model.hpp"

#include <filesystem>

namespace fgfd {

inline constexpr const char* kCheckpointParams = "model.pt";
inline constexpr const char* kCheckpointMeta = "metadata.json";
inline constexpr int kCheckpointFormat = 1;

struct CheckpointMeta {
    RunConfig config;
    uint64_t seed = 0;
    int64_t epoch = 0;
    double val_auc = 0.0;
    int64_t parameter_count = 0;
};

/// Directory layout: model.pt (parameters and buffers) + metadata.json.
void save_checkpoint(const std::filesystem::path& dir, Detector& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    Detector model{nullptr};
    CheckpointMeta meta;
};

/// Throws CheckpointError when files are missing, malformed, or do not
/// match the architecture described by the metadata.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace fgfd
