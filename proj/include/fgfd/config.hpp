#pragma once

#include "fgfd/data.hpp"
#include "fgfd/synthetic.hpp"
#include "fgfd/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fgfd {

struct DataConfig {
    SyntheticConfig synthetic;
    PreprocessConfig preprocess;
    FrameCounts frame_counts;
    std::vector<std::string> train_families{"A"};
    std::vector<std::string> eval_families{"A", "B", "C"};
    uint64_t sampling_seed = 0;
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);

struct ExplainConfig {
    int block_index = -1; // negative counts from the last block
    int target_class = 1;
    double alpha = 0.5;
    int64_t max_images = 64;
};

void to_json(nlohmann::json& j, const ExplainConfig& c);
void from_json(const nlohmann::json& j, ExplainConfig& c);

/// Effective configuration of a run: everything needed to reproduce it.
struct RunConfig {
    std::string profile = "desk";
    DataConfig data;
    TrainConfig train;
    ExplainConfig explain;

    /// Values of record: 256x256 frames, D = (256, 128, 64, 32), batch 64,
    /// 64-wide fusion, 270/150/150 frames per video.
    static RunConfig paper_profile();
    /// Laptop-scale: 64x64 frames, D = (64, 32, 16, 8), batch 32, narrower network.
    static RunConfig desk_profile();
    static RunConfig for_profile(const std::string& name);

    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Recursively overlays `patch` onto `base`. Keys absent from `base` are
/// rejected with ConfigError naming the dotted path.
void strict_merge(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

/// Applies "dotted.key=value" overrides; values parse as JSON, falling back to strings.
void apply_overrides(nlohmann::json& config, const std::vector<std::string>& assignments);

/// Builds a RunConfig from an optional file plus overrides. The file's
/// "profile" key (default "desk") selects the defaults it is merged onto.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig run_config_from_json(const nlohmann::json& user, const std::vector<std::string>& overrides = {});

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace fgfd
