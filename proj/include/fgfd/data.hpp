#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fgfd {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// Manipulation tag used for pristine frames.
inline constexpr const char* kRealFamily = "original";

struct FrameRecord {
    std::string frame_path; // relative to the manifest directory unless absolute
    int label = 0;          // 0 real, 1 fake
    std::string video_id;
    Split split = Split::train;
    std::string manipulation;

    bool operator==(const FrameRecord&) const = default;
};

struct DatasetManifest {
    std::vector<FrameRecord> records;
    std::filesystem::path root; // directory relative paths resolve against

    std::filesystem::path resolve(const FrameRecord& r) const;
    /// Throws ValidationError on duplicate paths or videos with mixed label/split.
    void validate() const;
};

inline constexpr const char* kManifestHeader = "frame_path,label,video_id,split,manipulation";

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = false);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct FrameCounts {
    int64_t train = 270;
    int64_t val = 150;
    int64_t test = 150;

    int64_t for_split(Split s) const;
};

void to_json(nlohmann::json& j, const FrameCounts& c);
void from_json(const nlohmann::json& j, FrameCounts& c);

/// Per video, up to `counts` frames at uniform stride with a seed-derived
/// phase. Videos with fewer frames keep all of them (one summary warning).
DatasetManifest sample_frames(const DatasetManifest& manifest, const FrameCounts& counts, uint64_t seed);

struct PreprocessConfig {
    int64_t size = 64;
    std::array<double, 3> mean{0.485, 0.456, 0.406};
    std::array<double, 3> std{0.229, 0.224, 0.225};
};

void to_json(nlohmann::json& j, const PreprocessConfig& c);
void from_json(const nlohmann::json& j, PreprocessConfig& c);

/// Decodes, bilinearly resizes to size x size (skipped when already that
/// size), scales to [0,1] and standardizes per RGB channel. Returns (3, S, S) float.
torch::Tensor preprocess(const std::filesystem::path& image_path, const PreprocessConfig& cfg);

/// Inverse of the standardization, for visualization: (3,S,S) -> 8-bit RGB values in a (S,S,3) uint8 tensor.
torch::Tensor denormalize(const torch::Tensor& image, const PreprocessConfig& cfg);

struct FrameDataset {
    torch::Tensor images; // (N, 3, S, S) float
    torch::Tensor labels; // (N) int64
    std::vector<FrameRecord> records;

    int64_t size() const { return images.defined() ? images.size(0) : 0; }
    bool has_both_classes() const;
};

/// Selects a split, optionally restricted to real frames plus the listed
/// manipulation families, and loads the frames into memory.
FrameDataset load_split(const DatasetManifest& manifest, Split split, const std::vector<std::string>& families,
                        const PreprocessConfig& cfg);

} // namespace fgfd
