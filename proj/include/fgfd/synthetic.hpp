#pragma once

// Procedural face-like frames with controllable local forgery artifacts.
// Every fake video is derived from a real video (same appearance, same
// frame jitter), and the artifact touches only a recorded rectangle.

#include "fgfd/data.hpp"

#include <opencv2/core.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fgfd {

struct SyntheticConfig {
    int num_videos_per_class = 10;
    int frames_per_video = 20;
    int image_size = 64;
    // A: local blur patch, B: blending-boundary seam, C: color-shift patch.
    std::vector<std::string> families{"A"};
    double artifact_region_size = 0.25; // side of the square region as a fraction of the image side
    double background_clutter_level = 0.5;
    double train_fraction = 0.7;
    double val_fraction = 0.15;
    uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

struct RegionAnnotation {
    std::string frame_path;
    std::string video_id;
    std::string family;
    cv::Rect rect;
};

void to_json(nlohmann::json& j, const RegionAnnotation& a);
void from_json(const nlohmann::json& j, RegionAnnotation& a);

struct SyntheticPair {
    cv::Mat real; // 8-bit BGR
    cv::Mat fake;
    cv::Rect region;
};

/// Renders frame `frame` of source video `video` with and without the artifact.
SyntheticPair render_pair(const SyntheticConfig& cfg, int video, int frame, const std::string& family);

struct SyntheticDataset {
    DatasetManifest manifest;
    std::vector<RegionAnnotation> annotations;
    std::filesystem::path manifest_path;
    std::filesystem::path annotations_path;
};

inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kAnnotationsFile = "regions.jsonl";

/// Writes frames/<video>/<frame>.png, manifest.csv and regions.jsonl under `out_dir`.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

std::vector<RegionAnnotation> load_annotations(const std::filesystem::path& path);

/// Digest of the manifest and every frame it lists, in manifest order.
std::string dataset_hash(const std::filesystem::path& manifest_path);

} // namespace fgfd
