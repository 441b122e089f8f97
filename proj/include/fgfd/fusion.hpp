#pragma once

#include "fgfd/backbone.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

namespace fgfd {

struct FusionConfig {
    int64_t common_dim = 64;

    void validate() const;
};

void to_json(nlohmann::json& j, const FusionConfig& cfg);
void from_json(const nlohmann::json& j, FusionConfig& cfg);

enum class FusionDirection { top_down, bottom_up };

/// One pass of the path-aggregation neck.
///
/// Every block i gets a lateral 1x1 projection to `common_dim`. The running
/// output of the neighbouring block (i+1 for top-down, i-1 for bottom-up) is
/// resampled to block i's grid and passed through a cross-path convolution:
/// nearest upsampling followed by a 1x1 conv top-down, a 3x3 conv with the
/// block's stride bottom-up. The two terms are added and smoothed by a 3x3
/// conv. The first block visited has no incoming term.
class FusionPathImpl : public torch::nn::Module {
public:
    /// `strides[i]` is the spatial ratio between block i-1 and block i.
    FusionPathImpl(FusionDirection direction, std::vector<int64_t> in_channels, std::vector<int64_t> strides,
                   FusionConfig cfg);

    FeatureMapSet forward(const FeatureMapSet& features);

    FusionDirection direction() const { return direction_; }
    std::size_t blocks() const { return lateral.size(); }

    std::vector<torch::nn::Conv2d> lateral;
    // cross[i] feeds block i; the entry for the first visited block is empty.
    std::vector<torch::nn::Conv2d> cross;
    std::vector<torch::nn::Conv2d> smooth;

private:
    FusionDirection direction_;
    FusionConfig cfg_;
};
TORCH_MODULE(FusionPath);

/// Top-down pass over backbone features followed by a bottom-up pass over
/// the top-down outputs.
class PathAggregationNeckImpl : public torch::nn::Module {
public:
    PathAggregationNeckImpl(const BackboneSpec& backbone, FusionConfig cfg);

    std::pair<FeatureMapSet, FeatureMapSet> forward(const FeatureMapSet& features);

    FusionPath top_down{nullptr};
    FusionPath bottom_up{nullptr};
};
TORCH_MODULE(PathAggregationNeck);

FeatureMapSet top_down_fuse(FusionPath& path, const FeatureMapSet& features);
FeatureMapSet bottom_up_fuse(FusionPath& path, const FeatureMapSet& features);

} // namespace fgfd
