#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

namespace fgfd {

/// Multi-scale activations, one volume (B, C_i, H_i, W_i) per block.
struct FeatureMapSet {
    std::vector<torch::Tensor> maps;

    std::size_t size() const { return maps.size(); }
    const torch::Tensor& operator[](std::size_t i) const { return maps[i]; }
    int64_t batch() const { return maps.empty() ? 0 : maps.front().size(0); }
    std::vector<int64_t> channels() const;

    /// Throws ShapeError unless every map is 4-D and shares the batch dimension.
    void validate() const;
};

struct BackboneSpec {
    int n_blocks = 4;
    std::vector<int64_t> channels{16, 32, 64, 128};
    std::vector<int64_t> strides{2, 2, 2, 2};
    bool trainable = true;

    /// Throws ConfigError naming the violated invariant.
    void validate() const;
    int64_t cumulative_stride() const;
};

void to_json(nlohmann::json& j, const BackboneSpec& spec);
void from_json(const nlohmann::json& j, BackboneSpec& spec);

// One pyramid stage: [conv3x3, BN, ReLU] x2, stride on the first conv.
class StageImpl : public torch::nn::Module {
public:
    StageImpl(int64_t in_channels, int64_t out_channels, int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::BatchNorm2d norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(Stage);

/// Tiny convolutional pyramid standing in for large pretrained backbones.
/// Any module producing a FeatureMapSet with the same contract can replace it.
class ReferenceBackboneImpl : public torch::nn::Module {
public:
    explicit ReferenceBackboneImpl(BackboneSpec spec);

    /// images: (B, 3, H, W). H and W must be divisible by the cumulative stride.
    FeatureMapSet forward(const torch::Tensor& images);

    const BackboneSpec& spec() const { return spec_; }
    Stage stage(std::size_t i) const { return stages_[i]; }

private:
    BackboneSpec spec_;
    std::vector<Stage> stages_;
};
TORCH_MODULE(ReferenceBackbone);

/// Builds a backbone with parameters drawn deterministically from `seed`.
ReferenceBackbone build_reference_backbone(const BackboneSpec& spec, uint64_t seed);

FeatureMapSet extract_features(ReferenceBackbone& backbone, const torch::Tensor& images);

/// Order-sensitive digest of every parameter and buffer of a module.
std::string parameter_checksum(const torch::nn::Module& module);

int64_t parameter_count(const torch::nn::Module& module);

/// Writes `<stem>.pt` plus a `<stem>.json` sidecar with spec, seed and parameter count.
void save_backbone(ReferenceBackbone& backbone, uint64_t seed, const std::filesystem::path& stem);
ReferenceBackbone load_backbone(const std::filesystem::path& stem);

} // namespace fgfd
