#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <utility>

namespace fgfd {

struct HybridConfig {
    std::pair<int64_t, int64_t> branch_embed_dims{128, 128};
    int64_t fc_width = 1024;
    int64_t num_classes = 2;

    void validate() const;
    int64_t input_width() const { return branch_embed_dims.first + branch_embed_dims.second; }
};

void to_json(nlohmann::json& j, const HybridConfig& cfg);
void from_json(const nlohmann::json& j, HybridConfig& cfg);

/// Branch a first. An undefined or zero-width `b` yields `a` unchanged.
torch::Tensor concat_features(const torch::Tensor& a, const torch::Tensor& b);

/// BatchNorm -> FC(fc_width) -> ReLU -> FC(num_classes).
class HybridHeadImpl : public torch::nn::Module {
public:
    explicit HybridHeadImpl(HybridConfig cfg);

    torch::Tensor forward(const torch::Tensor& features);

    const HybridConfig& config() const { return cfg_; }

    torch::nn::BatchNorm1d norm{nullptr};
    torch::nn::Linear hidden{nullptr};
    torch::nn::Linear output{nullptr};

private:
    HybridConfig cfg_;
};
TORCH_MODULE(HybridHead);

torch::Tensor head_forward(HybridHead& head, const torch::Tensor& features);

} // namespace fgfd
