#include "fgfd/hybrid_head.hpp"

#include "fgfd/errors.hpp"

namespace fgfd {

void HybridConfig::validate() const {
    if (branch_embed_dims.first <= 0 || branch_embed_dims.second < 0 || fc_width <= 0 || num_classes < 2)
        throw ConfigError("hybrid head: widths must be positive and num_classes >= 2");
}

void to_json(nlohmann::json& j, const HybridConfig& cfg) {
    j = {{"branch_embed_dims", {cfg.branch_embed_dims.first, cfg.branch_embed_dims.second}},
         {"fc_width", cfg.fc_width},
         {"num_classes", cfg.num_classes}};
}

void from_json(const nlohmann::json& j, HybridConfig& cfg) {
    auto dims = j.at("branch_embed_dims").get<std::vector<int64_t>>();
    if (dims.size() != 2) throw ConfigError("hybrid head: branch_embed_dims needs two entries");
    cfg.branch_embed_dims = {dims[0], dims[1]};
    cfg.fc_width = j.at("fc_width").get<int64_t>();
    cfg.num_classes = j.at("num_classes").get<int64_t>();
}

torch::Tensor concat_features(const torch::Tensor& a, const torch::Tensor& b) {
    if (!b.defined() || b.numel() == 0) return a;
    if (a.dim() != 2 || b.dim() != 2 || a.size(0) != b.size(0))
        throw ShapeError("concat_features: branch embeddings must be (B, E) with equal batch sizes");
    return torch::cat({a, b}, 1);
}

HybridHeadImpl::HybridHeadImpl(HybridConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    norm = register_module("norm", torch::nn::BatchNorm1d(cfg_.input_width()));
    hidden = register_module("hidden", torch::nn::Linear(cfg_.input_width(), cfg_.fc_width));
    output = register_module("output", torch::nn::Linear(cfg_.fc_width, cfg_.num_classes));
}

torch::Tensor HybridHeadImpl::forward(const torch::Tensor& features) {
    if (features.dim() != 2 || features.size(1) != cfg_.input_width())
        throw ShapeError("hybrid head expects width " + std::to_string(cfg_.input_width()));
    return output->forward(torch::relu(hidden->forward(norm->forward(features))));
}

torch::Tensor head_forward(HybridHead& head, const torch::Tensor& features) { return head->forward(features); }

} // namespace fgfd
