#include "fgfd/fusion.hpp"

#include "fgfd/errors.hpp"

namespace fgfd {

namespace F = torch::nn::functional;

void FusionConfig::validate() const {
    if (common_dim <= 0) throw ConfigError("fusion: common_dim must be > 0");
}

void to_json(nlohmann::json& j, const FusionConfig& cfg) { j = {{"common_dim", cfg.common_dim}}; }

void from_json(const nlohmann::json& j, FusionConfig& cfg) { cfg.common_dim = j.at("common_dim").get<int64_t>(); }

FusionPathImpl::FusionPathImpl(FusionDirection direction, std::vector<int64_t> in_channels,
                               std::vector<int64_t> strides, FusionConfig cfg)
    : direction_(direction), cfg_(cfg) {
    using namespace torch::nn;
    cfg_.validate();
    if (in_channels.size() < 2 || strides.size() != in_channels.size())
        throw ConfigError("fusion: need >= 2 blocks with matching stride list");
    const auto n = in_channels.size();
    const auto d = cfg_.common_dim;
    const std::string tag = direction == FusionDirection::top_down ? "td" : "bu";
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = std::to_string(i + 1);
        lateral.push_back(register_module(tag + "_lateral" + id, Conv2d(Conv2dOptions(in_channels[i], d, 1))));
        const bool first_visited = direction == FusionDirection::top_down ? i == n - 1 : i == 0;
        if (first_visited) {
            cross.emplace_back(nullptr);
        } else if (direction == FusionDirection::top_down) {
            cross.push_back(register_module(tag + "_cross" + id, Conv2d(Conv2dOptions(d, d, 1))));
        } else {
            cross.push_back(register_module(tag + "_cross" + id,
                                            Conv2d(Conv2dOptions(d, d, 3).stride(strides[i]).padding(1))));
        }
        smooth.push_back(register_module(tag + "_smooth" + id, Conv2d(Conv2dOptions(d, d, 3).padding(1))));
    }
}

FeatureMapSet FusionPathImpl::forward(const FeatureMapSet& features) {
    features.validate();
    const auto n = lateral.size();
    if (features.size() != n)
        throw ShapeError("fusion: expected " + std::to_string(n) + " maps, got " + std::to_string(features.size()));
    FeatureMapSet out;
    out.maps.resize(n);
    auto fuse = [&](std::size_t i, const torch::Tensor& incoming) {
        auto inner = lateral[i]->forward(features[i]);
        if (incoming.defined()) {
            torch::Tensor resampled;
            if (direction_ == FusionDirection::top_down) {
                auto up = F::interpolate(incoming, F::InterpolateFuncOptions()
                                                       .size(std::vector<int64_t>{inner.size(2), inner.size(3)})
                                                       .mode(torch::kNearest));
                resampled = cross[i]->forward(up);
            } else {
                resampled = cross[i]->forward(incoming);
            }
            if (resampled.sizes() != inner.sizes())
                throw ShapeError("fusion: block " + std::to_string(i) + " resampled size does not match lateral");
            inner = inner + resampled;
        }
        out.maps[i] = smooth[i]->forward(inner);
    };
    if (direction_ == FusionDirection::top_down) {
        torch::Tensor carry;
        for (std::size_t k = n; k-- > 0;) {
            fuse(k, carry);
            carry = out.maps[k];
        }
    } else {
        torch::Tensor carry;
        for (std::size_t k = 0; k < n; ++k) {
            fuse(k, carry);
            carry = out.maps[k];
        }
    }
    return out;
}

PathAggregationNeckImpl::PathAggregationNeckImpl(const BackboneSpec& backbone, FusionConfig cfg) {
    backbone.validate();
    top_down = register_module(
        "top_down", FusionPath(FusionDirection::top_down, backbone.channels, backbone.strides, cfg));
    bottom_up = register_module(
        "bottom_up", FusionPath(FusionDirection::bottom_up,
                                std::vector<int64_t>(backbone.channels.size(), cfg.common_dim), backbone.strides,
                                cfg));
}

std::pair<FeatureMapSet, FeatureMapSet> PathAggregationNeckImpl::forward(const FeatureMapSet& features) {
    auto td = top_down->forward(features);
    auto bu = bottom_up->forward(td);
    return {std::move(td), std::move(bu)};
}

FeatureMapSet top_down_fuse(FusionPath& path, const FeatureMapSet& features) {
    if (path->direction() != FusionDirection::top_down) throw ConfigError("top_down_fuse needs a top-down path");
    return path->forward(features);
}

FeatureMapSet bottom_up_fuse(FusionPath& path, const FeatureMapSet& features) {
    if (path->direction() != FusionDirection::bottom_up) throw ConfigError("bottom_up_fuse needs a bottom-up path");
    return path->forward(features);
}

} // namespace fgfd
