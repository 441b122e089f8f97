#include "fgfd/backbone.hpp"

#include "fgfd/errors.hpp"
#include "fgfd/hashing.hpp"

#include <fstream>
#include <sstream>

namespace fgfd {

std::vector<int64_t> FeatureMapSet::channels() const {
    std::vector<int64_t> out;
    for (const auto& m : maps) out.push_back(m.size(1));
    return out;
}

void FeatureMapSet::validate() const {
    if (maps.empty()) throw ShapeError("feature map set is empty");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].defined() || maps[i].dim() != 4)
            throw ShapeError("feature map " + std::to_string(i) + " must be (B, C, H, W)");
        if (maps[i].size(0) != maps.front().size(0))
            throw ShapeError("feature map " + std::to_string(i) + " has a different batch size");
    }
}

void BackboneSpec::validate() const {
    if (n_blocks < 2) throw ConfigError("backbone: n_blocks must be >= 2 (got " + std::to_string(n_blocks) + ")");
    if (channels.size() != static_cast<std::size_t>(n_blocks))
        throw ConfigError("backbone: channels must list exactly n_blocks entries");
    if (strides.size() != static_cast<std::size_t>(n_blocks))
        throw ConfigError("backbone: strides must list exactly n_blocks entries");
    for (auto c : channels)
        if (c <= 0) throw ConfigError("backbone: channels must be strictly positive");
    for (auto s : strides)
        if (s < 1) throw ConfigError("backbone: strides must be >= 1");
}

int64_t BackboneSpec::cumulative_stride() const {
    int64_t p = 1;
    for (auto s : strides) p *= s;
    return p;
}

void to_json(nlohmann::json& j, const BackboneSpec& spec) {
    j = {{"n_blocks", spec.n_blocks},
         {"channels", spec.channels},
         {"strides", spec.strides},
         {"trainable", spec.trainable}};
}

void from_json(const nlohmann::json& j, BackboneSpec& spec) {
    spec.n_blocks = j.at("n_blocks").get<int>();
    spec.channels = j.at("channels").get<std::vector<int64_t>>();
    spec.strides = j.at("strides").get<std::vector<int64_t>>();
    spec.trainable = j.value("trainable", true);
}

StageImpl::StageImpl(int64_t in_channels, int64_t out_channels, int64_t stride) {
    using namespace torch::nn;
    conv1 = register_module("conv1", Conv2d(Conv2dOptions(in_channels, out_channels, 3).stride(stride).padding(1).bias(false)));
    norm1 = register_module("norm1", BatchNorm2d(out_channels));
    conv2 = register_module("conv2", Conv2d(Conv2dOptions(out_channels, out_channels, 3).padding(1).bias(false)));
    norm2 = register_module("norm2", BatchNorm2d(out_channels));
}

torch::Tensor StageImpl::forward(const torch::Tensor& x) {
    auto h = torch::relu(norm1(conv1(x)));
    return torch::relu(norm2(conv2(h)));
}

ReferenceBackboneImpl::ReferenceBackboneImpl(BackboneSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    int64_t in = 3;
    for (int i = 0; i < spec_.n_blocks; ++i) {
        stages_.push_back(register_module("stage" + std::to_string(i + 1),
                                          Stage(in, spec_.channels[i], spec_.strides[i])));
        in = spec_.channels[i];
    }
    if (!spec_.trainable)
        for (auto& p : parameters()) p.set_requires_grad(false);
}

FeatureMapSet ReferenceBackboneImpl::forward(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("backbone input must be (B, 3, H, W)");
    if (images.size(0) == 0) throw EmptyBatchError();
    const auto stride = spec_.cumulative_stride();
    if (images.size(2) % stride != 0 || images.size(3) % stride != 0)
        throw ShapeError("input " + std::to_string(images.size(2)) + "x" + std::to_string(images.size(3)) +
                         " is not divisible by the cumulative stride " + std::to_string(stride));
    FeatureMapSet out;
    auto x = images;
    for (auto& stage : stages_) {
        x = stage->forward(x);
        out.maps.push_back(x);
    }
    return out;
}

ReferenceBackbone build_reference_backbone(const BackboneSpec& spec, uint64_t seed) {
    spec.validate();
    torch::manual_seed(seed);
    return ReferenceBackbone(spec);
}

FeatureMapSet extract_features(ReferenceBackbone& backbone, const torch::Tensor& images) {
    return backbone->forward(images);
}

std::string parameter_checksum(const torch::nn::Module& module) {
    Sha256 sha;
    auto feed = [&](const std::string& name, const torch::Tensor& t) {
        auto c = t.detach().contiguous().cpu();
        sha.update(name);
        sha.update(std::as_bytes(std::span(static_cast<const char*>(c.data_ptr()), c.nbytes())));
    };
    for (const auto& item : module.named_parameters()) feed(item.key(), item.value());
    for (const auto& item : module.named_buffers()) feed(item.key(), item.value());
    return sha.hex_digest();
}

int64_t parameter_count(const torch::nn::Module& module) {
    int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

void save_backbone(ReferenceBackbone& backbone, uint64_t seed, const std::filesystem::path& stem) {
    auto blob = stem;
    blob += ".pt";
    auto meta_path = stem;
    meta_path += ".json";
    torch::serialize::OutputArchive archive;
    backbone->save(archive);
    archive.save_to(blob.string());
    nlohmann::json meta = {{"spec", backbone->spec()},
                           {"seed", seed},
                           {"parameter_count", parameter_count(*backbone)}};
    std::ofstream(meta_path) << meta.dump(2) << '\n';
}

ReferenceBackbone load_backbone(const std::filesystem::path& stem) {
    auto blob = stem;
    blob += ".pt";
    auto meta_path = stem;
    meta_path += ".json";
    std::ifstream in(meta_path);
    if (!in) throw CheckpointError("missing backbone metadata " + meta_path.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
        auto spec = meta.at("spec").get<BackboneSpec>();
        auto backbone = build_reference_backbone(spec, meta.at("seed").get<uint64_t>());
        if (parameter_count(*backbone) != meta.at("parameter_count").get<int64_t>())
            throw CheckpointError("backbone parameter count mismatch");
        torch::serialize::InputArchive archive;
        archive.load_from(blob.string());
        backbone->load(archive);
        return backbone;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed backbone metadata: ") + e.what());
    } catch (const c10::Error& e) {
        throw CheckpointError(std::string("cannot load backbone parameters: ") + e.what_without_backtrace());
    }
}

} // namespace fgfd
