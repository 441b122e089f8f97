#include "fgfd/model.hpp"

#include "fgfd/errors.hpp"

#include <cmath>

namespace fgfd {

namespace F = torch::nn::functional;

void ModelConfig::validate() const {
    if (branches.empty() || branches.size() > 2) throw ConfigError("model: need one or two branches");
    for (const auto& b : branches) {
        b.validate();
        if (b.n_blocks != branches.front().n_blocks)
            throw ConfigError("model: hybrid branches must have the same number of blocks");
        if (selector.counts.size() != static_cast<std::size_t>(b.n_blocks))
            throw ConfigError("model: selector needs one count per block");
    }
    fusion.validate();
    selector.validate();
    if (embed_dim <= 0) throw ConfigError("model: embed_dim must be > 0");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (fc_width <= 0) throw ConfigError("model: fc_width must be > 0");
    if (!std::isfinite(classifier_bias_init)) throw ConfigError("model: classifier_bias_init must be finite");
}

void to_json(nlohmann::json& j, const ModuleToggles& t) { j = {{"bs", t.bs}, {"refinement", t.refinement}}; }

void from_json(const nlohmann::json& j, ModuleToggles& t) {
    t.bs = j.at("bs").get<bool>();
    t.refinement = j.at("refinement").get<bool>();
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = {{"branches", cfg.branches},   {"fusion", cfg.fusion},     {"selector", cfg.selector},
         {"embed_dim", cfg.embed_dim}, {"num_classes", cfg.num_classes}, {"fc_width", cfg.fc_width},
         {"classifier_bias_init", cfg.classifier_bias_init},
         {"toggles", cfg.toggles},     {"freeze_branches", cfg.freeze_branches}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    cfg.branches = j.at("branches").get<std::vector<BackboneSpec>>();
    cfg.fusion = j.at("fusion").get<FusionConfig>();
    cfg.selector = j.at("selector").get<SelectorConfig>();
    cfg.embed_dim = j.at("embed_dim").get<int64_t>();
    cfg.num_classes = j.at("num_classes").get<int64_t>();
    cfg.fc_width = j.at("fc_width").get<int64_t>();
    cfg.classifier_bias_init = j.at("classifier_bias_init").get<double>();
    cfg.toggles = j.at("toggles").get<ModuleToggles>();
    cfg.freeze_branches = j.at("freeze_branches").get<bool>();
}

void to_json(nlohmann::json& j, const LossConfig& cfg) {
    j = {{"bs", cfg.bs},
         {"refinement_weight", cfg.total.refinement},
         {"dropped_reduction", cfg.dropped_reduction == DroppedReduction::mean ? "mean" : "literal_sum"},
         {"detach_teacher", cfg.detach_teacher}};
}

void from_json(const nlohmann::json& j, LossConfig& cfg) {
    cfg.bs = j.at("bs").get<BsLossWeights>();
    cfg.total.refinement = j.at("refinement_weight").get<double>();
    const auto red = j.at("dropped_reduction").get<std::string>();
    if (red == "mean")
        cfg.dropped_reduction = DroppedReduction::mean;
    else if (red == "literal_sum")
        cfg.dropped_reduction = DroppedReduction::literal_sum;
    else
        throw ConfigError("loss: unknown dropped_reduction '" + red + "'");
    cfg.detach_teacher = j.at("detach_teacher").get<bool>();
    if (cfg.bs.merged < 0 || cfg.bs.dropped < 0 || cfg.bs.layer < 0 || cfg.total.refinement < 0)
        throw ConfigError("loss: weights must be nonnegative");
}

BranchNetworkImpl::BranchNetworkImpl(const BackboneSpec& spec, const ModelConfig& cfg) : cfg_(cfg) {
    backbone = register_module("backbone", ReferenceBackbone(spec));
    neck = register_module("neck", PathAggregationNeck(spec, cfg.fusion));
    for (int i = 0; i < spec.n_blocks; ++i) {
        const auto id = std::to_string(i + 1);
        classifiers.push_back(register_module("classifier" + id, BlockClassifier(cfg.fusion.common_dim, cfg.num_classes, cfg.classifier_bias_init)));
        student_classifiers.push_back(
            register_module("student" + id, BlockClassifier(cfg.fusion.common_dim, cfg.num_classes)));
    }
    combiner = register_module("combiner", GraphCombiner(cfg.fusion.common_dim, cfg.embed_dim, cfg.num_classes));
}

BranchOutputs BranchNetworkImpl::forward(const torch::Tensor& images) {
    BranchOutputs out;
    out.features = backbone->forward(images);
    std::tie(out.top_down, out.bottom_up) = neck->forward(out.features);
    const auto n = out.bottom_up.size();
    if (cfg_.toggles.bs) {
        out.selection = run_selection(out.bottom_up, classifiers, cfg_.selector, combiner, &out.class_maps);
        out.logits = out.selection->merged_logits;
        out.embedding = out.selection->embedding;
    } else {
        out.logits = classifiers.back()->classify_pooled(out.bottom_up.maps.back());
        out.embedding = out.bottom_up.maps.back().mean({2, 3});
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.layer_logits.push_back(classifiers[i]->classify_pooled(out.bottom_up[i]));
        out.pairs.push_back({static_cast<int>(i), student_classifiers[i]->classify_pooled(out.top_down[i]),
                             out.layer_logits.back()});
    }
    return out;
}

DetectorImpl::DetectorImpl(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t b = 0; b < cfg_.branches.size(); ++b)
        branches.push_back(register_module("branch" + std::to_string(b + 1), BranchNetwork(cfg_.branches[b], cfg_)));
    if (cfg_.hybrid()) {
        HybridConfig hc;
        hc.branch_embed_dims = {cfg_.branch_embed_dim(), cfg_.branch_embed_dim()};
        hc.fc_width = cfg_.fc_width;
        hc.num_classes = cfg_.num_classes;
        head = register_module("head", HybridHead(hc));
    }
}

DetectorOutputs DetectorImpl::forward(const torch::Tensor& images) {
    DetectorOutputs out;
    for (auto& b : branches) out.branches.push_back(b->forward(images));
    if (cfg_.hybrid()) {
        auto a = out.branches[0].embedding;
        auto b = out.branches[1].embedding;
        if (cfg_.freeze_branches) {
            a = a.detach();
            b = b.detach();
        }
        out.logits = head->forward(concat_features(a, b));
    } else {
        out.logits = out.branches[0].logits;
    }
    return out;
}

torch::Tensor DetectorImpl::fake_scores(const torch::Tensor& images) {
    return torch::softmax(forward(images).logits, 1).select(1, 1);
}

Detector build_detector(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    torch::manual_seed(seed);
    return Detector(cfg);
}

LossTerms compute_losses(const DetectorOutputs& outputs, const torch::Tensor& labels, const ModelConfig& model,
                         const LossConfig& cfg, double temperature) {
    const LabelBatch batch{labels, model.num_classes};
    batch.validate();
    const auto opts = outputs.logits.options();
    auto zero = [&] { return torch::zeros({}, opts); };
    LossTerms t{zero(), zero(), zero(), {}, zero(), zero(), {}};
    const bool branch_losses = !(model.hybrid() && model.freeze_branches);
    if (branch_losses) {
        for (const auto& b : outputs.branches) {
            if (model.toggles.bs) {
                t.merged = t.merged + merged_loss(b.selection->merged_logits, batch);
                const auto dropped = b.selection->dropped_maps();
                t.dropped = t.dropped + dropped_loss(dropped, cfg.dropped_reduction);
                t.layer = t.layer + layer_loss_from_pooled(b.layer_logits, batch);
            } else {
                t.merged = t.merged + F::cross_entropy(b.logits, labels);
            }
            if (model.toggles.refinement) t.refinement = t.refinement + refinement_loss(b.pairs, temperature, cfg.detach_teacher);
        }
    }
    t.bs = bs_total_loss(t.merged, t.dropped, t.layer, cfg.bs);
    if (model.hybrid()) t.head = F::cross_entropy(outputs.logits, labels);
    t.total = total_loss(t.bs, t.refinement, cfg.total) + t.head;
    return t;
}

void cast_floating(torch::nn::Module& module, torch::Dtype dtype) {
    torch::NoGradGuard guard;
    for (auto& p : module.parameters())
        if (p.is_floating_point()) p.set_data(p.data().to(dtype));
    for (auto& b : module.buffers())
        if (b.is_floating_point()) b.set_data(b.to(dtype));
}

} // namespace fgfd
