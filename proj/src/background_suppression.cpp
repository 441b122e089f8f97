#include "fgfd/background_suppression.hpp"

#include "fgfd/diagnostics.hpp"

namespace fgfd {

namespace F = torch::nn::functional;

BlockClassifierImpl::BlockClassifierImpl(int64_t in_features, int64_t num_classes, std::optional<double> bias_init) {
    linear = register_module("linear", torch::nn::Linear(in_features, num_classes));
    if (bias_init) {
        torch::NoGradGuard guard;
        linear->bias.fill_(*bias_init);
    }
}

torch::Tensor BlockClassifierImpl::classify_map(const torch::Tensor& fmap) {
    if (fmap.dim() != 4 || fmap.size(1) != in_features())
        throw ShapeError("classifier expects " + std::to_string(in_features()) + " channels, got " +
                         (fmap.dim() == 4 ? std::to_string(fmap.size(1)) : "a non 4-D tensor"));
    auto logits = torch::einsum("bchw,kc->bkhw", {fmap, linear->weight});
    return logits + linear->bias.view({1, -1, 1, 1});
}

torch::Tensor BlockClassifierImpl::classify_pooled(const torch::Tensor& fmap) {
    if (fmap.dim() != 4 || fmap.size(1) != in_features())
        throw ShapeError("classifier expects " + std::to_string(in_features()) + " channels");
    return linear->forward(fmap.mean({2, 3}));
}

void SelectorConfig::validate() const {
    if (counts.empty()) throw ConfigError("selector: counts must not be empty");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] <= 0) throw ConfigError("selector: counts must be >= 1");
        if (i > 0 && counts[i] >= counts[i - 1])
            throw ConfigError("selector: counts must be strictly decreasing with block index");
    }
}

void to_json(nlohmann::json& j, const SelectorConfig& cfg) { j = {{"counts", cfg.counts}}; }

void from_json(const nlohmann::json& j, SelectorConfig& cfg) { cfg.counts = j.at("counts").get<std::vector<int64_t>>(); }

void to_json(nlohmann::json& j, const BsLossWeights& w) {
    j = {{"merged", w.merged}, {"dropped", w.dropped}, {"layer", w.layer}};
}

void from_json(const nlohmann::json& j, BsLossWeights& w) {
    w.merged = j.at("merged").get<double>();
    w.dropped = j.at("dropped").get<double>();
    w.layer = j.at("layer").get<double>();
}

void LabelBatch::validate() const {
    if (!labels.defined() || labels.dim() != 1) throw ShapeError("labels must be a 1-D tensor");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (labels.numel() > 0 && (labels.min().item<int64_t>() < 0 || labels.max().item<int64_t>() >= num_classes))
        throw ShapeError("label id outside [0, num_classes)");
}

torch::Tensor SelectionOutcome::all_tokens() const {
    std::vector<torch::Tensor> parts;
    for (const auto& b : blocks) parts.push_back(b.tokens);
    return torch::cat(parts, 1);
}

std::vector<torch::Tensor> SelectionOutcome::dropped_maps() const {
    std::vector<torch::Tensor> out;
    for (const auto& b : blocks) out.push_back(b.dropped_logits);
    return out;
}

std::vector<ClassificationMap> classify_blocks(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers) {
    fused.validate();
    if (classifiers.size() != fused.size())
        throw ShapeError("need one classifier per fused block");
    std::vector<ClassificationMap> out;
    for (std::size_t i = 0; i < fused.size(); ++i)
        out.push_back({classifiers[i]->classify_map(fused[i]), static_cast<int>(i)});
    return out;
}

torch::Tensor max_score_map(const ClassificationMap& cmap) {
    return std::get<0>(torch::softmax(cmap.logits, 1).max(1));
}

TopDSplit select_top_d(const ClassificationMap& cmap, const torch::Tensor& scores, int64_t count) {
    if (count <= 0) throw ConfigError("selection count must be >= 1 (got " + std::to_string(count) + ")");
    if (scores.dim() != 3) throw ShapeError("score map must be (B, H, W)");
    if (cmap.logits.defined() &&
        (cmap.logits.size(0) != scores.size(0) || cmap.logits.size(2) != scores.size(1) ||
         cmap.logits.size(3) != scores.size(2)))
        throw ShapeError("score map does not match the classification map");
    const auto batch = scores.size(0);
    const auto locations = scores.size(1) * scores.size(2);
    TopDSplit split;
    int64_t k = count;
    if (k > locations) {
        warn("block " + std::to_string(cmap.block_index) + ": selection count " + std::to_string(count) +
             " exceeds " + std::to_string(locations) + " locations; clamped");
        k = locations;
        split.clamped = true;
    }
    // Stable descending sort keeps equal scores in ascending index order.
    auto order = std::get<1>(torch::sort(scores.detach().reshape({batch, locations}), /*stable=*/true, 1,
                                         /*descending=*/true));
    split.selected = order.narrow(1, 0, k);
    split.dropped = order.narrow(1, k, locations - k);
    return split;
}

torch::Tensor gather_locations(const torch::Tensor& map, const torch::Tensor& indices) {
    const auto b = map.size(0);
    const auto c = map.size(1);
    auto flat = map.reshape({b, c, -1}).transpose(1, 2); // (B, HW, C)
    auto idx = indices.unsqueeze(-1).expand({b, indices.size(1), c});
    return flat.gather(1, idx);
}

GraphCombinerImpl::GraphCombinerImpl(int64_t token_dim, int64_t embed_dim, int64_t num_classes) {
    graph_weight = register_parameter("graph_weight", torch::empty({token_dim, token_dim}));
    torch::nn::init::xavier_uniform_(graph_weight, 0.5);
    projection = register_module("projection", torch::nn::Linear(token_dim, embed_dim));
    head = register_module("head", torch::nn::Linear(embed_dim, num_classes));
}

torch::Tensor GraphCombinerImpl::adjacency(const torch::Tensor& tokens) {
    return torch::softmax(torch::bmm(tokens, tokens.transpose(1, 2)), -1);
}

CombinerOutput GraphCombinerImpl::forward(const torch::Tensor& tokens) {
    if (tokens.dim() != 3 || tokens.size(1) == 0) throw SelectionError("combiner needs at least one token");
    if (tokens.size(2) != graph_weight.size(0))
        throw ShapeError("combiner token width mismatch");
    auto a = adjacency(tokens);
    auto mixed = torch::relu(torch::matmul(torch::bmm(a, tokens), graph_weight)) + tokens;
    auto embedding = projection->forward(mixed.mean(1));
    return {head->forward(embedding), embedding};
}

CombinerOutput combine_selected(GraphCombiner& combiner, std::span<const BlockSelection> blocks) {
    std::vector<torch::Tensor> parts;
    for (const auto& b : blocks)
        if (b.tokens.defined() && b.tokens.size(1) > 0) parts.push_back(b.tokens);
    if (parts.empty()) throw SelectionError("no selected tokens to combine");
    return combiner->forward(torch::cat(parts, 1));
}

SelectionOutcome run_selection(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers,
                               const SelectorConfig& cfg, GraphCombiner& combiner,
                               std::vector<ClassificationMap>* maps_out) {
    cfg.validate();
    if (cfg.counts.size() != fused.size())
        throw ConfigError("selector: need one count per fused block (" + std::to_string(fused.size()) + ")");
    auto maps = classify_blocks(fused, classifiers);
    SelectionOutcome outcome;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        BlockSelection sel;
        sel.block_index = static_cast<int>(i);
        sel.split = select_top_d(maps[i], max_score_map(maps[i]), cfg.counts[i]);
        sel.tokens = gather_locations(fused[i], sel.split.selected);
        sel.selected_logits = gather_locations(maps[i].logits, sel.split.selected);
        sel.dropped_logits = gather_locations(maps[i].logits, sel.split.dropped);
        outcome.blocks.push_back(std::move(sel));
    }
    auto merged = combine_selected(combiner, outcome.blocks);
    outcome.merged_logits = merged.logits;
    outcome.embedding = merged.embedding;
    if (maps_out) *maps_out = std::move(maps);
    return outcome;
}

torch::Tensor merged_loss(const torch::Tensor& merged_logits, const LabelBatch& labels) {
    labels.validate();
    if (merged_logits.dim() != 2 || merged_logits.size(0) != labels.labels.size(0) ||
        merged_logits.size(1) != labels.num_classes)
        throw ShapeError("merged logits must be (B, num_classes) matching the labels");
    return F::cross_entropy(merged_logits, labels.labels);
}

torch::Tensor dropped_loss(const torch::Tensor& dropped_logits, DroppedReduction reduction) {
    if (dropped_logits.dim() != 3) throw ShapeError("dropped logits must be (B, N, num_classes)");
    if (dropped_logits.size(1) == 0) {
        warn("dropped loss: no dropped locations; loss is 0");
        return torch::zeros({}, dropped_logits.options());
    }
    auto per_location = (torch::tanh(dropped_logits) + 1.0).pow(2).sum(-1); // (B, N)
    if (reduction == DroppedReduction::literal_sum) return per_location.sum(1).mean();
    return per_location.mean();
}

torch::Tensor dropped_loss(std::span<const torch::Tensor> dropped_maps, DroppedReduction reduction) {
    std::vector<torch::Tensor> terms;
    torch::TensorOptions opts;
    for (const auto& yd : dropped_maps) {
        if (yd.dim() != 3) throw ShapeError("dropped logits must be (B, N, num_classes)");
        opts = yd.options();
        if (yd.size(1) > 0) terms.push_back(dropped_loss(yd, reduction));
    }
    if (terms.empty()) {
        warn("dropped loss: every location was selected; loss is 0");
        return torch::zeros({}, opts);
    }
    return torch::stack(terms).mean();
}

torch::Tensor layer_loss(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers,
                         const LabelBatch& labels) {
    fused.validate();
    labels.validate();
    if (classifiers.size() != fused.size()) throw ShapeError("need one classifier per fused block");
    std::vector<torch::Tensor> pooled;
    for (std::size_t i = 0; i < fused.size(); ++i) pooled.push_back(classifiers[i]->classify_pooled(fused[i]));
    return layer_loss_from_pooled(pooled, labels);
}

torch::Tensor layer_loss_from_pooled(std::span<const torch::Tensor> pooled_logits, const LabelBatch& labels) {
    labels.validate();
    if (pooled_logits.empty()) throw ShapeError("layer loss: no blocks");
    torch::Tensor total;
    for (const auto& logits : pooled_logits) {
        if (logits.dim() != 2 || logits.size(0) != labels.labels.size(0) || logits.size(1) != labels.num_classes)
            throw ShapeError("layer loss: pooled logits must be (B, num_classes)");
        auto term = F::cross_entropy(logits, labels.labels);
        total = total.defined() ? total + term : term;
    }
    return total;
}

} // namespace fgfd
