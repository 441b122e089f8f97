#pragma once

// Background suppression: per-location block classifiers, max-score
// foreground selection, a graph-convolution combiner over the selected
// tokens, and the merged / dropped / layer losses that drive them.

#include "fgfd/backbone.hpp"
#include "fgfd/errors.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <type_traits>

namespace fgfd {

/// Affine classifier applied per location (maps) or after average pooling.
/// Both uses share the same weight and bias.
class BlockClassifierImpl : public torch::nn::Module {
public:
    /// `bias_init` (when given) replaces the default bias initialization by a constant.
    BlockClassifierImpl(int64_t in_features, int64_t num_classes, std::optional<double> bias_init = std::nullopt);

    /// (B, C, H, W) -> (B, num_classes, H, W)
    torch::Tensor classify_map(const torch::Tensor& fmap);
    /// (B, C, H, W) -> (B, num_classes) through spatial average pooling.
    torch::Tensor classify_pooled(const torch::Tensor& fmap);

    int64_t in_features() const { return linear->options.in_features(); }
    int64_t num_classes() const { return linear->options.out_features(); }

    torch::nn::Linear linear{nullptr};
};
TORCH_MODULE(BlockClassifier);

struct ClassificationMap {
    torch::Tensor logits; // (B, num_classes, H, W)
    int block_index = 0;
};

struct SelectorConfig {
    std::vector<int64_t> counts{256, 128, 64, 32};

    /// Counts must be >= 1 and strictly decreasing with block index.
    void validate() const;
};

void to_json(nlohmann::json& j, const SelectorConfig& cfg);
void from_json(const nlohmann::json& j, SelectorConfig& cfg);

struct LabelBatch {
    torch::Tensor labels; // (B) int64
    int64_t num_classes = 2;

    void validate() const;
};

struct BsLossWeights {
    double merged = 1.0;
    double dropped = 5.0;
    double layer = 0.3;
};

void to_json(nlohmann::json& j, const BsLossWeights& w);
void from_json(const nlohmann::json& j, BsLossWeights& w);

enum class DroppedReduction {
    mean,        // mean over batch and dropped locations, summed over classes
    literal_sum, // summed over classes and locations, mean over batch
};

/// Flattened spatial indices, (B, k) for the selected part and (B, HW - k)
/// for the rest. Selected entries are ordered by descending score.
struct TopDSplit {
    torch::Tensor selected;
    torch::Tensor dropped;
    bool clamped = false;
};

struct BlockSelection {
    int block_index = 0;
    TopDSplit split;
    torch::Tensor tokens;          // (B, k, C) fused features at selected locations
    torch::Tensor selected_logits; // (B, k, num_classes)
    torch::Tensor dropped_logits;  // (B, HW - k, num_classes), Y_d for this block
};

struct SelectionOutcome {
    std::vector<BlockSelection> blocks;
    torch::Tensor merged_logits; // Y_m, (B, num_classes)
    torch::Tensor embedding;     // (B, E)

    torch::Tensor all_tokens() const;
    std::vector<torch::Tensor> dropped_maps() const;
};

std::vector<ClassificationMap> classify_blocks(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers);

/// Per-location max of the softmaxed class logits, (B, H, W).
torch::Tensor max_score_map(const ClassificationMap& cmap);

/// Top-D locations by score. Ties resolve to the lower flattened index; D above
/// H*W is clamped with a warning.
TopDSplit select_top_d(const ClassificationMap& cmap, const torch::Tensor& scores, int64_t count);

/// Gathers (B, K, H, W) at flattened indices (B, k) into (B, k, K).
torch::Tensor gather_locations(const torch::Tensor& map, const torch::Tensor& indices);

struct CombinerOutput {
    torch::Tensor logits;    // (B, num_classes)
    torch::Tensor embedding; // (B, E)
};

/// Fully connected token graph with softmax-normalized dot-product adjacency,
/// one residual graph convolution X' = relu(A X W_g) + X, mean pooling, a
/// linear projection to the embedding and a linear class head.
class GraphCombinerImpl : public torch::nn::Module {
public:
    GraphCombinerImpl(int64_t token_dim, int64_t embed_dim, int64_t num_classes);

    /// tokens: (B, T, token_dim), T >= 1.
    CombinerOutput forward(const torch::Tensor& tokens);

    static torch::Tensor adjacency(const torch::Tensor& tokens);

    int64_t embed_dim() const { return projection->options.out_features(); }

    torch::Tensor graph_weight; // (token_dim, token_dim)
    torch::nn::Linear projection{nullptr};
    torch::nn::Linear head{nullptr};
};
TORCH_MODULE(GraphCombiner);

/// Classify every fused block, select the top-D foreground per block and
/// merge the selected tokens through the combiner.
SelectionOutcome run_selection(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers,
                               const SelectorConfig& cfg, GraphCombiner& combiner,
                               std::vector<ClassificationMap>* maps_out = nullptr);

CombinerOutput combine_selected(GraphCombiner& combiner, std::span<const BlockSelection> blocks);

/// Batch-mean cross-entropy of softmax(Y_m) against the labels.
torch::Tensor merged_loss(const torch::Tensor& merged_logits, const LabelBatch& labels);

/// Y_d: (B, N, num_classes). Pushes tanh(Y_d) toward -1.
torch::Tensor dropped_loss(const torch::Tensor& dropped_logits, DroppedReduction reduction = DroppedReduction::mean);

/// Average of the per-block dropped losses over blocks that have dropped
/// locations. Returns 0 with a warning when every location was selected.
torch::Tensor dropped_loss(std::span<const torch::Tensor> dropped_maps,
                           DroppedReduction reduction = DroppedReduction::mean);

/// Sum over blocks of the pooled-classifier cross-entropy, batch-mean.
torch::Tensor layer_loss(const FeatureMapSet& fused, std::span<BlockClassifier> classifiers,
                         const LabelBatch& labels);

/// Same reduction from already pooled per-block logits (B, num_classes).
torch::Tensor layer_loss_from_pooled(std::span<const torch::Tensor> pooled_logits, const LabelBatch& labels);

namespace detail {
inline double scalar_value(double v) { return v; }
inline double scalar_value(const torch::Tensor& t) { return t.item<double>(); }
} // namespace detail

/// lambda_m * merged + lambda_d * dropped + lambda_l * layer. Works on plain
/// doubles and on scalar tensors alike.
template <class Scalar>
Scalar bs_total_loss(const Scalar& merged, const Scalar& dropped, const Scalar& layer,
                     const BsLossWeights& w = {}) {
    for (const Scalar* s : {&merged, &dropped, &layer}) {
        const double v = detail::scalar_value(*s);
        if (!std::isfinite(v)) throw InternalConsistencyError("bs loss component is not finite");
        if (v < 0.0) throw InternalConsistencyError("bs loss component is negative");
    }
    return merged * w.merged + dropped * w.dropped + layer * w.layer;
}

} // namespace fgfd
