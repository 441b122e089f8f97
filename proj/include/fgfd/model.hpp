#pragma once

// Full detector: one or two branches (backbone -> path-aggregation neck ->
// background suppression -> refinement pairs) and, with two branches, the
// hybrid concatenation head.

#include "fgfd/background_suppression.hpp"
#include "fgfd/backbone.hpp"
#include "fgfd/fusion.hpp"
#include "fgfd/hybrid_head.hpp"
#include "fgfd/refinement.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <optional>

namespace fgfd {

struct ModuleToggles {
    bool bs = true;
    bool refinement = true;
};

struct ModelConfig {
    std::vector<BackboneSpec> branches{BackboneSpec{}};
    FusionConfig fusion;
    SelectorConfig selector;
    int64_t embed_dim = 128;
    int64_t num_classes = 2;
    int64_t fc_width = 1024;
    // Initial bias of the bottom-up block classifiers. Starting every
    // location at "background" keeps the dropped loss near zero at first;
    // from a zero bias it is met by collapsing the fused maps instead.
    double classifier_bias_init = -3.0;
    ModuleToggles toggles;
    bool freeze_branches = false;

    void validate() const;
    bool hybrid() const { return branches.size() == 2; }
    /// Width of one branch's embedding: the combiner embedding with BS on,
    /// the pooled last bottom-up map otherwise.
    int64_t branch_embed_dim() const { return toggles.bs ? embed_dim : fusion.common_dim; }
};

void to_json(nlohmann::json& j, const ModuleToggles& t);
void from_json(const nlohmann::json& j, ModuleToggles& t);
void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

struct BranchOutputs {
    FeatureMapSet features;
    FeatureMapSet top_down;
    FeatureMapSet bottom_up;
    std::vector<ClassificationMap> class_maps; // BS on
    std::optional<SelectionOutcome> selection; // BS on
    torch::Tensor logits;                       // Y_m, or pooled last-block logits with BS off
    torch::Tensor embedding;
    std::vector<torch::Tensor> layer_logits; // pooled bottom-up classifier logits per block
    std::vector<RefinementPair> pairs;
};

class BranchNetworkImpl : public torch::nn::Module {
public:
    BranchNetworkImpl(const BackboneSpec& spec, const ModelConfig& cfg);

    BranchOutputs forward(const torch::Tensor& images);

    ReferenceBackbone backbone{nullptr};
    PathAggregationNeck neck{nullptr};
    // Bottom-up classifiers carry the background-suppression maps, the layer
    // loss and the refinement teacher; top-down ones are the students.
    std::vector<BlockClassifier> classifiers;
    std::vector<BlockClassifier> student_classifiers;
    GraphCombiner combiner{nullptr};

private:
    ModelConfig cfg_;
};
TORCH_MODULE(BranchNetwork);

struct DetectorOutputs {
    std::vector<BranchOutputs> branches;
    torch::Tensor logits; // final decision logits (B, num_classes)
};

class DetectorImpl : public torch::nn::Module {
public:
    explicit DetectorImpl(ModelConfig cfg);

    DetectorOutputs forward(const torch::Tensor& images);

    /// Softmax probability of class 1 (fake) per image.
    torch::Tensor fake_scores(const torch::Tensor& images);

    const ModelConfig& config() const { return cfg_; }

    std::vector<BranchNetwork> branches;
    HybridHead head{nullptr};

private:
    ModelConfig cfg_;
};
TORCH_MODULE(Detector);

Detector build_detector(const ModelConfig& cfg, uint64_t seed);

/// Casts floating-point parameters and buffers to `dtype`; integer buffers
/// (BatchNorm step counters) keep their type, unlike Module::to.
void cast_floating(torch::nn::Module& module, torch::Dtype dtype);

struct LossConfig {
    BsLossWeights bs;
    TotalLossWeights total;
    DroppedReduction dropped_reduction = DroppedReduction::mean;
    bool detach_teacher = true;
};

void to_json(nlohmann::json& j, const LossConfig& cfg);
void from_json(const nlohmann::json& j, LossConfig& cfg);

/// Scalar tensors. Disabled modules contribute exact zeros; with BS off the
/// merged term is the cross-entropy of the pooled last-block classifier.
struct LossTerms {
    torch::Tensor merged, dropped, layer, bs, refinement, head, total;
};

LossTerms compute_losses(const DetectorOutputs& outputs, const torch::Tensor& labels, const ModelConfig& model,
                         const LossConfig& cfg, double temperature);

} // namespace fgfd
