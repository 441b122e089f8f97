#pragma once

#include "fgfd/data.hpp"
#include "fgfd/metrics.hpp"
#include "fgfd/model.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>

namespace fgfd {

enum class OptimizerKind {
    adaptive_moment, // Adam
    sgd_cosine,      // SGD with momentum, cosine learning-rate decay over max_epochs
};

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adaptive_moment;
    double lr = 1e-3;
    double weight_decay = 1e-6;
    double momentum = 0.9;

    static OptimizerConfig adam_default() { return {}; }
    static OptimizerConfig sgd_cosine_default() { return {OptimizerKind::sgd_cosine, 1e-4, 3e-4, 0.9}; }
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

struct TrainConfig {
    ModelConfig model;
    LossConfig loss;
    TemperatureSchedule schedule;
    OptimizerConfig optimizer;
    // Hybrid mode: optimizer for the second branch; the first branch and the
    // head use `optimizer`.
    std::optional<OptimizerConfig> second_branch_optimizer;
    int64_t batch_size = 64;
    int64_t max_epochs = 30;
    int64_t early_stop_patience = 5;
    uint64_t seed = 0;
    bool double_precision = false;
    double max_fpr = 0.1;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// One record per optimization step; values are the scalar loss tensors
/// actually optimized, read back as doubles.
struct LossReport {
    int64_t epoch = 0; // 1-based
    int64_t step = 0;  // global, 1-based
    double temperature = 0.0;
    double merged = 0.0, dropped = 0.0, layer = 0.0, bs = 0.0, refinement = 0.0, head = 0.0, total = 0.0;
};

void to_json(nlohmann::json& j, const LossReport& r);

struct EpochRecord {
    int64_t epoch = 0;
    double temperature = 0.0;
    double mean_total_loss = 0.0;
    MetricsReport validation;
    bool improved = false;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

struct TrainHistory {
    std::vector<LossReport> steps;
    std::vector<EpochRecord> epochs;
    int64_t best_epoch = 0;
    double best_val_auc = 0.0;
    bool stopped_early = false;

    /// SHA-256 over the full-precision serialization of every record.
    std::string hash() const;
};

void to_json(nlohmann::json& j, const TrainHistory& h);

/// Patience counter on a metric where larger is better. Epochs are 1-based.
class EarlyStopping {
public:
    explicit EarlyStopping(int64_t patience);

    /// Records one epoch's metric; returns true when training should stop.
    bool update(double metric);

    bool last_improved() const { return last_improved_; }
    int64_t best_epoch() const { return best_epoch_; }
    double best() const { return best_; }
    int64_t epochs_seen() const { return epoch_; }

private:
    int64_t patience_;
    int64_t epoch_ = 0;
    int64_t best_epoch_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
    bool last_improved_ = false;
};

struct TrainResult {
    Detector model{nullptr};
    TrainHistory history;
};

/// Receives one JSON record per step ("type": "step") and per epoch ("type": "epoch").
using MetricsSink = std::function<void(const nlohmann::json&)>;

TrainResult train(const TrainConfig& cfg, const FrameDataset& train_set, const FrameDataset& val_set,
                  const MetricsSink& sink = {});

/// Fake-class probability per frame, in dataset order.
std::vector<double> score_frames(Detector& model, const FrameDataset& data, int64_t batch_size = 64);

MetricsReport evaluate(Detector& model, const FrameDataset& test_set, double max_fpr = 0.1,
                       int64_t batch_size = 64);

} // namespace fgfd
