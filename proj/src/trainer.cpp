#include "fgfd/trainer.hpp"

#include "fgfd/errors.hpp"
#include "fgfd/hashing.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace fgfd {

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = {{"kind", c.kind == OptimizerKind::adaptive_moment ? "adaptive_moment" : "sgd_cosine"},
         {"lr", c.lr},
         {"weight_decay", c.weight_decay},
         {"momentum", c.momentum}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "adaptive_moment")
        c.kind = OptimizerKind::adaptive_moment;
    else if (kind == "sgd_cosine")
        c.kind = OptimizerKind::sgd_cosine;
    else
        throw ConfigError("optimizer: unknown kind '" + kind + "'");
    c.lr = j.at("lr").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.momentum = j.at("momentum").get<double>();
    if (!(c.lr > 0) || c.weight_decay < 0 || c.momentum < 0) throw ConfigError("optimizer: invalid hyperparameters");
}

void TrainConfig::validate() const {
    model.validate();
    schedule.validate();
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("train: early_stop_patience must be >= 1");
    if (!(max_fpr > 0 && max_fpr <= 1)) throw ConfigError("train: max_fpr must lie in (0, 1]");
    if (second_branch_optimizer && !model.hybrid())
        throw ConfigError("train: second_branch_optimizer needs a two-branch model");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"model", c.model},
         {"loss", c.loss},
         {"schedule", c.schedule},
         {"optimizer", c.optimizer},
         {"second_branch_optimizer", c.second_branch_optimizer ? nlohmann::json(*c.second_branch_optimizer) : nlohmann::json()},
         {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"early_stop_patience", c.early_stop_patience},
         {"seed", c.seed},
         {"double_precision", c.double_precision},
         {"max_fpr", c.max_fpr}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.model = j.at("model").get<ModelConfig>();
    c.loss = j.at("loss").get<LossConfig>();
    c.schedule = j.at("schedule").get<TemperatureSchedule>();
    c.optimizer = j.at("optimizer").get<OptimizerConfig>();
    const auto& second = j.at("second_branch_optimizer");
    c.second_branch_optimizer = second.is_null() ? std::nullopt : std::optional(second.get<OptimizerConfig>());
    c.batch_size = j.at("batch_size").get<int64_t>();
    c.max_epochs = j.at("max_epochs").get<int64_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<int64_t>();
    c.seed = j.at("seed").get<uint64_t>();
    c.double_precision = j.at("double_precision").get<bool>();
    c.max_fpr = j.at("max_fpr").get<double>();
}

void to_json(nlohmann::json& j, const LossReport& r) {
    j = {{"epoch", r.epoch},   {"step", r.step},       {"temperature", r.temperature}, {"loss_m", r.merged},
         {"loss_d", r.dropped}, {"loss_l", r.layer},   {"loss_bs", r.bs},              {"loss_r", r.refinement},
         {"loss_head", r.head}, {"loss_total", r.total}};
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
    j = {{"epoch", r.epoch},
         {"temperature", r.temperature},
         {"mean_total_loss", r.mean_total_loss},
         {"val", r.validation},
         {"improved", r.improved}};
}

void to_json(nlohmann::json& j, const TrainHistory& h) {
    j = {{"steps", h.steps},
         {"epochs", h.epochs},
         {"best_epoch", h.best_epoch},
         {"best_val_auc", h.best_val_auc},
         {"stopped_early", h.stopped_early}};
}

std::string TrainHistory::hash() const { return sha256_hex(nlohmann::json(*this).dump()); }

EarlyStopping::EarlyStopping(int64_t patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(double metric) {
    ++epoch_;
    last_improved_ = metric > best_;
    if (last_improved_) {
        best_ = metric;
        best_epoch_ = epoch_;
    }
    return epoch_ - best_epoch_ >= patience_;
}

namespace {

struct OptimizerSlot {
    std::unique_ptr<torch::optim::Optimizer> optimizer;
    OptimizerConfig cfg;
};

OptimizerSlot make_optimizer(const OptimizerConfig& cfg, std::vector<torch::Tensor> params) {
    OptimizerSlot slot;
    slot.cfg = cfg;
    if (cfg.kind == OptimizerKind::adaptive_moment) {
        slot.optimizer = std::make_unique<torch::optim::Adam>(
            std::move(params), torch::optim::AdamOptions(cfg.lr).weight_decay(cfg.weight_decay));
    } else {
        slot.optimizer = std::make_unique<torch::optim::SGD>(
            std::move(params), torch::optim::SGDOptions(cfg.lr).momentum(cfg.momentum).weight_decay(cfg.weight_decay));
    }
    return slot;
}

void apply_cosine(OptimizerSlot& slot, int64_t epoch_index, int64_t max_epochs) {
    if (slot.cfg.kind != OptimizerKind::sgd_cosine) return;
    const double lr = slot.cfg.lr * 0.5 *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch_index) / static_cast<double>(max_epochs)));
    for (auto& group : slot.optimizer->param_groups())
        static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
}

std::vector<torch::Tensor> trainable(std::vector<torch::Tensor> params) {
    std::erase_if(params, [](const torch::Tensor& p) { return !p.requires_grad(); });
    return params;
}

std::vector<OptimizerSlot> build_optimizers(const TrainConfig& cfg, Detector& model) {
    std::vector<OptimizerSlot> slots;
    if (!cfg.second_branch_optimizer) {
        slots.push_back(make_optimizer(cfg.optimizer, trainable(model->parameters())));
        return slots;
    }
    auto first = trainable(model->branches[0]->parameters());
    if (!model->head.is_empty()) {
        auto head = trainable(model->head->parameters());
        first.insert(first.end(), head.begin(), head.end());
    }
    slots.push_back(make_optimizer(cfg.optimizer, std::move(first)));
    slots.push_back(make_optimizer(*cfg.second_branch_optimizer, trainable(model->branches[1]->parameters())));
    return slots;
}

using StateSnapshot = std::vector<std::pair<std::string, torch::Tensor>>;

StateSnapshot snapshot(const torch::nn::Module& m) {
    StateSnapshot s;
    for (const auto& p : m.named_parameters()) s.emplace_back(p.key(), p.value().detach().clone());
    for (const auto& b : m.named_buffers()) s.emplace_back(b.key(), b.value().detach().clone());
    return s;
}

void restore(torch::nn::Module& m, const StateSnapshot& s) {
    torch::NoGradGuard guard;
    auto params = m.named_parameters();
    auto buffers = m.named_buffers();
    for (const auto& [name, value] : s) {
        if (auto* p = params.find(name))
            p->copy_(value);
        else if (auto* b = buffers.find(name))
            b->copy_(value);
    }
}

torch::ScalarType dtype_for(const TrainConfig& cfg) { return cfg.double_precision ? torch::kFloat64 : torch::kFloat32; }

} // namespace

std::vector<double> score_frames(Detector& model, const FrameDataset& data, int64_t batch_size) {
    torch::NoGradGuard guard;
    const bool was_training = model->is_training();
    model->eval();
    const auto dtype = model->parameters().front().scalar_type();
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(data.size()));
    for (int64_t start = 0; start < data.size(); start += batch_size) {
        const auto len = std::min(batch_size, data.size() - start);
        auto s = model->fake_scores(data.images.narrow(0, start, len).to(dtype)).to(torch::kFloat64).contiguous();
        scores.insert(scores.end(), s.data_ptr<double>(), s.data_ptr<double>() + len);
    }
    model->train(was_training);
    return scores;
}

MetricsReport evaluate(Detector& model, const FrameDataset& test_set, double max_fpr, int64_t batch_size) {
    if (test_set.size() == 0) throw ProtocolError("evaluation set is empty");
    ScoredSet s;
    s.scores = score_frames(model, test_set, batch_size);
    s.labels.assign(test_set.labels.data_ptr<int64_t>(), test_set.labels.data_ptr<int64_t>() + test_set.size());
    return compute_metrics(s, max_fpr);
}

TrainResult train(const TrainConfig& cfg, const FrameDataset& train_set, const FrameDataset& val_set,
                  const MetricsSink& sink) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ProtocolError("training and validation sets must be nonempty");
    if (!train_set.has_both_classes()) throw ProtocolError("training set must contain both real and fake frames");
    if (!val_set.has_both_classes()) throw ProtocolError("validation set must contain both real and fake frames");

    torch::set_num_threads(1);
    const auto dtype = dtype_for(cfg);
    TrainResult result;
    result.model = build_detector(cfg.model, cfg.seed);
    cast_floating(*result.model, dtype);
    auto& model = result.model;
    auto optimizers = build_optimizers(cfg, model);

    const auto images = train_set.images.to(dtype);
    const auto labels = train_set.labels;
    std::mt19937_64 rng(cfg.seed);
    std::vector<int64_t> order(static_cast<std::size_t>(train_set.size()));
    std::iota(order.begin(), order.end(), 0);

    EarlyStopping stopper(cfg.early_stop_patience);
    StateSnapshot best_state = snapshot(*model);
    int64_t step = 0;
    for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double temperature = temperature_at(cfg.schedule, epoch - 1);
        for (auto& slot : optimizers) apply_cosine(slot, epoch - 1, cfg.max_epochs);
        std::shuffle(order.begin(), order.end(), rng);
        model->train();
        double loss_sum = 0.0;
        int64_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
            // Batch statistics are undefined for a single sample.
            if (len < 2) continue;
            auto idx = torch::tensor(std::vector<int64_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                          order.begin() + static_cast<std::ptrdiff_t>(start + len)),
                                     torch::kInt64);
            auto outputs = model->forward(images.index_select(0, idx));
            LossTerms terms;
            try {
                terms = compute_losses(outputs, labels.index_select(0, idx), cfg.model, cfg.loss, temperature);
            } catch (const InternalConsistencyError& e) {
                throw TrainingDivergedError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                                            ": " + e.what());
            }
            LossReport report{epoch,
                              ++step,
                              temperature,
                              terms.merged.item<double>(),
                              terms.dropped.item<double>(),
                              terms.layer.item<double>(),
                              terms.bs.item<double>(),
                              terms.refinement.item<double>(),
                              terms.head.item<double>(),
                              terms.total.item<double>()};
            if (!std::isfinite(report.total))
                throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                            std::to_string(step) + " (loss_m=" + std::to_string(report.merged) +
                                            ", loss_d=" + std::to_string(report.dropped) + ", loss_r=" +
                                            std::to_string(report.refinement) + ")");
            for (auto& slot : optimizers) slot.optimizer->zero_grad();
            terms.total.backward();
            for (auto& slot : optimizers) slot.optimizer->step();
            loss_sum += report.total;
            ++batches;
            if (sink) {
                auto rec = nlohmann::json(report);
                rec["type"] = "step";
                sink(rec);
            }
            result.history.steps.push_back(report);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.temperature = temperature;
        rec.mean_total_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        rec.validation = evaluate(model, val_set, cfg.max_fpr, std::max<int64_t>(cfg.batch_size, 64));
        const bool stop = stopper.update(rec.validation.auc);
        rec.improved = stopper.last_improved();
        if (rec.improved) best_state = snapshot(*model);
        if (sink) {
            auto j = nlohmann::json(rec);
            j["type"] = "epoch";
            sink(j);
        }
        result.history.epochs.push_back(rec);
        if (stop) {
            result.history.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    restore(*model, best_state);
    model->eval();
    result.history.best_epoch = stopper.best_epoch();
    result.history.best_val_auc = stopper.best();
    return result;
}

} // namespace fgfd
