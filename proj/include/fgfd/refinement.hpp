#pragma once

// High-temperature refinement: the top-down-path classifier (student) is
// distilled toward the bottom-up-path classifier (teacher) at a temperature
// that halves on a fixed epoch schedule.

#include "fgfd/errors.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <span>

namespace fgfd {

enum class TemperatureMode {
    multiplicative, // T * 0.5^(e / (4 + log2 T)); starts at T, reaches 1/16 at e = (4 + log2 T)^2
    literal,        // 0.5^(e / (4 + log2 T)); starts at 1 for every T
};

struct TemperatureSchedule {
    double initial = 64.0;
    TemperatureMode mode = TemperatureMode::multiplicative;

    void validate() const;
};

void to_json(nlohmann::json& j, const TemperatureSchedule& s);
void from_json(const nlohmann::json& j, TemperatureSchedule& s);

double temperature_at(const TemperatureSchedule& s, int64_t epoch);

/// Pooled logits of the two classifiers attached to one fused block.
struct RefinementPair {
    int block_index = 0;
    torch::Tensor student; // top-down path, (B, num_classes)
    torch::Tensor teacher; // bottom-up path, (B, num_classes)
};

struct TotalLossWeights {
    double refinement = 1.0;
};

/// Batch-mean KL(teacher || student) of the tempered softmaxes. With
/// `detach_teacher` the teacher side receives no gradient.
torch::Tensor refinement_loss(const RefinementPair& pair, double temperature, bool detach_teacher = true);

/// Mean of refinement_loss over all pairs.
torch::Tensor refinement_loss(std::span<const RefinementPair> pairs, double temperature, bool detach_teacher = true);

namespace detail {
inline double total_scalar_value(double v) { return v; }
inline double total_scalar_value(const torch::Tensor& t) { return t.item<double>(); }
} // namespace detail

template <class Scalar>
Scalar total_loss(const Scalar& bs, const Scalar& refinement, const TotalLossWeights& w = {}) {
    for (const Scalar* s : {&bs, &refinement}) {
        const double v = detail::total_scalar_value(*s);
        if (!std::isfinite(v) || v < 0.0) throw InternalConsistencyError("total loss component must be finite and >= 0");
    }
    return bs + refinement * w.refinement;
}

} // namespace fgfd
