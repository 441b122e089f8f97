#pragma once

// Frame-level ROC metrics: AUC (Mann-Whitney with half credit for ties),
// normalized partial AUC up to a false-positive-rate bound, and EER.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace fgfd {

/// Higher score means more likely fake (label 1).
struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;

    /// Throws ProtocolError on length mismatch, fewer than 2 items, labels
    /// outside {0,1}, or a missing class.
    void validate() const;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Empirical ROC from (0,0) to (1,1), one point per distinct score threshold.
std::vector<RocPoint> roc_curve(const ScoredSet& s);

double roc_auc(const ScoredSet& s);

/// Trapezoidal area for FPR in [0, max_fpr], interpolated at the bound and
/// divided by max_fpr.
double partial_auc(const ScoredSet& s, double max_fpr = 0.1);

/// Error rate where FPR equals FNR, linearly interpolated on the crossing segment.
double eer(const ScoredSet& s);

/// Interpolated EER for an arbitrary ROC polyline starting at (0,0).
double eer_from_curve(std::span<const RocPoint> curve);

struct MetricsReport {
    double auc = 0.0;
    double pauc = 0.0; // at max_fpr
    double max_fpr = 0.1;
    double eer = 0.0;
    int64_t n_real = 0;
    int64_t n_fake = 0;
};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

MetricsReport compute_metrics(const ScoredSet& s, double max_fpr = 0.1);

} // namespace fgfd
