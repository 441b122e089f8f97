#include "fgfd/metrics.hpp"

#include "fgfd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fgfd {

void ScoredSet::validate() const {
    if (scores.size() != labels.size()) throw ProtocolError("scores and labels differ in length");
    if (scores.size() < 2) throw ProtocolError("need at least two scored frames");
    bool has_real = false, has_fake = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ProtocolError("labels must be 0 (real) or 1 (fake)");
        if (!std::isfinite(scores[i])) throw ProtocolError("non-finite score");
        (labels[i] ? has_fake : has_real) = true;
    }
    if (!has_real || !has_fake) throw ProtocolError("ROC metrics need both real and fake frames");
}

std::vector<RocPoint> roc_curve(const ScoredSet& s) {
    s.validate();
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.scores[a] > s.scores[b]; });
    const auto positives = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 1));
    const auto negatives = static_cast<double>(s.labels.size()) - positives;

    std::vector<RocPoint> curve{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = s.scores[order[i]];
        // All frames sharing a score cross the threshold together.
        for (; i < order.size() && s.scores[order[i]] == threshold; ++i) (s.labels[order[i]] ? tp : fp)++;
        curve.push_back({fp / negatives, tp / positives});
    }
    return curve;
}

double roc_auc(const ScoredSet& s) {
    s.validate();
    // Rank-sum form: average ranks over tie groups give ties half credit.
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.scores[a] < s.scores[b]; });
    double rank_sum = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && s.scores[order[j]] == s.scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k)
            if (s.labels[order[k]] == 1) {
                rank_sum += avg_rank;
                positives += 1.0;
            }
        i = j;
    }
    const double negatives = static_cast<double>(s.scores.size()) - positives;
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double partial_auc(const ScoredSet& s, double max_fpr) {
    if (!(max_fpr > 0.0 && max_fpr <= 1.0)) throw ConfigError("partial_auc: max_fpr must lie in (0, 1]");
    const auto curve = roc_curve(s);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        if (a.fpr >= max_fpr) break;
        if (b.fpr <= max_fpr) {
            area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
        } else {
            const double t = (max_fpr - a.fpr) / (b.fpr - a.fpr);
            const double tpr_at = a.tpr + t * (b.tpr - a.tpr);
            area += (max_fpr - a.fpr) * (a.tpr + tpr_at) / 2.0;
            break;
        }
    }
    return area / max_fpr;
}

double eer_from_curve(std::span<const RocPoint> curve) {
    if (curve.empty()) throw ProtocolError("empty ROC curve");
    // gap = FNR - FPR is nonincreasing along the curve; find where it reaches 0.
    auto gap = [](const RocPoint& p) { return (1.0 - p.tpr) - p.fpr; };
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double g = gap(curve[i]);
        if (g > 0.0) continue;
        if (g == 0.0 || i == 0) return curve[i].fpr;
        const double g0 = gap(curve[i - 1]);
        const double t = g0 / (g0 - g);
        return curve[i - 1].fpr + t * (curve[i].fpr - curve[i - 1].fpr);
    }
    return curve.back().fpr;
}

double eer(const ScoredSet& s) {
    const auto curve = roc_curve(s);
    return eer_from_curve(curve);
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = {{"auc", r.auc}, {"pauc", r.pauc}, {"max_fpr", r.max_fpr}, {"eer", r.eer}, {"n_real", r.n_real},
         {"n_fake", r.n_fake}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
    r.auc = j.at("auc").get<double>();
    r.pauc = j.at("pauc").get<double>();
    r.max_fpr = j.at("max_fpr").get<double>();
    r.eer = j.at("eer").get<double>();
    r.n_real = j.at("n_real").get<int64_t>();
    r.n_fake = j.at("n_fake").get<int64_t>();
}

MetricsReport compute_metrics(const ScoredSet& s, double max_fpr) {
    MetricsReport r;
    r.auc = roc_auc(s);
    r.pauc = partial_auc(s, max_fpr);
    r.max_fpr = max_fpr;
    r.eer = eer(s);
    r.n_fake = std::count(s.labels.begin(), s.labels.end(), 1);
    r.n_real = static_cast<int64_t>(s.labels.size()) - r.n_fake;
    return r;
}

} // namespace fgfd
