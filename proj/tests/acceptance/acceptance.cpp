// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include "fgfd/checkpoint.hpp"
#include "fgfd/config.hpp"
#include "fgfd/diagnostics.hpp"
#include "fgfd/explain.hpp"
#include "fgfd/metrics.hpp"
#include "fgfd/refinement.hpp"
#include "fgfd/synthetic.hpp"
#include "fgfd/trainer.hpp"

#include "test_util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace fgfd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream o;
    o << std::setprecision(precision) << v;
    return o.str();
}

double at(const torch::Tensor& t, std::initializer_list<int64_t> idx) {
    auto v = t;
    for (auto i : idx) v = v.select(0, i);
    return v.item<double>();
}

double log_sum_exp(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

torch::TensorOptions f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

// ---------------------------------------------------------------- oracles

// Combiner forward and cross-entropy written out in scalar loops.
double merged_oracle(GraphCombiner& g, const torch::Tensor& tokens, const torch::Tensor& labels) {
    const auto B = tokens.size(0), T = tokens.size(1), d = tokens.size(2);
    const auto E = g->projection->weight.size(0), C = g->head->weight.size(0);
    double loss = 0;
    for (int64_t b = 0; b < B; ++b) {
        std::vector<std::vector<double>> x(T, std::vector<double>(d)), ax(T, std::vector<double>(d, 0.0));
        for (int64_t t = 0; t < T; ++t)
            for (int64_t i = 0; i < d; ++i) x[t][i] = at(tokens, {b, t, i});
        for (int64_t t = 0; t < T; ++t) {
            std::vector<double> s(T);
            for (int64_t u = 0; u < T; ++u) {
                s[u] = 0;
                for (int64_t i = 0; i < d; ++i) s[u] += x[t][i] * x[u][i];
            }
            const double lse = log_sum_exp(s);
            for (int64_t u = 0; u < T; ++u)
                for (int64_t i = 0; i < d; ++i) ax[t][i] += std::exp(s[u] - lse) * x[u][i];
        }
        std::vector<double> pooled(d, 0.0);
        for (int64_t t = 0; t < T; ++t)
            for (int64_t j = 0; j < d; ++j) {
                double v = 0;
                for (int64_t i = 0; i < d; ++i) v += ax[t][i] * at(g->graph_weight, {i, j});
                pooled[j] += (std::max(v, 0.0) + x[t][j]) / static_cast<double>(T);
            }
        std::vector<double> e(E), logits(C);
        for (int64_t k = 0; k < E; ++k) {
            e[k] = at(g->projection->bias, {k});
            for (int64_t j = 0; j < d; ++j) e[k] += at(g->projection->weight, {k, j}) * pooled[j];
        }
        for (int64_t c = 0; c < C; ++c) {
            logits[c] = at(g->head->bias, {c});
            for (int64_t k = 0; k < E; ++k) logits[c] += at(g->head->weight, {c, k}) * e[k];
        }
        loss += log_sum_exp(logits) - logits[labels[b].item<int64_t>()];
    }
    return loss / static_cast<double>(B);
}

double dropped_oracle(const torch::Tensor& yd) {
    double s = 0;
    for (int64_t b = 0; b < yd.size(0); ++b)
        for (int64_t n = 0; n < yd.size(1); ++n)
            for (int64_t c = 0; c < yd.size(2); ++c) s += std::pow(std::tanh(at(yd, {b, n, c})) + 1.0, 2);
    return s / static_cast<double>(yd.size(0) * yd.size(1));
}

double layer_oracle(const std::vector<torch::Tensor>& maps, std::vector<BlockClassifier>& cls,
                    const torch::Tensor& labels) {
    double total = 0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
        const auto& m = maps[k];
        const auto B = m.size(0), Cin = m.size(1), H = m.size(2), W = m.size(3);
        const auto& lin = cls[k]->linear;
        const auto C = lin->weight.size(0);
        double block = 0;
        for (int64_t b = 0; b < B; ++b) {
            std::vector<double> pooled(Cin, 0.0), logits(C);
            for (int64_t i = 0; i < Cin; ++i)
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x = 0; x < W; ++x) pooled[i] += at(m, {b, i, y, x}) / static_cast<double>(H * W);
            for (int64_t c = 0; c < C; ++c) {
                logits[c] = at(lin->bias, {c});
                for (int64_t i = 0; i < Cin; ++i) logits[c] += at(lin->weight, {c, i}) * pooled[i];
            }
            block += log_sum_exp(logits) - logits[labels[b].item<int64_t>()];
        }
        total += block / static_cast<double>(B);
    }
    return total;
}

double refinement_oracle(const torch::Tensor& student, const torch::Tensor& teacher, double T) {
    double s = 0;
    for (int64_t b = 0; b < student.size(0); ++b) {
        std::vector<double> zs, zt;
        for (int64_t c = 0; c < student.size(1); ++c) {
            zs.push_back(at(student, {b, c}) / T);
            zt.push_back(at(teacher, {b, c}) / T);
        }
        const double ls = log_sum_exp(zs), lt = log_sum_exp(zt);
        for (std::size_t c = 0; c < zs.size(); ++c) {
            const double p = std::exp(zt[c] - lt);
            if (p > 0) s += p * ((zt[c] - lt) - (zs[c] - ls));
        }
    }
    return s / static_cast<double>(student.size(0));
}

// ---------------------------------------------------------------- criteria

Outcome loss_oracles() {
    const auto t0 = Clock::now();
    std::mt19937 rng(2024);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); };
    torch::manual_seed(2024);
    double worst[4] = {0, 0, 0, 0};
    for (int i = 0; i < 100; ++i) {
        // Cross-entropy terms need two classes; the dropped and refinement terms also run with one.
        const int B = pick(1, 3), C = 2, Cx = pick(1, 2), T = pick(1, 4), d = pick(1, 3), E = pick(1, 3);
        auto labels = torch::randint(C, {B}, torch::kInt64);

        GraphCombiner g(d, E, C);
        g->to(torch::kFloat64);
        auto tokens = torch::randn({B, T, d}, f64());
        const double m = merged_loss(g->forward(tokens).logits, LabelBatch{labels, C}).item<double>();
        worst[0] = std::max(worst[0], std::abs(m - merged_oracle(g, tokens, labels)));

        auto yd = torch::randn({B, T, Cx}, f64()) * 2;
        worst[1] = std::max(worst[1], std::abs(dropped_loss(yd).item<double>() - dropped_oracle(yd)));
        // Block averaging, with a block that dropped nothing.
        std::vector<torch::Tensor> blocks{yd, torch::randn({B, pick(1, 4), Cx}, f64()),
                                          torch::zeros({B, 0, Cx}, f64())};
        const double avg = (dropped_oracle(blocks[0]) + dropped_oracle(blocks[1])) / 2;
        worst[1] = std::max(worst[1], std::abs(dropped_loss(blocks).item<double>() - avg));

        std::vector<torch::Tensor> maps;
        std::vector<BlockClassifier> cls;
        for (int k = 0, n = pick(1, 4); k < n; ++k) {
            maps.push_back(torch::randn({B, d, pick(1, 2), pick(1, 2)}, f64()));
            cls.emplace_back(d, C);
            cls.back()->to(torch::kFloat64);
        }
        FeatureMapSet fused;
        fused.maps = maps;
        const double l = layer_loss(fused, cls, LabelBatch{labels, C}).item<double>();
        worst[2] = std::max(worst[2], std::abs(l - layer_oracle(maps, cls, labels)));

        const double temp = std::uniform_real_distribution<double>(0.5, 64.0)(rng);
        std::vector<RefinementPair> pairs;
        double r_sum = 0;
        for (int k = 0, n = pick(1, 4); k < n; ++k) {
            pairs.push_back({k, torch::randn({B, Cx}, f64()) * 4, torch::randn({B, Cx}, f64()) * 4});
            r_sum += refinement_oracle(pairs.back().student, pairs.back().teacher, temp);
        }
        const double r = refinement_loss(std::span<const RefinementPair>(pairs), temp).item<double>();
        worst[3] = std::max(worst[3], std::abs(r - r_sum / static_cast<double>(pairs.size())));
    }
    const double secs = seconds_since(t0);
    const double w = *std::max_element(std::begin(worst), std::end(worst));
    return {w < 1e-6 && secs < 10.0, "max |delta| merged " + fmt(worst[0], 3) + ", dropped " + fmt(worst[1], 3) +
                                         ", layer " + fmt(worst[2], 3) + ", refinement " + fmt(worst[3], 3) +
                                         " over 100 cases each; " + fmt(secs, 3) + " s"};
}

Outcome gradient_checks() {
    const auto t0 = Clock::now();
    torch::manual_seed(77);
    double worst[4] = {0, 0, 0, 0};
    bool teacher_zero = true;
    for (int i = 0; i < 10; ++i) {
        auto labels = torch::randint(2, {2}, torch::kInt64);
        GraphCombiner g(3, 2, 2);
        g->to(torch::kFloat64);
        auto fm = [&](const torch::Tensor& tok) { return merged_loss(g->forward(tok).logits, LabelBatch{labels, 2}); };
        worst[0] = std::max(worst[0], testutil::gradient_check(fm, torch::randn({2, 3, 3}, f64())));

        auto fd = [](const torch::Tensor& y) { return dropped_loss(y); };
        worst[1] = std::max(worst[1], testutil::gradient_check(fd, torch::randn({2, 4, 2}, f64())));

        std::vector<BlockClassifier> cls{BlockClassifier(3, 2), BlockClassifier(3, 2)};
        for (auto& c : cls) c->to(torch::kFloat64);
        auto other = torch::randn({2, 3, 1, 1}, f64());
        auto fl = [&](const torch::Tensor& m) {
            FeatureMapSet fs;
            fs.maps = {m, other};
            return layer_loss(fs, cls, LabelBatch{labels, 2});
        };
        worst[2] = std::max(worst[2], testutil::gradient_check(fl, torch::randn({2, 3, 2, 2}, f64())));

        auto teacher = torch::randn({2, 2}, f64()) * 2;
        auto fr = [&](const torch::Tensor& s) { return refinement_loss({0, s, teacher}, 3.0); };
        worst[3] = std::max(worst[3], testutil::gradient_check(fr, torch::randn({2, 2}, f64()) * 2));

        auto t = teacher.clone().set_requires_grad(true);
        auto s = torch::randn({2, 2}, f64()).set_requires_grad(true);
        auto grads = torch::autograd::grad({refinement_loss({0, s, t}, 3.0)}, {t}, {}, false, false, true);
        if (grads[0].defined() && grads[0].abs().max().item<double>() != 0.0) teacher_zero = false;
    }
    const double secs = seconds_since(t0);
    const double w = *std::max_element(std::begin(worst), std::end(worst));
    return {w < 1e-3 && teacher_zero && secs < 60.0,
            "max relative error m " + fmt(worst[0], 3) + ", d " + fmt(worst[1], 3) + ", l " + fmt(worst[2], 3) +
                ", r " + fmt(worst[3], 3) + "; teacher gradient " + (teacher_zero ? "zero" : "NONZERO") + "; " +
                fmt(secs, 3) + " s"};
}

Outcome temperature_schedule() {
    const TemperatureSchedule mult{64.0, TemperatureMode::multiplicative};
    const TemperatureSchedule lit{64.0, TemperatureMode::literal};
    const double t0 = temperature_at(mult, 0), t10 = temperature_at(mult, 10), t100 = temperature_at(mult, 100);
    bool ok = std::abs(t0 - 64) < 1e-9 && std::abs(t10 - 32) < 1e-9 && std::abs(t100 - 0.0625) < 1e-9;
    ok = ok && temperature_at(lit, 0) == 1.0;
    bool monotone = true;
    for (const auto& s : {mult, lit})
        for (int e = 0; e < 200; ++e) monotone = monotone && temperature_at(s, e + 1) < temperature_at(s, e);
    return {ok && monotone, "T(0)=" + fmt(t0, 12) + " T(10)=" + fmt(t10, 12) + " T(100)=" + fmt(t100, 12) +
                                " literal T(0)=" + fmt(temperature_at(lit, 0)) +
                                (monotone ? ", strictly decreasing on [0,200]" : ", NOT monotone")};
}

struct SmallData {
    FrameDataset train, val;
};

SmallData small_dataset(const fs::path& dir, const RunConfig& run) {
    auto syn = run.data.synthetic;
    syn.num_videos_per_class = 6;
    syn.frames_per_video = 4;
    syn.families = {"A"};
    generate_synthetic(syn, dir);
    const auto m = load_manifest(dir / kManifestFile);
    return {load_split(m, Split::train, {"A"}, run.data.preprocess), load_split(m, Split::val, {"A"}, run.data.preprocess)};
}

Outcome weighted_sum_identities(const fs::path& work) {
    auto run = RunConfig::desk_profile();
    const BsLossWeights w{};
    const TotalLossWeights tw{};
    const bool defaults = w.merged == 1.0 && w.dropped == 5.0 && w.layer == 0.3 && tw.refinement == 1.0;
    auto data = small_dataset(work / "identity_data", run);
    run.train.double_precision = true;
    run.train.batch_size = 8;
    run.train.max_epochs = 2;
    double worst = 0;
    int steps = 0;
    train(run.train, data.train, data.val, [&](const nlohmann::json& j) {
        if (j["type"] != "step") return;
        ++steps;
        const double bs = j["loss_m"].get<double>() + 5.0 * j["loss_d"].get<double>() + 0.3 * j["loss_l"].get<double>();
        worst = std::max(worst, std::abs(j["loss_bs"].get<double>() - bs));
        worst = std::max(worst, std::abs(j["loss_total"].get<double>() - (j["loss_bs"].get<double>() +
                                                                             j["loss_r"].get<double>())));
    });
    return {defaults && steps > 0 && worst < 1e-9,
            "weights (1, 5, 0.3, 1)" + std::string(defaults ? "" : " NOT default") + "; max |delta| " +
                fmt(worst, 3) + " over " + std::to_string(steps) + " logged float64 steps"};
}

Outcome selection_invariants() {
    std::mt19937 rng(99);
    torch::manual_seed(99);
    int violations = 0, clamp_cases = 0, tie_maps = 0;
    for (int i = 0; i < 1000; ++i) {
        const int64_t B = 1 + rng() % 3, H = 1 + rng() % 6, W = 1 + rng() % 6, HW = H * W;
        const int64_t count = 1 + static_cast<int64_t>(rng() % static_cast<unsigned>(HW + 3));
        ClassificationMap cmap{torch::randn({B, 2, H, W}, f64()), static_cast<int>(i % 4)};
        torch::Tensor scores;
        if (i % 2 == 0) {
            scores = max_score_map(cmap);
        } else {
            scores = torch::randint(0, 3, {B, H, W}).to(torch::kFloat64) / 2.0; // heavy ties
            ++tie_maps;
        }
        ScopedWarningCapture warnings;
        const auto split = select_top_d(cmap, scores, count);
        const int64_t k = std::min(count, HW);
        if (count > HW) ++clamp_cases;
        if (split.clamped != (count > HW) || warnings.contains("clamped") != (count > HW)) ++violations;
        if (split.selected.size(1) != k || split.dropped.size(1) != HW - k) {
            ++violations;
            continue;
        }
        for (int64_t b = 0; b < B; ++b) {
            std::vector<double> s(static_cast<std::size_t>(HW));
            for (int64_t p = 0; p < HW; ++p) s[p] = at(scores, {b, p / W, p % W});
            std::vector<int64_t> expected(HW);
            std::iota(expected.begin(), expected.end(), 0);
            std::stable_sort(expected.begin(), expected.end(), [&](int64_t a, int64_t c) { return s[a] > s[c]; });
            std::set<int64_t> seen;
            double min_sel = std::numeric_limits<double>::infinity(), max_drop = -min_sel;
            for (int64_t j = 0; j < k; ++j) {
                const auto p = split.selected[b][j].item<int64_t>();
                seen.insert(p);
                min_sel = std::min(min_sel, s[p]);
                if (p != expected[j]) ++violations; // exact order, ties to the lower index
            }
            for (int64_t j = 0; j < HW - k; ++j) {
                const auto p = split.dropped[b][j].item<int64_t>();
                seen.insert(p);
                max_drop = std::max(max_drop, s[p]);
            }
            if (static_cast<int64_t>(seen.size()) != HW) ++violations;             // partition
            if (k < HW && min_sel < max_drop) ++violations;                         // dominance
        }
    }
    return {violations == 0, "1000 maps (" + std::to_string(tie_maps) + " with ties, " + std::to_string(clamp_cases) +
                                 " clamped); " + std::to_string(violations) + " violations"};
}

Outcome metrics_oracles() {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    double auc_worst = 0, pauc_worst = 0, eer_worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        ScoredSet s;
        const int n = 2 + static_cast<int>(rng() % 19);
        do {
            s.scores.clear();
            s.labels.clear();
            for (int i = 0; i < n; ++i) {
                s.labels.push_back(static_cast<int>(rng() % 2));
                s.scores.push_back(trial % 2 ? std::round(u(rng) * 5) / 5 : u(rng) + 0.2 * s.labels.back());
            }
        } while (std::count(s.labels.begin(), s.labels.end(), 1) == 0 ||
                 std::count(s.labels.begin(), s.labels.end(), 0) == 0);
        double num = 0, den = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (s.labels[i] == 1 && s.labels[j] == 0) {
                    den += 1;
                    num += s.scores[i] > s.scores[j] ? 1.0 : (s.scores[i] == s.scores[j] ? 0.5 : 0.0);
                }
        const double auc = roc_auc(s);
        auc_worst = std::max(auc_worst, std::abs(auc - num / den));
        pauc_worst = std::max(pauc_worst, std::abs(partial_auc(s, 1.0) - auc));

        // Threshold sweep: frames with score >= t are called fake.
        std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());
        const double pos = std::count(s.labels.begin(), s.labels.end(), 1), neg = n - pos;
        std::vector<std::pair<double, double>> pts{{0.0, 1.0}};
        for (double t : thresholds) {
            double fp = 0, tp = 0;
            for (int i = 0; i < n; ++i)
                if (s.scores[i] >= t) (s.labels[i] ? tp : fp) += 1;
            pts.emplace_back(fp / neg, 1.0 - tp / pos);
        }
        double sweep = pts.front().first;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            const double d0 = pts[i - 1].second - pts[i - 1].first, d1 = pts[i].second - pts[i].first;
            if (d0 > 0 && d1 <= 0) {
                sweep = pts[i - 1].first + d0 / (d0 - d1) * (pts[i].first - pts[i - 1].first);
                break;
            }
        }
        eer_worst = std::max(eer_worst, std::abs(eer(s) - sweep));
    }
    const double toy = roc_auc({{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}});
    const bool ok = auc_worst <= 1e-12 && pauc_worst <= 1e-12 && eer_worst < 1e-9 && std::abs(toy - 0.75) < 1e-12;
    return {ok, "AUC vs pairwise " + fmt(auc_worst, 3) + ", pAUC(1) vs AUC " + fmt(pauc_worst, 3) + ", EER vs sweep " +
                    fmt(eer_worst, 3) + ", toy AUC " + fmt(toy)};
}

// Shared by the directional experiment and the Grad-CAM report.
struct CrossFamilyData {
    fs::path dir;
    FrameDataset train, val, test_b, test_a;
    std::map<std::string, cv::Rect> regions;
};

CrossFamilyData cross_family_data(const fs::path& dir, const RunConfig& run) {
    CrossFamilyData d;
    d.dir = dir;
    auto syn = run.data.synthetic;
    syn.num_videos_per_class = 75;
    syn.frames_per_video = 20;
    syn.image_size = 64;
    syn.families = {"A", "B"};
    const auto ds = generate_synthetic(syn, dir);
    const auto m = sample_frames(ds.manifest, run.data.frame_counts, run.data.sampling_seed);
    d.train = load_split(m, Split::train, {"A"}, run.data.preprocess);
    d.val = load_split(m, Split::val, {"A"}, run.data.preprocess);
    d.test_b = load_split(m, Split::test, {"B"}, run.data.preprocess);
    d.test_a = load_split(m, Split::test, {"A"}, run.data.preprocess);
    for (const auto& a : ds.annotations) d.regions[a.frame_path] = a.rect;
    return d;
}

struct Variant {
    std::string name;
    ModuleToggles toggles;
};

Outcome e2e_directional(const CrossFamilyData& data, RunConfig run, Detector& keep_full_seed0, double setup_secs) {
    const auto t0 = Clock::now();
    run.train.max_epochs = 3;
    const std::vector<Variant> variants{
        {"full", {true, true}}, {"baseline", {false, false}}, {"bs-only", {true, false}}, {"refinement-only", {false, true}}};
    std::map<std::string, std::vector<double>> auc;
    std::cout << "  train frames " << data.train.size() << " (family A), val " << data.val.size() << ", test "
              << data.test_b.size() << " (family B)\n";
    for (uint64_t seed = 0; seed < 5; ++seed) {
        std::cout << "  seed " << seed << ":";
        for (const auto& v : variants) {
            auto cfg = run.train;
            cfg.seed = seed;
            cfg.model.toggles = v.toggles;
            auto result = train(cfg, data.train, data.val);
            const double a = evaluate(result.model, data.test_b, cfg.max_fpr).auc;
            auc[v.name].push_back(a);
            std::cout << "  " << v.name << " " << fmt(a) << std::flush;
            if (seed == 0 && v.name == "full") keep_full_seed0 = result.model;
        }
        std::cout << '\n';
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double secs = seconds_since(t0) + setup_secs;
    bool ok = mean(auc["full"]) >= mean(auc["baseline"]) && secs <= 15 * 60;
    std::string detail = "mean AUC on B: full " + fmt(mean(auc["full"])) + ", baseline " + fmt(mean(auc["baseline"])) +
                         ", bs-only " + fmt(mean(auc["bs-only"])) + ", refinement-only " +
                         fmt(mean(auc["refinement-only"]));
    for (const char* abl : {"bs-only", "refinement-only"}) {
        int wins = 0;
        for (std::size_t s = 0; s < 5; ++s) wins += auc["full"][s] >= auc[abl][s];
        ok = ok && wins >= 3;
        detail += "; full >= " + std::string(abl) + " in " + std::to_string(wins) + "/5 seeds";
    }
    return {ok, detail + "; " + fmt(secs, 4) + " s"};
}

Outcome gradcam_contracts(const CrossFamilyData& data, const RunConfig& run, Detector& trained) {
    torch::manual_seed(123);
    auto model = build_detector(run.train.model, 1);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        const int size = 32 + 16 * (i % 3);
        const auto h = grad_cam(model, torch::randn({3, size, size}) * (1 + i % 4), i % 2, -1 - i % 4);
        if (h.values.sizes() != torch::IntArrayRef({size, size}) || !torch::isfinite(h.values).all().item<bool>() ||
            h.values.min().item<double>() < 0.0 || h.values.max().item<double>() > 1.0)
            ++bad;
    }
    double sum = 0;
    int n = 0;
    for (int64_t i = 0; i < data.test_a.size(); ++i) {
        const auto& r = data.test_a.records[i];
        if (r.label != 1) continue;
        const auto it = data.regions.find(r.frame_path);
        if (it == data.regions.end()) continue;
        sum += region_mass_fraction(grad_cam(trained, data.test_a.images[i], 1), it->second);
        ++n;
    }
    const double mean = n ? sum / n : 0.0;
    return {bad == 0 && n > 0, std::to_string(100 - bad) + "/100 heatmaps satisfy shape and range; mean CAM mass in "
                                   "the artifact region " + fmt(mean) + " over " + std::to_string(n) +
                                   " fake test frames (target > 0.5, reported only)"};
}

Outcome determinism(const fs::path& work) {
    auto run = RunConfig::desk_profile();
    auto syn = run.data.synthetic;
    syn.num_videos_per_class = 4;
    syn.frames_per_video = 3;
    generate_synthetic(syn, work / "det_a");
    generate_synthetic(syn, work / "det_b");
    const auto ha = dataset_hash(work / "det_a" / kManifestFile), hb = dataset_hash(work / "det_b" / kManifestFile);

    auto data = small_dataset(work / "det_train", run);
    run.train.max_epochs = 2;
    run.train.seed = 17;
    const auto h1 = train(run.train, data.train, data.val).history.hash();
    const auto h2 = train(run.train, data.train, data.val).history.hash();
    return {ha == hb && h1 == h2, "dataset hash " + ha.substr(0, 12) + (ha == hb ? " == " : " != ") +
                                      hb.substr(0, 12) + "; history hash " + h1.substr(0, 12) +
                                      (h1 == h2 ? " == " : " != ") + h2.substr(0, 12)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::string work = (fs::temp_directory_path() / "fgfd_acceptance").string();
    std::vector<std::string> only;
    app.add_option("--work-dir", work, "Scratch directory (recreated)");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(work);
    fs::remove_all(dir);
    fs::create_directories(dir);
    torch::set_num_threads(1);
    set_warning_handler([](std::string_view) {});

    auto wanted = [&](const std::string& name) {
        return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
    };
    int failed = 0, ran = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
        if (!wanted(name)) return;
        ++ran;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    };

    report("loss-oracles", loss_oracles);
    report("gradient-checks", gradient_checks);
    report("temperature-schedule", temperature_schedule);
    report("weighted-sum-identities", [&] { return weighted_sum_identities(dir); });
    report("selection-invariants", selection_invariants);
    report("metrics-oracles", metrics_oracles);

    const auto run = RunConfig::desk_profile();
    std::optional<CrossFamilyData> cross;
    double setup_secs = 0;
    if (wanted("e2e-directional") || wanted("gradcam-contracts")) {
        const auto t0 = Clock::now();
        cross = cross_family_data(dir / "cross_family", run);
        setup_secs = seconds_since(t0);
    }
    Detector full_seed0{nullptr};
    report("e2e-directional", [&] { return e2e_directional(*cross, run, full_seed0, setup_secs); });
    report("gradcam-contracts", [&] {
        if (full_seed0.is_empty()) {
            auto cfg = run.train;
            cfg.max_epochs = 3;
            full_seed0 = train(cfg, cross->train, cross->val).model;
        }
        return gradcam_contracts(*cross, run, full_seed0);
    });
    report("determinism", [&] { return determinism(dir); });

    std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
