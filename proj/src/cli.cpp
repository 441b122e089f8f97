#include "fgfd/cli.hpp"

#include "fgfd/checkpoint.hpp"
#include "fgfd/config.hpp"
#include "fgfd/diagnostics.hpp"
#include "fgfd/errors.hpp"
#include "fgfd/explain.hpp"
#include "fgfd/synthetic.hpp"
#include "fgfd/trainer.hpp"

#include <CLI11.hpp>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

namespace fgfd::cli {

namespace fs = std::filesystem;

void parse_toggles(const std::string& spec, ModuleToggles& toggles) {
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const auto item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("toggle '" + item + "' must look like name=on|off");
            const auto name = item.substr(0, eq);
            const auto value = item.substr(eq + 1);
            bool on;
            if (value == "on" || value == "true" || value == "1")
                on = true;
            else if (value == "off" || value == "false" || value == "0")
                on = false;
            else
                throw ConfigError("toggle value '" + value + "' must be on or off");
            if (name == "bs")
                toggles.bs = on;
            else if (name == "refinement")
                toggles.refinement = on;
            else
                throw ConfigError("unknown toggle '" + name + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
}

namespace {

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_relative())
        if (const char* root = std::getenv(kRunRootEnv); root && *root) p = fs::path(root) / p;
    return p;
}

fs::path manifest_path_for(const std::string& data) {
    fs::path p(data);
    if (fs::is_directory(p)) p /= kManifestFile;
    if (!fs::exists(p)) throw DataError("data path not found: " + p.string());
    return p;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
};

int cmd_synth(const CommonOptions& common, const std::string& out_arg) {
    const auto cfg = load_run_config(common.config, common.overrides);
    const auto out = resolve_out(out_arg);
    const auto ds = generate_synthetic(cfg.data.synthetic, out);
    write_json(cfg, out / "run_config.json");
    std::cout << "wrote " << ds.manifest.records.size() << " frames to " << out.string() << '\n'
              << "manifest " << ds.manifest_path.string() << '\n'
              << "dataset hash " << dataset_hash(ds.manifest_path) << '\n';
    return ok;
}

int cmd_train(const CommonOptions& common, const std::string& data, const std::string& out_arg,
              const std::string& toggles) {
    auto cfg = load_run_config(common.config, common.overrides);
    if (!toggles.empty()) parse_toggles(toggles, cfg.train.model.toggles);
    const auto manifest_file = manifest_path_for(data);
    const auto out = resolve_out(out_arg);
    fs::create_directories(out);
    write_json(cfg, out / "run_config.json");

    const auto manifest = sample_frames(load_manifest(manifest_file), cfg.data.frame_counts, cfg.data.sampling_seed);
    const auto train_set = load_split(manifest, Split::train, cfg.data.train_families, cfg.data.preprocess);
    const auto val_set = load_split(manifest, Split::val, cfg.data.train_families, cfg.data.preprocess);
    std::cout << "train frames " << train_set.size() << ", val frames " << val_set.size() << ", toggles bs="
              << (cfg.train.model.toggles.bs ? "on" : "off")
              << " refinement=" << (cfg.train.model.toggles.refinement ? "on" : "off") << '\n';

    std::ofstream log(out / "metrics.jsonl");
    auto result = train(cfg.train, train_set, val_set, [&](const nlohmann::json& rec) {
        log << rec.dump() << '\n';
        if (rec["type"] == "epoch")
            std::cout << "epoch " << rec["epoch"] << "  T=" << rec["temperature"].get<double>()
                      << "  loss=" << rec["mean_total_loss"].get<double>()
                      << "  val_auc=" << rec["val"]["auc"].get<double>() << '\n';
    });
    CheckpointMeta meta{cfg, cfg.train.seed, result.history.best_epoch, result.history.best_val_auc, 0};
    save_checkpoint(out / "checkpoint", result.model, meta);
    write_json(result.history, out / "history.json");
    std::cout << "best epoch " << result.history.best_epoch << " (val auc " << result.history.best_val_auc
              << "), history hash " << result.history.hash() << '\n';
    return ok;
}

LoadedCheckpoint open_checkpoint(const std::string& path) {
    fs::path p(path);
    if (!fs::exists(p / kCheckpointMeta) && fs::exists(p / "checkpoint" / kCheckpointMeta)) p /= "checkpoint";
    return load_checkpoint(p);
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& cross,
             const std::string& out_arg) {
    auto ckpt = open_checkpoint(checkpoint);
    const auto& cfg = ckpt.meta.config;
    auto families = cfg.data.eval_families;
    if (!cross.empty()) {
        families.clear();
        std::size_t start = 0;
        while (true) {
            const auto comma = cross.find(',', start);
            auto f = cross.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!f.empty()) families.push_back(f);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    const auto manifest = load_manifest(manifest_path_for(data));
    const auto out = resolve_out(out_arg);
    fs::create_directories(out);
    const auto train_tag = join(cfg.data.train_families, "+");
    nlohmann::json matrix = nlohmann::json::object();
    for (const auto& fam : families) {
        const auto test_set = load_split(manifest, Split::test, {fam}, cfg.data.preprocess);
        if (!test_set.has_both_classes())
            throw ProtocolError("test split for family " + fam + " lacks real or fake frames");
        const auto report = evaluate(ckpt.model, test_set, cfg.train.max_fpr);
        nlohmann::json j = report;
        j["train_family"] = train_tag;
        j["test_family"] = fam;
        write_json(j, out / ("report_" + train_tag + "_" + fam + ".json"));
        matrix[fam] = report;
        std::cout << train_tag << " -> " << fam << ": auc " << report.auc << "  pauc@" << report.max_fpr << " "
                  << report.pauc << "  eer " << report.eer << "  (" << report.n_real << " real, " << report.n_fake
                  << " fake)\n";
    }
    write_json({{"train_family", train_tag}, {"results", matrix}}, out / "matrix.json");
    return ok;
}

int cmd_gradcam(const std::string& checkpoint, const std::string& data, const std::string& out_arg, int64_t limit) {
    auto ckpt = open_checkpoint(checkpoint);
    const auto& cfg = ckpt.meta.config;
    const auto manifest_file = manifest_path_for(data);
    const auto manifest = load_manifest(manifest_file);
    std::map<std::string, cv::Rect> regions;
    const auto ann_path = manifest_file.parent_path() / kAnnotationsFile;
    if (fs::exists(ann_path))
        for (const auto& a : load_annotations(ann_path)) regions[a.frame_path] = a.rect;
    const auto out = resolve_out(out_arg);
    fs::create_directories(out / "overlays");
    std::ofstream report(out / "overlap.jsonl");
    const auto max_images = limit > 0 ? limit : cfg.explain.max_images;
    int64_t done = 0;
    double fraction_sum = 0.0;
    int64_t with_region = 0;
    for (const auto& r : manifest.records) {
        if (done >= max_images) break;
        if (r.split != Split::test || r.label != 1) continue;
        const auto image = preprocess(manifest.resolve(r), cfg.data.preprocess);
        const auto heat = grad_cam(ckpt.model, image, cfg.explain.target_class, cfg.explain.block_index);
        auto bgr = cv::imread(manifest.resolve(r).string(), cv::IMREAD_COLOR);
        cv::Mat shown;
        cv::resize(bgr, shown, cv::Size(static_cast<int>(heat.values.size(1)), static_cast<int>(heat.values.size(0))));
        auto name = r.frame_path;
        std::replace(name.begin(), name.end(), '/', '_');
        overlay(heat, shown, cfg.explain.alpha, out / "overlays" / name);
        nlohmann::json rec = {{"frame_path", r.frame_path}, {"family", r.manipulation}, {"block", heat.source_block}};
        if (auto it = regions.find(r.frame_path); it != regions.end()) {
            const double sx = static_cast<double>(shown.cols) / bgr.cols;
            const double sy = static_cast<double>(shown.rows) / bgr.rows;
            const cv::Rect scaled(static_cast<int>(it->second.x * sx), static_cast<int>(it->second.y * sy),
                                  static_cast<int>(std::ceil(it->second.width * sx)),
                                  static_cast<int>(std::ceil(it->second.height * sy)));
            const double f = region_mass_fraction(heat, scaled);
            rec["region_mass_fraction"] = f;
            fraction_sum += f;
            ++with_region;
        }
        report << rec.dump() << '\n';
        ++done;
    }
    nlohmann::json summary = {{"images", done}, {"annotated", with_region}};
    summary["mean_region_mass_fraction"] = with_region ? nlohmann::json(fraction_sum / with_region) : nlohmann::json();
    write_json(summary, out / "summary.json");
    std::cout << "wrote " << done << " overlays";
    if (with_region) std::cout << ", mean CAM mass inside artifact region " << fraction_sum / with_region;
    std::cout << '\n';
    return ok;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Fine-grained facial forgery detection: synthetic data, training, evaluation, Grad-CAM"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string out, data, checkpoint, toggles, cross;
    int64_t limit = 0;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic forgery dataset");
    synth->add_option("--config", common.config, "Run config (JSON)");
    synth->add_option("--set", common.overrides, "Override a config field: section.key=value");
    synth->add_option("--out", out, "Output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train a detector");
    train_cmd->add_option("--config", common.config, "Run config (JSON)");
    train_cmd->add_option("--set", common.overrides, "Override a config field: section.key=value");
    train_cmd->add_option("--data", data, "Dataset directory or manifest.csv")->required();
    train_cmd->add_option("--out", out, "Run directory")->required();
    train_cmd->add_option("--toggles", toggles, "Module toggles, e.g. bs=off,refinement=off");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint per manipulation family");
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint or run directory")->required();
    eval_cmd->add_option("--data", data, "Dataset directory or manifest.csv")->required();
    eval_cmd->add_option("--cross", cross, "Comma-separated test families (default: config eval_families)");
    eval_cmd->add_option("--out", out, "Report directory")->required();

    auto* cam_cmd = app.add_subcommand("gradcam", "Write Grad-CAM overlays and region-overlap statistics");
    cam_cmd->add_option("--checkpoint", checkpoint, "Checkpoint or run directory")->required();
    cam_cmd->add_option("--data", data, "Dataset directory or manifest.csv")->required();
    cam_cmd->add_option("--out", out, "Output directory")->required();
    cam_cmd->add_option("--limit", limit, "Maximum number of fake test frames");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*synth) return cmd_synth(common, out);
        if (*train_cmd) return cmd_train(common, data, out, toggles);
        if (*eval_cmd) return cmd_eval(checkpoint, data, cross, out);
        if (*cam_cmd) return cmd_gradcam(checkpoint, data, out, limit);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const DataError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return config_error;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << '\n';
        return protocol_error;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return checkpoint_error;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return checkpoint_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}

} // namespace fgfd::cli
