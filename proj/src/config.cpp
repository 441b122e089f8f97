#include "fgfd/config.hpp"

#include "fgfd/errors.hpp"

#include <fstream>

namespace fgfd {

void to_json(nlohmann::json& j, const DataConfig& c) {
    j = {{"synthetic", c.synthetic},
         {"preprocess", c.preprocess},
         {"frame_counts", c.frame_counts},
         {"train_families", c.train_families},
         {"eval_families", c.eval_families},
         {"sampling_seed", c.sampling_seed}};
}

void from_json(const nlohmann::json& j, DataConfig& c) {
    c.synthetic = j.at("synthetic").get<SyntheticConfig>();
    c.preprocess = j.at("preprocess").get<PreprocessConfig>();
    c.frame_counts = j.at("frame_counts").get<FrameCounts>();
    c.train_families = j.at("train_families").get<std::vector<std::string>>();
    c.eval_families = j.at("eval_families").get<std::vector<std::string>>();
    c.sampling_seed = j.at("sampling_seed").get<uint64_t>();
}

void to_json(nlohmann::json& j, const ExplainConfig& c) {
    j = {{"block_index", c.block_index},
         {"target_class", c.target_class},
         {"alpha", c.alpha},
         {"max_images", c.max_images}};
}

void from_json(const nlohmann::json& j, ExplainConfig& c) {
    c.block_index = j.at("block_index").get<int>();
    c.target_class = j.at("target_class").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.max_images = j.at("max_images").get<int64_t>();
}

RunConfig RunConfig::paper_profile() {
    RunConfig c;
    c.profile = "paper";
    c.data.preprocess.size = 256;
    c.data.synthetic.image_size = 256;
    c.train.batch_size = 64;
    return c;
}

RunConfig RunConfig::desk_profile() {
    RunConfig c;
    c.profile = "desk";
    c.data.preprocess.size = 64;
    c.data.synthetic.image_size = 64;
    c.data.synthetic.num_videos_per_class = 20;
    c.data.synthetic.frames_per_video = 20;
    c.data.synthetic.families = {"A", "B", "C"};
    c.data.frame_counts = {20, 20, 20};
    auto& m = c.train.model;
    m.branches = {BackboneSpec{4, {16, 24, 32, 48}, {2, 2, 2, 2}, true}};
    m.fusion.common_dim = 32;
    m.selector.counts = {64, 32, 16, 8};
    m.embed_dim = 64;
    m.fc_width = 256;
    c.train.batch_size = 32;
    c.train.max_epochs = 8;
    c.train.early_stop_patience = 3;
    return c;
}

RunConfig RunConfig::for_profile(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "paper") return paper_profile();
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

void RunConfig::validate() const {
    data.synthetic.validate();
    train.validate();
    if (data.preprocess.size % train.model.branches.front().cumulative_stride() != 0)
        throw ConfigError("preprocess.size must be divisible by the backbone's cumulative stride");
    if (data.train_families.empty()) throw ConfigError("data.train_families must not be empty");
    if (explain.target_class < 0 || explain.target_class >= train.model.num_classes)
        throw ConfigError("explain.target_class out of range");
    if (explain.alpha < 0 || explain.alpha > 1) throw ConfigError("explain.alpha must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"profile", c.profile}, {"data", c.data}, {"train", c.train}, {"explain", c.explain}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    c.profile = j.at("profile").get<std::string>();
    c.data = j.at("data").get<DataConfig>();
    c.train = j.at("train").get<TrainConfig>();
    c.explain = j.at("explain").get<ExplainConfig>();
}

void strict_merge(nlohmann::json& base, const nlohmann::json& patch, const std::string& where) {
    if (!patch.is_object()) {
        base = patch;
        return;
    }
    if (!base.is_object() && !base.is_null())
        throw ConfigError("config key '" + where + "' is not a section");
    for (const auto& [key, value] : patch.items()) {
        const auto path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        auto& slot = base[key];
        // Optional sections default to null and accept a whole object.
        if (slot.is_null() || !value.is_object())
            slot = value;
        else
            strict_merge(slot, value, path);
    }
}

void apply_overrides(nlohmann::json& config, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' must look like key=value");
        const auto key = a.substr(0, eq);
        const auto text = a.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            value = text;
        }
        nlohmann::json patch = value;
        std::vector<std::string> parts;
        for (std::size_t start = 0;;) {
            const auto dot = key.find('.', start);
            parts.push_back(key.substr(start, dot - start));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = nlohmann::json{{*it, patch}};
        strict_merge(config, patch);
    }
}

RunConfig run_config_from_json(const nlohmann::json& user, const std::vector<std::string>& overrides) {
    if (!user.is_null() && !user.is_object()) throw ConfigError("config must be a JSON object");
    std::string profile = "desk";
    if (user.is_object() && user.contains("profile")) {
        if (!user["profile"].is_string()) throw ConfigError("profile must be a string");
        profile = user["profile"].get<std::string>();
    }
    for (const auto& o : overrides)
        if (o.rfind("profile=", 0) == 0) profile = o.substr(8);
    nlohmann::json merged = RunConfig::for_profile(profile);
    if (user.is_object()) strict_merge(merged, user);
    apply_overrides(merged, overrides);
    try {
        auto cfg = merged.get<RunConfig>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    nlohmann::json user;
    if (!path.empty()) {
        try {
            user = read_json(path);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    return run_config_from_json(user, overrides);
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace fgfd
