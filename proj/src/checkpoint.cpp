#include "fgfd/checkpoint.hpp"

#include "fgfd/errors.hpp"

namespace fgfd {

void save_checkpoint(const std::filesystem::path& dir, Detector& model, const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);
    torch::serialize::OutputArchive archive;
    model->save(archive);
    archive.save_to((dir / kCheckpointParams).string());
    nlohmann::json j = {{"format", kCheckpointFormat},
                        {"config", meta.config},
                        {"seed", meta.seed},
                        {"epoch", meta.epoch},
                        {"val_auc", meta.val_auc},
                        {"parameter_count", parameter_count(*model)},
                        {"dtype", model->parameters().front().scalar_type() == torch::kFloat64 ? "float64" : "float32"},
                        {"toggles", meta.config.train.model.toggles}};
    write_json(j, dir / kCheckpointMeta);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir / kCheckpointMeta) || !fs::exists(dir / kCheckpointParams))
        throw CheckpointError("not a checkpoint directory: " + dir.string());
    LoadedCheckpoint out;
    try {
        const auto j = read_json(dir / kCheckpointMeta);
        if (j.at("format").get<int>() != kCheckpointFormat) throw CheckpointError("unsupported checkpoint format");
        out.meta.config = j.at("config").get<RunConfig>();
        out.meta.seed = j.at("seed").get<uint64_t>();
        out.meta.epoch = j.at("epoch").get<int64_t>();
        out.meta.val_auc = j.at("val_auc").get<double>();
        out.meta.parameter_count = j.at("parameter_count").get<int64_t>();
        out.model = build_detector(out.meta.config.train.model, out.meta.seed);
        if (j.at("dtype").get<std::string>() == "float64") cast_floating(*out.model, torch::kFloat64);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint metadata: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
    }
    if (parameter_count(*out.model) != out.meta.parameter_count)
        throw CheckpointError("checkpoint parameter count does not match its architecture");
    try {
        torch::serialize::InputArchive archive;
        archive.load_from((dir / kCheckpointParams).string());
        out.model->load(archive);
    } catch (const c10::Error& e) {
        throw CheckpointError(std::string("cannot load checkpoint parameters: ") + e.what_without_backtrace());
    }
    out.model->eval();
    return out;
}

} // namespace fgfd
