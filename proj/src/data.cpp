#include "fgfd/data.hpp"

#include "fgfd/diagnostics.hpp"
#include "fgfd/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace fgfd {

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split '" + s + "'");
}

std::filesystem::path DatasetManifest::resolve(const FrameRecord& r) const {
    std::filesystem::path p(r.frame_path);
    return p.is_absolute() ? p : root / p;
}

void DatasetManifest::validate() const {
    std::set<std::string> paths;
    std::map<std::string, std::pair<int, Split>> videos;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto line = i + 2; // header is line 1
        if (!paths.insert(r.frame_path).second) throw ValidationError("duplicate frame_path " + r.frame_path, line);
        auto [it, inserted] = videos.try_emplace(r.video_id, r.label, r.split);
        if (!inserted && it->second.first != r.label)
            throw ValidationError("video " + r.video_id + " has more than one label", line);
        if (!inserted && it->second.second != r.split)
            throw ValidationError("video " + r.video_id + " spans more than one split", line);
    }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    DatasetManifest m;
    m.root = path.parent_path();
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty manifest", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) throw ValidationError("header must be '" + std::string(kManifestHeader) + "'", 1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_fields(line);
        if (f.size() != 5) throw ValidationError("expected 5 fields, got " + std::to_string(f.size()), line_no);
        FrameRecord r;
        r.frame_path = f[0];
        if (f[1] != "0" && f[1] != "1") throw ValidationError("label must be 0 or 1", line_no);
        r.label = f[1] == "1";
        r.video_id = f[2];
        try {
            r.split = parse_split(f[3]);
        } catch (const DataError&) {
            throw ValidationError("unknown split '" + f[3] + "'", line_no);
        }
        r.manipulation = f[4];
        if (r.frame_path.empty() || r.video_id.empty()) throw ValidationError("empty frame_path or video_id", line_no);
        m.records.push_back(std::move(r));
    }
    m.validate();
    if (check_files)
        for (std::size_t i = 0; i < m.records.size(); ++i)
            if (!std::filesystem::exists(m.resolve(m.records[i])))
                throw ValidationError("missing file " + m.records[i].frame_path, i + 2);
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : manifest.records) {
        if (r.frame_path.find(',') != std::string::npos || r.video_id.find(',') != std::string::npos)
            throw DataError("manifest fields may not contain commas: " + r.frame_path);
        out << r.frame_path << ',' << r.label << ',' << r.video_id << ',' << to_string(r.split) << ','
            << r.manipulation << '\n';
    }
}

int64_t FrameCounts::for_split(Split s) const {
    switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
    }
    return train;
}

void to_json(nlohmann::json& j, const FrameCounts& c) { j = {{"train", c.train}, {"val", c.val}, {"test", c.test}}; }

void from_json(const nlohmann::json& j, FrameCounts& c) {
    c.train = j.at("train").get<int64_t>();
    c.val = j.at("val").get<int64_t>();
    c.test = j.at("test").get<int64_t>();
}

DatasetManifest sample_frames(const DatasetManifest& manifest, const FrameCounts& counts, uint64_t seed) {
    if (counts.train < 1 || counts.val < 1 || counts.test < 1) throw ConfigError("frame counts must be >= 1");
    std::vector<std::string> video_order;
    std::map<std::string, std::vector<std::size_t>> frames;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        auto& v = frames[manifest.records[i].video_id];
        if (v.empty()) video_order.push_back(manifest.records[i].video_id);
        v.push_back(i);
    }
    std::vector<bool> keep(manifest.records.size(), false);
    std::size_t short_videos = 0;
    for (std::size_t vi = 0; vi < video_order.size(); ++vi) {
        const auto& idx = frames[video_order[vi]];
        const auto n = static_cast<int64_t>(idx.size());
        const auto k = counts.for_split(manifest.records[idx.front()].split);
        if (n <= k) {
            if (n < k) ++short_videos;
            for (auto i : idx) keep[i] = true;
            continue;
        }
        const double stride = static_cast<double>(n) / static_cast<double>(k);
        std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(vi)};
        std::mt19937_64 rng(seq);
        const double phase = std::uniform_real_distribution<double>(0.0, stride)(rng);
        for (int64_t j = 0; j < k; ++j) {
            const auto pos = std::min<int64_t>(n - 1, static_cast<int64_t>(std::floor(phase + j * stride)));
            keep[idx[pos]] = true;
        }
    }
    if (short_videos > 0)
        warn(std::to_string(short_videos) + " video(s) have fewer frames than requested; all of their frames are used");
    DatasetManifest out;
    out.root = manifest.root;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) out.records.push_back(manifest.records[i]);
    return out;
}

void to_json(nlohmann::json& j, const PreprocessConfig& c) {
    j = {{"size", c.size}, {"mean", c.mean}, {"std", c.std}};
}

void from_json(const nlohmann::json& j, PreprocessConfig& c) {
    c.size = j.at("size").get<int64_t>();
    c.mean = j.at("mean").get<std::array<double, 3>>();
    c.std = j.at("std").get<std::array<double, 3>>();
    if (c.size <= 0) throw ConfigError("preprocess: size must be > 0");
    for (double s : c.std)
        if (!(s > 0)) throw ConfigError("preprocess: std must be > 0");
}

torch::Tensor preprocess(const std::filesystem::path& image_path, const PreprocessConfig& cfg) {
    cv::Mat bgr = cv::imread(image_path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot decode image " + image_path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    const int s = static_cast<int>(cfg.size);
    if (rgb.rows != s || rgb.cols != s) cv::resize(rgb, rgb, cv::Size(s, s), 0, 0, cv::INTER_LINEAR);
    cv::Mat as_float;
    rgb.convertTo(as_float, CV_32FC3, 1.0 / 255.0);
    auto t = torch::from_blob(as_float.data, {s, s, 3}, torch::kFloat32).permute({2, 0, 1}).clone();
    for (int c = 0; c < 3; ++c) t[c] = (t[c] - cfg.mean[c]) / cfg.std[c];
    return t;
}

torch::Tensor denormalize(const torch::Tensor& image, const PreprocessConfig& cfg) {
    auto t = image.detach().to(torch::kFloat64).clone();
    for (int c = 0; c < 3; ++c) t[c] = t[c] * cfg.std[c] + cfg.mean[c];
    return (t * 255.0).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

bool FrameDataset::has_both_classes() const {
    if (!labels.defined() || labels.numel() == 0) return false;
    const auto fakes = labels.sum().item<int64_t>();
    return fakes > 0 && fakes < labels.numel();
}

FrameDataset load_split(const DatasetManifest& manifest, Split split, const std::vector<std::string>& families,
                        const PreprocessConfig& cfg) {
    FrameDataset ds;
    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        if (r.label == 1 && !families.empty() &&
            std::find(families.begin(), families.end(), r.manipulation) == families.end())
            continue;
        images.push_back(preprocess(manifest.resolve(r), cfg));
        labels.push_back(r.label);
        ds.records.push_back(r);
    }
    if (!images.empty()) {
        ds.images = torch::stack(images);
        ds.labels = torch::tensor(labels, torch::kInt64);
    } else {
        ds.images = torch::empty({0, 3, cfg.size, cfg.size});
        ds.labels = torch::empty({0}, torch::kInt64);
    }
    return ds;
}

} // namespace fgfd
