#include "fgfd/synthetic.hpp"

#include "fgfd/errors.hpp"
#include "fgfd/hashing.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace fgfd {

void SyntheticConfig::validate() const {
    if (num_videos_per_class < 1 || frames_per_video < 1) throw ConfigError("synthetic: counts must be >= 1");
    if (image_size < 16) throw ConfigError("synthetic: image_size must be >= 16");
    if (families.empty()) throw ConfigError("synthetic: need at least one family");
    for (const auto& f : families)
        if (f != "A" && f != "B" && f != "C") throw ConfigError("synthetic: unknown family tag '" + f + "'");
    if (!(artifact_region_size > 0.0 && artifact_region_size <= 0.5))
        throw ConfigError("synthetic: artifact_region_size must lie in (0, 0.5]");
    if (!(background_clutter_level >= 0.0 && background_clutter_level <= 1.0))
        throw ConfigError("synthetic: background_clutter_level must lie in [0, 1]");
    if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0))
        throw ConfigError("synthetic: split fractions must leave room for a test split");
}

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
    j = {{"num_videos_per_class", c.num_videos_per_class},
         {"frames_per_video", c.frames_per_video},
         {"image_size", c.image_size},
         {"families", c.families},
         {"artifact_region_size", c.artifact_region_size},
         {"background_clutter_level", c.background_clutter_level},
         {"train_fraction", c.train_fraction},
         {"val_fraction", c.val_fraction},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
    c.num_videos_per_class = j.at("num_videos_per_class").get<int>();
    c.frames_per_video = j.at("frames_per_video").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.families = j.at("families").get<std::vector<std::string>>();
    c.artifact_region_size = j.at("artifact_region_size").get<double>();
    c.background_clutter_level = j.at("background_clutter_level").get<double>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
}

void to_json(nlohmann::json& j, const RegionAnnotation& a) {
    j = {{"frame_path", a.frame_path}, {"video_id", a.video_id}, {"family", a.family},
         {"x", a.rect.x},              {"y", a.rect.y},          {"width", a.rect.width},
         {"height", a.rect.height}};
}

void from_json(const nlohmann::json& j, RegionAnnotation& a) {
    a.frame_path = j.at("frame_path").get<std::string>();
    a.video_id = j.at("video_id").get<std::string>();
    a.family = j.at("family").get<std::string>();
    a.rect = cv::Rect(j.at("x").get<int>(), j.at("y").get<int>(), j.at("width").get<int>(), j.at("height").get<int>());
}

namespace {

std::mt19937_64 make_rng(uint64_t seed, uint64_t a, uint64_t b = 0) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(a),
                      static_cast<uint32_t>(b), 0x5eedu};
    return std::mt19937_64(seq);
}

cv::Scalar random_color(std::mt19937_64& rng, int lo = 20, int hi = 235) {
    std::uniform_int_distribution<int> d(lo, hi);
    return cv::Scalar(d(rng), d(rng), d(rng));
}

struct ClutterShape {
    int kind;
    cv::Point a, b;
    int radius;
    cv::Scalar color;
};

// Fixed per source video; frames add jitter and noise on top.
struct Appearance {
    cv::Scalar bg_top, bg_bottom;
    std::vector<ClutterShape> clutter;
    cv::Point2d face_center;
    cv::Size face_axes;
    cv::Scalar skin;
    cv::Scalar eye_color, mouth_color;
    cv::Mat texture; // CV_16SC3 additive pattern
    cv::Point region_offset; // region top-left relative to the face center
    int region_side;
};

Appearance make_appearance(const SyntheticConfig& cfg, int video) {
    auto rng = make_rng(cfg.seed, 1000003ull * static_cast<uint64_t>(video) + 17);
    const int s = cfg.image_size;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Appearance a;
    a.bg_top = random_color(rng);
    a.bg_bottom = random_color(rng);
    const int shapes = static_cast<int>(std::lround(cfg.background_clutter_level * 14));
    std::uniform_int_distribution<int> pos(0, s - 1);
    for (int i = 0; i < shapes; ++i)
        a.clutter.push_back({static_cast<int>(rng() % 3), {pos(rng), pos(rng)}, {pos(rng), pos(rng)},
                             std::max(2, s / 16 + static_cast<int>(rng() % (s / 8 + 1))), random_color(rng)});
    a.face_center = {s / 2.0 + (u(rng) - 0.5) * s / 8.0, s / 2.0 + (u(rng) - 0.5) * s / 8.0};
    a.face_axes = {static_cast<int>(s * (0.24 + 0.06 * u(rng))), static_cast<int>(s * (0.32 + 0.06 * u(rng)))};
    std::uniform_int_distribution<int> tone(-25, 25);
    a.skin = cv::Scalar(120 + tone(rng), 150 + tone(rng), 200 + tone(rng));
    a.eye_color = cv::Scalar(40 + tone(rng), 40 + tone(rng), 40 + tone(rng));
    a.mouth_color = cv::Scalar(70 + tone(rng), 60 + tone(rng), 170 + tone(rng));
    a.texture = cv::Mat(s, s, CV_16SC3);
    cv::RNG cvrng(rng());
    cvrng.fill(a.texture, cv::RNG::NORMAL, 0, 6);
    a.region_side = std::max(2, static_cast<int>(std::lround(cfg.artifact_region_size * s)));
    const double jx = (u(rng) - 0.5) * a.face_axes.width * 0.6;
    const double jy = (u(rng) - 0.3) * a.face_axes.height * 0.6;
    a.region_offset = {static_cast<int>(std::lround(jx - a.region_side / 2.0)),
                       static_cast<int>(std::lround(jy - a.region_side / 2.0))};
    return a;
}

struct FrameJitter {
    int dx, dy;
    int brightness;
    uint64_t noise_seed;
};

FrameJitter make_jitter(const SyntheticConfig& cfg, int video, int frame) {
    auto rng = make_rng(cfg.seed, 2000003ull * static_cast<uint64_t>(video) + 29, static_cast<uint64_t>(frame));
    std::uniform_int_distribution<int> j(-2, 2), b(-6, 6);
    return {j(rng), j(rng), b(rng), rng()};
}

cv::Mat render_real(const SyntheticConfig& cfg, const Appearance& a, const FrameJitter& jit) {
    const int s = cfg.image_size;
    cv::Mat img(s, s, CV_8UC3);
    for (int y = 0; y < s; ++y) {
        const double t = static_cast<double>(y) / (s - 1);
        const cv::Scalar c = a.bg_top * (1.0 - t) + a.bg_bottom * t;
        img.row(y).setTo(c);
    }
    for (const auto& sh : a.clutter) {
        switch (sh.kind) {
        case 0: cv::rectangle(img, sh.a, sh.a + cv::Point(sh.radius, sh.radius), sh.color, cv::FILLED); break;
        case 1: cv::circle(img, sh.a, sh.radius, sh.color, cv::FILLED, cv::LINE_AA); break;
        default: cv::line(img, sh.a, sh.b, sh.color, 1 + sh.radius / 6, cv::LINE_AA); break;
        }
    }
    const cv::Point c(static_cast<int>(std::lround(a.face_center.x)) + jit.dx,
                      static_cast<int>(std::lround(a.face_center.y)) + jit.dy);
    cv::ellipse(img, c, a.face_axes, 0, 0, 360, a.skin, cv::FILLED, cv::LINE_AA);
    const int ex = a.face_axes.width * 2 / 5, ey = a.face_axes.height / 4;
    const cv::Size eye(std::max(1, a.face_axes.width / 6), std::max(1, a.face_axes.height / 10));
    cv::ellipse(img, c + cv::Point(-ex, -ey), eye, 0, 0, 360, a.eye_color, cv::FILLED, cv::LINE_AA);
    cv::ellipse(img, c + cv::Point(ex, -ey), eye, 0, 0, 360, a.eye_color, cv::FILLED, cv::LINE_AA);
    const cv::Size mouth(std::max(1, a.face_axes.width / 3), std::max(1, a.face_axes.height / 9));
    cv::ellipse(img, c + cv::Point(0, a.face_axes.height / 2), mouth, 0, 0, 360, a.mouth_color, cv::FILLED,
                cv::LINE_AA);

    cv::Mat wide;
    img.convertTo(wide, CV_16SC3);
    wide += a.texture;
    wide += cv::Scalar::all(jit.brightness);
    cv::Mat noise(s, s, CV_16SC3);
    cv::RNG(jit.noise_seed).fill(noise, cv::RNG::NORMAL, 0, 3);
    wide += noise;
    cv::Mat out;
    wide.convertTo(out, CV_8UC3);
    return out;
}

cv::Rect region_for(const SyntheticConfig& cfg, const Appearance& a, const FrameJitter& jit) {
    const int s = cfg.image_size;
    cv::Point tl(static_cast<int>(std::lround(a.face_center.x)) + jit.dx + a.region_offset.x,
                 static_cast<int>(std::lround(a.face_center.y)) + jit.dy + a.region_offset.y);
    tl.x = std::clamp(tl.x, 0, s - a.region_side);
    tl.y = std::clamp(tl.y, 0, s - a.region_side);
    return {tl.x, tl.y, a.region_side, a.region_side};
}

cv::Mat apply_artifact(const cv::Mat& real, const std::string& family, const cv::Rect& region) {
    cv::Mat fake = real.clone();
    if (family == "A") {
        cv::Mat blurred;
        cv::GaussianBlur(real, blurred, cv::Size(0, 0), 1.6);
        blurred(region).copyTo(fake(region));
    } else if (family == "B") {
        // Content pasted from a displaced, re-toned copy; its border forms a seam.
        const int shift = std::max(2, region.width / 4);
        cv::Mat shifted;
        cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, shift, 0, 1, shift);
        cv::warpAffine(real, shifted, m, real.size(), cv::INTER_NEAREST, cv::BORDER_REFLECT);
        shifted += cv::Scalar::all(14);
        shifted(region).copyTo(fake(region));
    } else if (family == "C") {
        cv::Mat patch = fake(region);
        cv::add(patch, cv::Scalar(12, -18, 28), patch);
    } else {
        throw ConfigError("synthetic: unknown family tag '" + family + "'");
    }
    return fake;
}

std::string video_name(const std::string& prefix, int v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", prefix.c_str(), v);
    return buf;
}

std::string frame_name(int f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d.png", f);
    return buf;
}

Split split_for(const SyntheticConfig& cfg, int video) {
    const int n = cfg.num_videos_per_class;
    int n_train = std::max(1, static_cast<int>(std::lround(n * cfg.train_fraction)));
    int n_val = static_cast<int>(std::lround(n * cfg.val_fraction));
    if (n >= 3) {
        n_val = std::max(1, n_val);
        n_train = std::min(n_train, n - n_val - 1);
    }
    if (video < n_train) return Split::train;
    if (video < n_train + n_val) return Split::val;
    return Split::test;
}

} // namespace

SyntheticPair render_pair(const SyntheticConfig& cfg, int video, int frame, const std::string& family) {
    cfg.validate();
    const auto a = make_appearance(cfg, video);
    const auto jit = make_jitter(cfg, video, frame);
    SyntheticPair p;
    p.real = render_real(cfg, a, jit);
    p.region = region_for(cfg, a, jit);
    p.fake = apply_artifact(p.real, family, p.region);
    return p;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "frames");
    SyntheticDataset ds;
    ds.manifest.root = out_dir;
    const std::vector<int> png_params{cv::IMWRITE_PNG_COMPRESSION, 6};
    auto write = [&](const cv::Mat& img, const std::string& video_id, int f) {
        const auto rel = fs::path("frames") / video_id / frame_name(f);
        fs::create_directories(out_dir / rel.parent_path());
        if (!cv::imwrite((out_dir / rel).string(), img, png_params))
            throw DataError("cannot write " + (out_dir / rel).string());
        return rel.generic_string();
    };
    for (int v = 0; v < cfg.num_videos_per_class; ++v) {
        const auto a = make_appearance(cfg, v);
        const auto split = split_for(cfg, v);
        const auto real_id = video_name("real", v);
        for (int f = 0; f < cfg.frames_per_video; ++f) {
            const auto jit = make_jitter(cfg, v, f);
            const auto real = render_real(cfg, a, jit);
            ds.manifest.records.push_back({write(real, real_id, f), 0, real_id, split, kRealFamily});
            const auto region = region_for(cfg, a, jit);
            for (const auto& fam : cfg.families) {
                const auto fake_id = video_name("fake" + fam, v);
                const auto path = write(apply_artifact(real, fam, region), fake_id, f);
                ds.manifest.records.push_back({path, 1, fake_id, split, fam});
                ds.annotations.push_back({path, fake_id, fam, region});
            }
        }
    }
    // Group records by video for readability: reals first, then each family.
    std::stable_sort(ds.manifest.records.begin(), ds.manifest.records.end(),
                     [](const FrameRecord& x, const FrameRecord& y) { return x.video_id < y.video_id; });
    ds.manifest.validate();
    ds.manifest_path = out_dir / kManifestFile;
    write_manifest(ds.manifest, ds.manifest_path);
    ds.annotations_path = out_dir / kAnnotationsFile;
    std::ofstream ann(ds.annotations_path);
    for (const auto& a : ds.annotations) ann << nlohmann::json(a).dump() << '\n';
    return ds;
}

std::vector<RegionAnnotation> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotations " + path.string());
    std::vector<RegionAnnotation> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<RegionAnnotation>());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed annotation: ") + e.what(), n);
        }
    }
    return out;
}

std::string dataset_hash(const std::filesystem::path& manifest_path) {
    const auto manifest = load_manifest(manifest_path);
    Sha256 sha;
    sha.update_file(manifest_path);
    for (const auto& r : manifest.records) {
        sha.update(r.frame_path);
        sha.update_file(manifest.resolve(r));
    }
    return sha.hex_digest();
}

} // namespace fgfd
