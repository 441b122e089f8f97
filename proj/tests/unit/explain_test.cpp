#include "fgfd/errors.hpp"
#include "fgfd/explain.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

using namespace fgfd;
using fgfd::testutil::TempDir;

namespace {

ModelConfig tiny_model() {
    ModelConfig m;
    m.branches = {BackboneSpec{4, {4, 6, 8, 8}, {2, 2, 2, 2}, true}};
    m.fusion.common_dim = 8;
    m.selector.counts = {32, 16, 8, 2};
    m.embed_dim = 8;
    m.fc_width = 16;
    return m;
}

Heatmap ramp(int h, int w) {
    auto v = torch::arange(h * w, torch::kFloat64).view({h, w}) / (h * w - 1);
    return {v, 3, 1};
}

} // namespace

TEST(GradCam, ShapeAndRangeOnRandomInputs) {
    auto model = build_detector(tiny_model(), 0);
    for (int i = 0; i < 10; ++i) {
        auto h = grad_cam(model, torch::randn({3, 32, 32}), i % 2);
        EXPECT_EQ(h.values.sizes().vec(), (std::vector<int64_t>{32, 32}));
        EXPECT_GE(h.values.min().item<double>(), 0.0);
        EXPECT_LE(h.values.max().item<double>(), 1.0);
        EXPECT_EQ(h.source_block, 3);
    }
    EXPECT_EQ(grad_cam(model, torch::randn({3, 32, 32}), 1, 1).source_block, 1);
}

TEST(GradCam, ZeroModelGivesZeroHeatmap) {
    auto model = build_detector(tiny_model(), 0);
    {
        torch::NoGradGuard g;
        for (auto& p : model->parameters()) p.zero_();
    }
    auto h = grad_cam(model, torch::randn({3, 32, 32}), 1);
    EXPECT_EQ(h.values.abs().max().item<double>(), 0.0);
    EXPECT_EQ(region_mass_fraction(h, {0, 0, 8, 8}), 0.0);
}

TEST(GradCam, InvalidArguments) {
    auto model = build_detector(tiny_model(), 0);
    auto x = torch::randn({3, 32, 32});
    EXPECT_THROW(grad_cam(model, x, 1, 4), ModelError);
    EXPECT_THROW(grad_cam(model, x, 1, -5), ModelError);
    EXPECT_THROW(grad_cam(model, x, 2), ModelError);
    EXPECT_THROW(grad_cam(model, x, 1, -1, 1), ModelError);
    EXPECT_THROW(grad_cam(model, torch::randn({1, 3, 32, 32}), 1), ModelError);
    Detector none{nullptr};
    EXPECT_THROW(grad_cam(none, x, 1), ModelError);
}

TEST(RegionMass, Fractions) {
    Heatmap h{torch::zeros({10, 10}, torch::kFloat64), 0, 1};
    h.values.slice(0, 2, 4).slice(1, 2, 4).fill_(1.0);
    EXPECT_DOUBLE_EQ(region_mass_fraction(h, {2, 2, 2, 2}), 1.0);
    EXPECT_DOUBLE_EQ(region_mass_fraction(h, {2, 2, 1, 2}), 0.5);
    EXPECT_DOUBLE_EQ(region_mass_fraction(h, {50, 50, 3, 3}), 0.0);
    h.values.fill_(1.0);
    EXPECT_DOUBLE_EQ(region_mass_fraction(h, {8, 8, 5, 5}), 0.04); // clipped to 2x2
}

TEST(Overlay, AlphaEndpoints) {
    auto h = ramp(16, 24);
    cv::Mat img(16, 24, CV_8UC3, cv::Scalar(10, 200, 90));
    cv::Mat same = render_overlay(h, img, 0.0);
    EXPECT_EQ(cv::norm(same, img, cv::NORM_INF), 0.0);
    cv::Mat gray(16, 24, CV_8UC1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 24; ++x) gray.at<uint8_t>(y, x) = static_cast<uint8_t>(std::lround(h.values[y][x].item<double>() * 255));
    cv::Mat jet;
    cv::applyColorMap(gray, jet, cv::COLORMAP_JET);
    EXPECT_EQ(cv::norm(render_overlay(h, img, 1.0), jet, cv::NORM_INF), 0.0);
    EXPECT_THROW(render_overlay(h, img, 1.5), ConfigError);
    EXPECT_THROW(render_overlay(ramp(8, 8), img, 0.5), ShapeError);
}

TEST(Overlay, WritesFileOrFails) {
    TempDir dir;
    auto h = ramp(16, 24);
    cv::Mat img(16, 24, CV_8UC3, cv::Scalar(0, 0, 0));
    overlay(h, img, 0.5, dir / "o.png");
    auto back = cv::imread((dir / "o.png").string());
    EXPECT_EQ(back.rows, 16);
    EXPECT_EQ(back.cols, 24);
    EXPECT_THROW(overlay(h, img, 0.5, dir / "missing" / "o.png"), DataError);
}
