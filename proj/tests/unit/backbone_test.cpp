#include "fgfd/backbone.hpp"
#include "fgfd/errors.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace fgfd;

TEST(Backbone, SameSeedSameChecksum) {
    BackboneSpec spec;
    auto a = build_reference_backbone(spec, 7);
    auto b = build_reference_backbone(spec, 7);
    auto c = build_reference_backbone(spec, 8);
    EXPECT_EQ(parameter_checksum(*a), parameter_checksum(*b));
    EXPECT_NE(parameter_checksum(*a), parameter_checksum(*c));
}

TEST(Backbone, SpecInvariants) {
    BackboneSpec one{1, {16}, {2}, true};
    EXPECT_THROW(one.validate(), ConfigError);
    EXPECT_THROW(build_reference_backbone(one, 0), ConfigError);
    BackboneSpec mismatch{4, {16, 32, 64}, {2, 2, 2, 2}, true};
    EXPECT_THROW(mismatch.validate(), ConfigError);
    BackboneSpec zero_width{2, {16, 0}, {2, 2}, true};
    EXPECT_THROW(zero_width.validate(), ConfigError);
    EXPECT_EQ(BackboneSpec{}.cumulative_stride(), 16);
}

TEST(Backbone, DefaultShapes) {
    auto bb = build_reference_backbone(BackboneSpec{}, 0);
    auto fm = extract_features(bb, torch::randn({2, 3, 64, 64}));
    ASSERT_EQ(fm.size(), 4u);
    const std::vector<std::vector<int64_t>> expected{{2, 16, 32, 32}, {2, 32, 16, 16}, {2, 64, 8, 8}, {2, 128, 4, 4}};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(fm[i].sizes().vec(), expected[i]) << "block " << i;
}

TEST(Backbone, ShapeContractOverRandomSizes) {
    auto bb = build_reference_backbone(BackboneSpec{}, 1);
    bb->eval();
    std::mt19937 rng(3);
    for (int trial = 0; trial < 6; ++trial) {
        const int64_t b = 1 + rng() % 3, h = 16 * (1 + rng() % 4), w = 16 * (1 + rng() % 4);
        auto fm = extract_features(bb, torch::randn({b, 3, h, w}));
        int64_t s = 1;
        for (std::size_t i = 0; i < fm.size(); ++i) {
            s *= 2;
            EXPECT_EQ(fm[i].sizes().vec(), (std::vector<int64_t>{b, BackboneSpec{}.channels[i], h / s, w / s}));
        }
    }
}

TEST(Backbone, EmptyBatchAndIndivisibleInput) {
    auto bb = build_reference_backbone(BackboneSpec{}, 0);
    EXPECT_THROW(extract_features(bb, torch::zeros({0, 3, 64, 64})), EmptyBatchError);
    EXPECT_THROW(extract_features(bb, torch::zeros({1, 3, 60, 64})), ShapeError);
    EXPECT_THROW(extract_features(bb, torch::zeros({1, 1, 64, 64})), ShapeError);
}

TEST(Backbone, ZeroInputZeroBiasGivesZeroMaps) {
    auto bb = build_reference_backbone(BackboneSpec{}, 0);
    {
        torch::NoGradGuard g;
        bb->stage(3)->norm2->bias.zero_();
    }
    bb->eval();
    auto fm = extract_features(bb, torch::zeros({1, 3, 32, 32}));
    EXPECT_EQ(fm[3].abs().max().item<double>(), 0.0);
}

TEST(Backbone, DoublePrecisionBitwiseDeterminism) {
    torch::set_num_threads(1);
    auto a = build_reference_backbone(BackboneSpec{}, 5);
    auto b = build_reference_backbone(BackboneSpec{}, 5);
    a->to(torch::kFloat64);
    b->to(torch::kFloat64);
    auto x = torch::randn({2, 3, 32, 32}, testutil::f64());
    auto fa = extract_features(a, x);
    auto fb = extract_features(b, x);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_TRUE(torch::equal(fa[i], fb[i]));
}

TEST(Backbone, GradientsReachParameters) {
    auto bb = build_reference_backbone(BackboneSpec{}, 0);
    auto fm = extract_features(bb, torch::randn({2, 3, 32, 32}));
    fm[3].pow(2).sum().backward();
    for (const auto& p : bb->named_parameters())
        if (p.key().find("conv") != std::string::npos) {
            ASSERT_TRUE(p.value().grad().defined()) << p.key();
            EXPECT_GT(p.value().grad().abs().sum().item<double>(), 0.0) << p.key();
        }
}

TEST(Backbone, FrozenSpecDisablesGradients) {
    BackboneSpec spec;
    spec.trainable = false;
    auto bb = build_reference_backbone(spec, 0);
    for (const auto& p : bb->parameters()) EXPECT_FALSE(p.requires_grad());
}

TEST(Backbone, SaveLoadRoundTrip) {
    testutil::TempDir dir;
    auto bb = build_reference_backbone(BackboneSpec{}, 11);
    save_backbone(bb, 11, dir / "bb");
    ASSERT_TRUE(std::filesystem::exists(dir / "bb.pt"));
    std::ifstream in(dir / "bb.json");
    const auto meta = nlohmann::json::parse(in);
    EXPECT_EQ(meta.at("seed").get<uint64_t>(), 11u);
    EXPECT_EQ(meta.at("parameter_count").get<int64_t>(), parameter_count(*bb));
    EXPECT_EQ(meta.at("spec").get<BackboneSpec>().channels, BackboneSpec{}.channels);
    auto loaded = load_backbone(dir / "bb");
    EXPECT_EQ(parameter_checksum(*loaded), parameter_checksum(*bb));
    EXPECT_THROW(load_backbone(dir / "missing"), CheckpointError);
}
