#include <gtest/gtest.h>

#include <cmath>

#include "mgvton/tps.hpp"
#include "mgvton/warp_gan.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;

namespace {

WarpGenerator small_warp_generator() {
  return WarpGenerator(GeneratorOptions::scaled(kWarpInputChannels, 3, 8, 3, 2, NormKind::kBatch), 5);
}

MultiScaleDiscriminator warp_discriminator() {
  return MultiScaleDiscriminator(DiscriminatorOptions::scaled(3 + kWarpConditioningChannels, 8));
}

torch::Tensor translation(double dx, double dy, Resolution r) {
  return TpsParams::translation_pixels(dx, dy, r).to_tensor(torch::kFloat64).unsqueeze(0);
}

}  // namespace

TEST(WarpGenerator, OutputBoundedInUnitInterval) {
  torch::manual_seed(0);
  auto g = small_warp_generator();
  const auto x = torch::randn({2, kWarpInputChannels, 32, 24}) * 5.0;
  const auto out = g->forward(x, TpsParams::identity().to_tensor().unsqueeze(0).expand({2, -1}));
  ASSERT_EQ(out.sizes(), (std::vector<int64_t>{2, 3, 32, 24}));
  EXPECT_GE(out.min().item<float>(), 0.0f);
  EXPECT_LE(out.max().item<float>(), 1.0f);
}

TEST(WarpGenerator, BatchPermutationPermutesOutputs) {
  torch::manual_seed(1);
  auto g = small_warp_generator();
  g->eval();
  const auto x = torch::rand({3, kWarpInputChannels, 32, 24});
  const auto perm = torch::tensor({2, 0, 1});
  const auto a = g->forward(x).index_select(0, perm);
  const auto b = g->forward(x.index_select(0, perm));
  EXPECT_LT(max_abs_diff(a, b), 1e-6);
}

TEST(WarpGenerator, ChannelMismatchRejected) {
  auto g = small_warp_generator();
  EXPECT_THROW(g->forward(torch::rand({1, 43, 32, 24})), std::invalid_argument);
  const auto t = torch::rand({1, 3, 32, 24});
  EXPECT_THROW(synthesize_coarse(g, t, t, torch::rand({1, 18, 32, 24}), torch::rand({1, 19, 32, 24})),
               std::invalid_argument);
}

TEST(WarpBottleneck, IdentityLeavesFeaturesUnchanged) {
  const auto f = torch::randn({2, 16, 8, 6}, torch::kFloat64);
  const auto id = TpsParams::identity().to_tensor(torch::kFloat64).unsqueeze(0).expand({2, -1});
  EXPECT_TRUE(torch::equal(warp_bottleneck(f, id, 5), f));
}

TEST(WarpBottleneck, IntegerTranslationShiftsEveryChannel) {
  const auto f = torch::randn({1, 4, 8, 6}, torch::kFloat64);
  const int dx = 2, dy = -1;
  const auto out = warp_bottleneck(f, translation(dx, dy, {8, 6}), 5);
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 6; ++x) {
        const int sy = y + dy, sx = x + dx;
        if (sy < 0 || sx < 0 || sy >= 8 || sx >= 6) continue;
        ASSERT_EQ(out[0][c][y][x].item<double>(), f[0][c][sy][sx].item<double>());
      }
    }
  }
}

TEST(WarpBottleneck, ZeroFeaturesStayZero) {
  const auto t = TpsParams::translation_pixels(0.3, -0.7, {8, 6}).to_tensor().unsqueeze(0);
  EXPECT_EQ(warp_bottleneck(torch::zeros({1, 8, 8, 6}), t, 5).abs().max().item<float>(), 0.0f);
}

TEST(WarpBottleneck, CommutesWithChannelSlicing) {
  const auto f = torch::randn({1, 8, 8, 6}, torch::kFloat64);
  const auto t = translation(1.5, 0.25, {8, 6});
  const auto full = warp_bottleneck(f, t, 5).slice(1, 2, 5);
  const auto sliced = warp_bottleneck(f.slice(1, 2, 5).contiguous(), t, 5);
  EXPECT_TRUE(torch::equal(full, sliced));
}

TEST(PerceptualExtractor, FrozenAndDeterministic) {
  PerceptualExtractor a(1234), b(1234), c(99);
  for (const auto& p : a->parameters()) EXPECT_FALSE(p.requires_grad());
  const auto x = torch::rand({1, 3, 32, 24});
  const auto fa = a->forward(x), fa2 = a->forward(x), fb = b->forward(x), fc = c->forward(x);
  ASSERT_EQ(fa.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE(torch::equal(fa[i], fa2[i]));
    EXPECT_TRUE(torch::equal(fa[i], fb[i]));
  }
  EXPECT_FALSE(torch::equal(fa[4], fc[4]));
}

TEST(PerceptualLoss, IdentityAndZeroWeights) {
  PerceptualExtractor e(1234);
  const auto x = torch::rand({2, 3, 32, 24});
  const auto y = torch::rand({2, 3, 32, 24});
  EXPECT_EQ(perceptual_loss(e, x, x, default_perceptual_weights()).item<double>(), 0.0);
  EXPECT_EQ(perceptual_loss(e, x, y, {0, 0, 0, 0, 0}).item<double>(), 0.0);
  const double xy = perceptual_loss(e, x, y, default_perceptual_weights()).item<double>();
  const double yx = perceptual_loss(e, y, x, default_perceptual_weights()).item<double>();
  EXPECT_GT(xy, 0.0);
  EXPECT_NEAR(xy, yx, 1e-7);
  EXPECT_THROW(perceptual_loss(e, x, torch::rand({2, 3, 16, 24}), default_perceptual_weights()),
               std::invalid_argument);
}

TEST(PerceptualLoss, SinglePixelPerturbationSweep) {
  PerceptualExtractor e(1234);
  e->to(torch::kFloat64);
  const auto x = torch::rand({1, 3, 32, 24}, torch::kFloat64) * 0.5 + 0.25;
  double prev = 1e9;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    auto y = x.clone();
    y[0][0][16][12] += eps;
    const double l = perceptual_loss(e, y, x, default_perceptual_weights()).item<double>();
    EXPECT_GT(l, 0.0) << eps;
    EXPECT_LT(l, prev) << eps;
    prev = l;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(PerceptualLoss, DefaultWeightsFavourDeeperTaps) {
  const auto a = default_perceptual_weights();
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(a[i], 1.0 / std::pow(2.0, 4 - i));
  for (double g : default_feature_weights()) EXPECT_EQ(g, 1.0);
}

TEST(FeatureMatching, IdentityAndZeroWeights) {
  torch::manual_seed(3);
  auto d = warp_discriminator();
  const auto x = torch::rand({2, 3, 32, 24});
  const auto y = torch::rand({2, 3, 32, 24});
  const auto cond = torch::rand({2, kWarpConditioningChannels, 32, 24});
  EXPECT_EQ(feature_matching_loss(d, x, x, cond, default_feature_weights()).item<double>(), 0.0);
  EXPECT_EQ(feature_matching_loss(d, x, y, cond, {0, 0, 0}).item<double>(), 0.0);
  EXPECT_GT(feature_matching_loss(d, x, y, cond, default_feature_weights()).item<double>(), 0.0);
}

TEST(FeatureMatching, MatchesIndependentRecomputation) {
  torch::manual_seed(4);
  auto d = warp_discriminator();
  d->to(torch::kFloat64);
  const auto x = torch::rand({1, 3, 32, 24}, torch::kFloat64);
  const auto y = torch::rand({1, 3, 32, 24}, torch::kFloat64);
  const auto cond = torch::rand({1, kWarpConditioningChannels, 32, 24}, torch::kFloat64);
  const std::array<double, 3> gammas{0.5, 1.0, 2.0};
  const double got = feature_matching_loss(d, x, y, cond, gammas).item<double>();

  // Features of each input computed in separate calls, scale by scale.
  const auto fx = d->forward(torch::cat({x, cond}, 1));
  const auto fy = d->forward(torch::cat({y, cond}, 1));
  double want = 0.0;
  for (std::size_t s = 0; s < fx.size(); ++s) {
    for (int i = 0; i < 3; ++i) {
      const auto diff = (fx[s].features[i] - fy[s].features[i]).abs();
      want += gammas[i] * diff.sum().item<double>() / static_cast<double>(diff.numel());
    }
  }
  want /= static_cast<double>(fx.size());
  EXPECT_NEAR(got, want, 1e-12);
}

TEST(WarpGanLoss, WeightedSum) {
  WarpGanComponents c{torch::tensor(0.7), torch::tensor(0.2), torch::tensor(0.4), torch::tensor(0.3)};
  EXPECT_EQ(warp_gan_generator_loss(c, {0, 0, 0, 0}).item<double>(), 0.0);
  EXPECT_NEAR(warp_gan_generator_loss(c, {0, 0, 0, 2}).item<double>(), 0.6, 1e-7);
  EXPECT_NEAR(warp_gan_generator_loss(c, {}).item<double>(), 0.7 + 10 * (0.2 + 0.4 + 0.3), 1e-5);
}

TEST(WarpGanLoss, WeightValidation) {
  EXPECT_NO_THROW(WarpGanLossWeights{}.validate());
  EXPECT_THROW((WarpGanLossWeights{0, 0, 0, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((WarpGanLossWeights{-1, 1, 1, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((WarpGanLossWeights{std::nan(""), 1, 1, 1}.validate()), std::invalid_argument);
}
