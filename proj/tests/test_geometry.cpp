#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mgvton/matcher.hpp"
#include "mgvton/tps.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;

namespace {

// Independent evaluation of T(p) straight from the definition.
Point2 eval_tps(const TpsParams& t, Point2 p) {
  double x = t.affine[0] + t.affine[1] * p.x + t.affine[2] * p.y;
  double y = t.affine[3] + t.affine[4] * p.x + t.affine[5] * p.y;
  for (std::size_t i = 0; i < t.control_points.size(); ++i) {
    const double dx = p.x - t.control_points[i].x;
    const double dy = p.y - t.control_points[i].y;
    const double r2 = dx * dx + dy * dy;
    const double u = r2 == 0.0 ? 0.0 : r2 * std::log(r2);
    x += t.weights_x[i] * u;
    y += t.weights_y[i] * u;
  }
  return {x, y};
}

std::vector<Point2> jitter(const std::vector<Point2>& pts, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  auto out = pts;
  for (auto& p : out) p = {p.x + u(rng), p.y + u(rng)};
  return out;
}

Matcher small_matcher(int h, int w) {
  MatcherOptions o;
  o.resolution = {h, w};
  o.filters = {4, 8, 8, 8};
  o.regression_filters = 8;
  return Matcher(o);
}

}  // namespace

TEST(Tps, KernelDefinition) {
  EXPECT_EQ(tps_kernel(0.0), 0.0);
  EXPECT_DOUBLE_EQ(tps_kernel(4.0), 4.0 * std::log(4.0));
}

TEST(Tps, IdentityTargetsGiveIdentityParams) {
  const auto grid = control_grid(5);
  const auto t = solve_tps(grid, grid);
  EXPECT_NEAR(t.affine[0], 0.0, 1e-10);
  EXPECT_NEAR(t.affine[1], 1.0, 1e-10);
  EXPECT_NEAR(t.affine[2], 0.0, 1e-10);
  EXPECT_NEAR(t.affine[3], 0.0, 1e-10);
  EXPECT_NEAR(t.affine[4], 0.0, 1e-10);
  EXPECT_NEAR(t.affine[5], 1.0, 1e-10);
  for (double w : t.weights_x) EXPECT_NEAR(w, 0.0, 1e-10);
  for (double w : t.weights_y) EXPECT_NEAR(w, 0.0, 1e-10);
}

TEST(Tps, ConstantOffsetIsPureTranslation) {
  const auto grid = control_grid(5);
  auto moved = grid;
  for (auto& p : moved) p = {p.x + 0.3, p.y - 0.2};
  const auto t = solve_tps(grid, moved);
  EXPECT_NEAR(t.affine[0], 0.3, 1e-10);
  EXPECT_NEAR(t.affine[3], -0.2, 1e-10);
  EXPECT_NEAR(t.affine[1], 1.0, 1e-10);
  EXPECT_NEAR(t.affine[5], 1.0, 1e-10);
  for (double w : t.weights_x) EXPECT_NEAR(w, 0.0, 1e-10);
  for (double w : t.weights_y) EXPECT_NEAR(w, 0.0, 1e-10);
}

TEST(Tps, InterpolatesRandomTargets) {
  std::mt19937_64 rng(21);
  const auto grid = control_grid(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto targets = jitter(grid, rng, 0.3);
    const auto t = solve_tps(grid, targets);
    EXPECT_LT(t.side_condition_residual(), 1e-8);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto p = eval_tps(t, grid[i]);
      EXPECT_NEAR(p.x, targets[i].x, 1e-6);
      EXPECT_NEAR(p.y, targets[i].y, 1e-6);
      const auto q = t.map(grid[i]);
      EXPECT_NEAR(q.x, p.x, 1e-9);
      EXPECT_NEAR(q.y, p.y, 1e-9);
    }
  }
}

TEST(Tps, RegularizationRelaxesInterpolation) {
  std::mt19937_64 rng(22);
  const auto grid = control_grid(5);
  const auto targets = jitter(grid, rng, 0.3);
  const auto t = solve_tps(grid, targets, 0.5);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(t.map(grid[i]).x - targets[i].x));
  EXPECT_GT(worst, 1e-6);
}

TEST(Tps, DegenerateSourcesRejected) {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_THROW(solve_tps(line, line), SolverError);
  const std::vector<Point2> dup{{0, 0}, {1, 0}, {0, 1}, {0, 1}};
  EXPECT_THROW(solve_tps(dup, dup), SolverError);
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  EXPECT_THROW(solve_tps(two, two), std::exception);
}

TEST(Tps, FlatAndFileRoundTrip) {
  std::mt19937_64 rng(23);
  const auto t = solve_tps(control_grid(5), jitter(control_grid(5), rng, 0.2));
  const auto flat = t.flat();
  ASSERT_EQ(static_cast<int>(flat.size()), tps_param_count(5));
  EXPECT_EQ(TpsParams::from_flat(5, flat).flat(), flat);

  const auto dir = scratch_dir("tps");
  write_tps_params(dir / "t.bin", t);
  const auto bytes = read_bytes(dir / "t.bin");
  EXPECT_EQ(bytes.size(), 16u + 4u * flat.size());
  const auto back = read_tps_params(dir / "t.bin");
  ASSERT_EQ(back.grid_size, 5);
  const auto f2 = back.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(f2[i], static_cast<double>(static_cast<float>(flat[i])));
}

TEST(Warp, IdentityReproducesInputExactly) {
  std::mt19937_64 rng(31);
  const auto img = random_image(rng, 64, 48);
  const auto out = warp_image(img, TpsParams::identity());
  for (int y = 1; y < 63; ++y) {
    for (int x = 1; x < 47; ++x) {
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(y, x, c));
    }
  }
}

TEST(Warp, IntegerTranslationMatchesShiftOracle) {
  std::mt19937_64 rng(32);
  const auto img = random_image(rng, 64, 48);
  for (const auto [dx, dy] : std::vector<std::pair<int, int>>{{3, 0}, {0, -5}, {-2, 4}, {7, 7}}) {
    const auto out = warp_image(img, TpsParams::translation_pixels(dx, dy, {64, 48}));
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 48; ++x) {
        const int sy = y + dy, sx = x + dx;
        if (sy < 0 || sx < 0 || sy >= 64 || sx >= 48) continue;
        for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(sy, sx, c)) << dx << "," << dy;
      }
    }
  }
}

TEST(Warp, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(33);
  const auto t = solve_tps(control_grid(5), jitter(control_grid(5), rng, 0.3));
  EXPECT_EQ(warp_image(Image(32, 24), t), Image(32, 24));
  EXPECT_EQ(warp_mask(Mask(32, 24), t), Mask(32, 24));
}

TEST(Warp, LinearInIntensities) {
  std::mt19937_64 rng(34);
  const auto t = solve_tps(control_grid(5), jitter(control_grid(5), rng, 0.25));
  auto grid_params = t.to_tensor(torch::kFloat64).unsqueeze(0);
  const auto x = torch::rand({1, 3, 32, 24}, torch::kFloat64);
  const auto y = torch::rand({1, 3, 32, 24}, torch::kFloat64);
  const double a = 0.7, b = -1.3;
  const auto lhs = warp_tensor(a * x + b * y, grid_params, 5);
  const auto rhs = a * warp_tensor(x, grid_params, 5) + b * warp_tensor(y, grid_params, 5);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Warp, OutOfBoundsReadsZero) {
  const auto img = Image(32, 24, 1.0f);
  const auto out = warp_image(img, TpsParams::translation_pixels(100, 0, {32, 24}));
  EXPECT_EQ(out, Image(32, 24));
}

TEST(Correlation, OrthonormalCellsGiveIdentityVolume) {
  // 2 x 2 grid, 4 channels: cell (i, j) holds basis vector e_{2i + j}.
  auto f = torch::zeros({1, 4, 2, 2});
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) f[0][2 * i + j][i][j] = 1.0;
  }
  const auto c = correlate(f, f);
  ASSERT_EQ(c.sizes(), (std::vector<int64_t>{1, 4, 2, 2}));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 4; ++k) EXPECT_EQ(c[0][k][i][j].item<float>(), k == 2 * i + j ? 1.0f : 0.0f);
    }
  }
}

TEST(Correlation, ZeroFeaturesGiveZero) {
  const auto a = torch::randn({2, 5, 3, 2});
  EXPECT_EQ(correlate(a, torch::zeros_like(a)).abs().max().item<float>(), 0.0f);
}

TEST(Correlation, MatchesBruteForceAndIsSymmetric) {
  torch::manual_seed(4);
  const int h = 3, w = 2, c = 6;
  const auto a = torch::randn({1, c, h, w}, torch::kFloat64);
  const auto b = torch::randn({1, c, h, w}, torch::kFloat64);
  const auto ab = correlate(a, b);
  const auto ba = correlate(b, a);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int p = 0; p < h; ++p) {
        for (int q = 0; q < w; ++q) {
          double dot = 0, na = 0, nb = 0;
          for (int k = 0; k < c; ++k) {
            const double va = a[0][k][i][j].item<double>(), vb = b[0][k][p][q].item<double>();
            dot += va * vb;
            na += va * va;
            nb += vb * vb;
          }
          const double want = dot / (std::sqrt(na) * std::sqrt(nb));
          EXPECT_NEAR(ab[0][p * w + q][i][j].item<double>(), want, 1e-12);
          EXPECT_NEAR(ba[0][i * w + j][p][q].item<double>(), ab[0][p * w + q][i][j].item<double>(), 1e-12);
          EXPECT_LE(std::abs(want), 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST(Matcher, FreshModelOutputsIdentity) {
  torch::manual_seed(0);
  auto m = small_matcher(32, 24);
  const auto out = m->forward(torch::rand({2, 1, 32, 24}), torch::rand({2, 1, 32, 24}));
  ASSERT_EQ(out.sizes(), (std::vector<int64_t>{2, tps_param_count(5)}));
  const auto id = TpsParams::identity(5).to_tensor().unsqueeze(0).expand({2, -1});
  EXPECT_LT(max_abs_diff(out, id), 1e-6);
}

TEST(Matcher, BatchIsOrderAligned) {
  torch::manual_seed(1);
  auto m = small_matcher(32, 24);
  // Move the head off its zero start so outputs depend on the inputs.
  for (auto& p : m->parameters()) p.data().add_(torch::randn_like(p) * 0.05);
  m->eval();
  const auto a = torch::rand({2, 1, 32, 24});
  const auto b = torch::rand({2, 1, 32, 24});
  const auto both = m->forward(a, b);
  const auto first = m->forward(a.slice(0, 0, 1), b.slice(0, 0, 1));
  const auto second = m->forward(a.slice(0, 1, 2), b.slice(0, 1, 2));
  EXPECT_LT(max_abs_diff(both[0], first[0]), 1e-5);
  EXPECT_LT(max_abs_diff(both[1], second[0]), 1e-5);
  EXPECT_GT(max_abs_diff(both[0], both[1]), 1e-6);
}

TEST(Matcher, OutputsSatisfySideConditions) {
  torch::manual_seed(2);
  auto m = small_matcher(32, 24);
  for (auto& p : m->parameters()) p.data().add_(torch::randn_like(p) * 0.05);
  m->eval();
  const auto out = m->forward(torch::rand({1, 1, 32, 24}), torch::rand({1, 1, 32, 24}));
  EXPECT_LT(TpsParams::from_tensor(5, out[0]).side_condition_residual(), 1e-5);
}

TEST(Matcher, GradientsReachEveryParameter) {
  torch::manual_seed(3);
  auto m = small_matcher(32, 24);
  for (auto& p : m->parameters()) p.data().add_(torch::randn_like(p) * 0.05);
  const auto params = m->forward(torch::rand({2, 1, 32, 24}), torch::rand({2, 1, 32, 24}));
  geometric_matching_loss(params, torch::rand({2, 1, 32, 24}), torch::rand({2, 1, 32, 24}), 5).backward();
  for (const auto& p : m->named_parameters()) {
    ASSERT_TRUE(p.value().grad().defined()) << p.key();
    EXPECT_GT(p.value().grad().abs().sum().item<double>(), 0.0) << p.key();
  }
}

TEST(Matcher, PredictTpsWrapsForward) {
  torch::manual_seed(0);
  auto m = small_matcher(32, 24);
  const auto t = predict_tps(m, Mask(32, 24, 1.0f), Mask(32, 24, 0.5f));
  EXPECT_EQ(t.grid_size, 5);
  EXPECT_NEAR(t.affine[1], 1.0, 1e-6);
}

TEST(GeoLoss, AnalyticCases) {
  Mask m(32, 24);
  for (int y = 8; y < 20; ++y) {
    for (int x = 6; x < 18; ++x) m.at(y, x) = 1.0f;
  }
  Mask inv(32, 24);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) inv.at(y, x) = 1.0f - m.at(y, x);
  }
  EXPECT_EQ(geometric_matching_loss(TpsParams::identity(), m, m), 0.0);
  EXPECT_DOUBLE_EQ(geometric_matching_loss(TpsParams::identity(), m, inv), 1.0);

  // Shifted target: output(p) = input(p + d) puts the block at (y - dy, x - dx).
  const int dx = 3, dy = -2;
  Mask shifted(32, 24);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) {
      const int sy = y + dy, sx = x + dx;
      if (sy >= 0 && sx >= 0 && sy < 32 && sx < 24) shifted.at(y, x) = m.at(sy, sx);
    }
  }
  EXPECT_EQ(geometric_matching_loss(TpsParams::translation_pixels(dx, dy, {32, 24}), m, shifted), 0.0);
}
