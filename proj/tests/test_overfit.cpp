#include <gtest/gtest.h>

#include <numeric>

#include "mgvton/evaluation.hpp"
#include "mgvton/pipeline.hpp"
#include "mgvton/synthetic_data.hpp"
#include "mgvton/training.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;
namespace fs = std::filesystem;

// Single-triplet overfitting at the desk preset. One triplet yields four
// training pairs, so every epoch is one optimiser step.

namespace {

constexpr int kParsingSteps = 600;
constexpr int kGeoSteps = 200;
constexpr int kWarpSteps = 500;

struct Overfit {
  fs::path dir;
  std::vector<Triplet> triplets;
  std::vector<StageResult> results;
};

const Overfit& overfit() {
  static const Overfit o = [] {
    Overfit r;
    r.dir = scratch_dir("overfit");
    r.triplets = {render_triplet(TripletSpec::sample(triplet_seed(3, 0)), {64, 48}, "000000")};
    auto c = TrainConfig::desk();
    c.checkpoints = r.dir;
    c.epochs[Stage::kParsing] = kParsingSteps;
    c.epochs[Stage::kGeo] = kGeoSteps;
    c.epochs[Stage::kWarp] = kWarpSteps;
    c.epochs[Stage::kRefine] = 20;
    r.results = train_all(c, r.triplets);
    return r;
  }();
  return o;
}

std::vector<double> series(const StageResult& r, const std::string& component) {
  std::vector<double> out;
  for (const auto& m : r.metrics) {
    if (m.component == component) out.push_back(m.value);
  }
  return out;
}

double mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + from, v.begin() + to, 0.0) / static_cast<double>(to - from);
}

}  // namespace

TEST(Overfit, StepCountsMatchOnePairBatchPerEpoch) {
  const auto& o = overfit();
  ASSERT_EQ(o.results.size(), 4u);
  EXPECT_EQ(o.results[0].checkpoint.step, static_cast<std::uint64_t>(kParsingSteps));
  EXPECT_EQ(o.results[1].checkpoint.step, static_cast<std::uint64_t>(kGeoSteps));
  EXPECT_EQ(o.results[2].checkpoint.step, static_cast<std::uint64_t>(kWarpSteps));
}

TEST(Overfit, ParsingReachesNinetyEightPercent) {
  const auto& o = overfit();
  auto p = Pipeline::load(o.dir);
  const auto& t = o.triplets[0];
  const auto out = p.run(std::vector<TryOnRequest>{{t.source, t.clothes, t.clothes_mask, t.target.keypoints},
                                                   {t.target, t.clothes, t.clothes_mask, t.source.keypoints}});
  const ParsingMap* truth[] = {&t.target.parsing, &t.source.parsing};
  double hits = 0, n = 0;
  for (int i = 0; i < 2; ++i) {
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 48; ++x) hits += out[i].parsing.at(y, x) == truth[i]->at(y, x);
    }
    n += 64 * 48;
  }
  EXPECT_GE(hits / n, 0.98);
}

TEST(Overfit, GeoLossBelowFivePercent) {
  const auto& o = overfit();
  EXPECT_LT(geo_training_loss(o.dir, o.triplets), 0.05);
}

TEST(Overfit, WarpLossFallsAndCoarseResultMatches) {
  const auto& o = overfit();
  const auto l1 = series(o.results[2], "l1");
  ASSERT_EQ(l1.size(), static_cast<std::size_t>(kWarpSteps));
  EXPECT_LT(mean(l1, l1.size() - 50, l1.size()), mean(l1, 0, 50));
  EXPECT_LT(mean(l1, l1.size() - 50, l1.size()), mean(l1, l1.size() - 100, l1.size() - 50) * 1.05);

  auto p = Pipeline::load(o.dir);
  const auto& t = o.triplets[0];
  const auto out = p.run(TryOnRequest{t.source, t.clothes, t.clothes_mask, t.target.keypoints});
  EXPECT_GE(ssim(out.coarse, t.target.image), 0.85);
  EXPECT_GT(ssim(out.final_image, t.target.image), ssim(t.source.image, t.target.image));
}
