#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mgvton/data_model.hpp"
#include "mgvton/image_io.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;

namespace {

KeypointSet single_keypoint(int slot, double x, double y) {
  KeypointSet k;
  k.points[slot] = {x, y, true};
  return k;
}

}  // namespace

TEST(PoseHeatmap, CentreDiscMatchesBruteForceCount) {
  const int h = 64, w = 48, r = 4;
  const double cx = 24, cy = 32;
  const auto hm = encode_pose_heatmap(single_keypoint(0, cx, cy), h, w, r);
  long expected = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) expected += in_disc(x, y, cx, cy, r);
  }
  EXPECT_EQ(expected, 49);  // lattice points with x^2 + y^2 <= 16
  EXPECT_EQ(hm.channel_sum(0), expected);
}

TEST(PoseHeatmap, InvisibleKeypointGivesZeroChannel) {
  KeypointSet k;
  const auto hm = encode_pose_heatmap(k, 32, 24, 4);
  for (int c = 0; c < kNumKeypoints; ++c) EXPECT_EQ(hm.channel_sum(c), 0);
}

TEST(PoseHeatmap, CornerDiscIsClipped) {
  const auto hm = encode_pose_heatmap(single_keypoint(3, 0, 0), 32, 24, 4);
  long expected = 0;
  for (int y = 0; y <= 4; ++y) {
    for (int x = 0; x <= 4; ++x) expected += in_disc(x, y, 0, 0, 4);
  }
  EXPECT_EQ(expected, 17);
  EXPECT_EQ(hm.channel_sum(3), expected);
}

TEST(PoseHeatmap, RandomKeypointsMatchBruteForce) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0.0, 47.0), uy(0.0, 63.0);
  for (int trial = 0; trial < 20; ++trial) {
    KeypointSet k;
    for (auto& p : k.points) p = {ux(rng), uy(rng), rng() % 4 != 0};
    const auto hm = encode_pose_heatmap(k, 64, 48, 4);
    for (int c = 0; c < kNumKeypoints; ++c) {
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 48; ++x) {
          const bool want = k.points[c].visible && in_disc(x, y, k.points[c].x, k.points[c].y, 4);
          ASSERT_EQ(hm.at(c, y, x), want ? 1 : 0);
        }
      }
    }
  }
}

TEST(PoseHeatmap, RejectsNonFiniteAndTinyCanvas) {
  EXPECT_THROW(encode_pose_heatmap(single_keypoint(0, std::nan(""), 3), 32, 24, 4), std::invalid_argument);
  EXPECT_THROW(encode_pose_heatmap(single_keypoint(0, std::numeric_limits<double>::infinity(), 3), 32, 24, 4),
               std::invalid_argument);
  EXPECT_THROW(encode_pose_heatmap(KeypointSet{}, 8, 24, 4), std::invalid_argument);
}

TEST(BodyMasks, AllBackgroundGivesZeroMasks) {
  const auto m = extract_body_masks(ParsingMap(64, 48));
  EXPECT_EQ(m.hair.sum(), 0.0);
  EXPECT_EQ(m.face.sum(), 0.0);
  EXPECT_EQ(m.body_shape.sum(), 0.0);
}

TEST(BodyMasks, HairOnlyParsing) {
  ParsingMap p(32, 24);
  for (int y = 2; y < 9; ++y) {
    for (int x = 5; x < 15; ++x) p.set(y, x, kHair);
  }
  const auto m = extract_body_masks(p);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) EXPECT_EQ(m.hair.at(y, x), p.at(y, x) == kHair ? 1.0f : 0.0f);
  }
  EXPECT_EQ(m.face.sum(), 0.0);
  EXPECT_EQ(m.body_shape.sum(), 0.0);
}

TEST(BodyMasks, HairAndFaceAreIdempotentIndicators) {
  std::mt19937_64 rng(9);
  const auto p = random_parsing(rng, 32, 24);
  const auto m = extract_body_masks(p);
  ParsingMap rebuilt(32, 24);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (m.hair.at(y, x) == 1.0f) rebuilt.set(y, x, kHair);
      if (m.face.at(y, x) == 1.0f) rebuilt.set(y, x, kFace);
    }
  }
  const auto again = extract_body_masks(rebuilt);
  EXPECT_EQ(again.hair, m.hair);
  EXPECT_EQ(again.face, m.face);
}

TEST(BodyMasks, BlockConstantMaskSurvivesDownsample) {
  // 256 x 192 with values constant on 16 x 16 blocks: the 16 x 12 area
  // average recovers every block value exactly.
  std::mt19937_64 rng(3);
  Mask blocks(16, 12);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 12; ++j) blocks.at(i, j) = static_cast<float>(rng() % 2);
  }
  Mask full(256, 192);
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 192; ++x) full.at(y, x) = blocks.at(y / 16, x / 16);
  }
  EXPECT_EQ(area_downsample(full, 16, 12), blocks);
  EXPECT_EQ(area_downsample(Mask(256, 192, 1.0f), 16, 12), Mask(16, 12, 1.0f));
  EXPECT_EQ(bilinear_resize(Mask(16, 12, 1.0f), 256, 192), Mask(256, 192, 1.0f));
}

TEST(BodyMasks, BodyShapeMatchesIndependentOracle) {
  std::mt19937_64 rng(11);
  const int h = 64, w = 48;
  ParsingMap p(h, w);
  for (int y = 10; y < 50; ++y) {
    for (int x = 12; x < 36; ++x) p.set(y, x, static_cast<std::uint8_t>(3 + rng() % 7));
  }
  p.set(5, 5, kHair);
  const auto m = extract_body_masks(p);

  // Area average over exact 4 x 4 cells, then half-pixel bilinear with clamping.
  double cells[16][12];
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 12; ++j) {
      double acc = 0.0;
      for (int y = 4 * i; y < 4 * i + 4; ++y) {
        for (int x = 4 * j; x < 4 * j + 4; ++x) acc += is_body_label(p.at(y, x)) ? 1.0 : 0.0;
      }
      cells[i][j] = acc / 16.0;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fy = std::clamp((y + 0.5) / 4.0 - 0.5, 0.0, 15.0);
      const double fx = std::clamp((x + 0.5) / 4.0 - 0.5, 0.0, 11.0);
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, 15), x1 = std::min(x0 + 1, 11);
      const double ty = fy - y0, tx = fx - x0;
      const double v = (1 - ty) * ((1 - tx) * cells[y0][x0] + tx * cells[y0][x1]) +
                       ty * ((1 - tx) * cells[y1][x0] + tx * cells[y1][x1]);
      ASSERT_NEAR(m.body_shape.at(y, x), v, 1e-6) << y << "," << x;
    }
  }
}

TEST(RemoveClothes, NoClothesLeavesImageUnchanged) {
  std::mt19937_64 rng(1);
  const auto img = random_image(rng, 32, 24);
  ParsingMap p(32, 24, kFace);
  EXPECT_EQ(remove_clothes(img, p), img);
}

TEST(RemoveClothes, AllClothesGivesConstantFill) {
  std::mt19937_64 rng(2);
  const auto img = random_image(rng, 32, 24);
  EXPECT_EQ(remove_clothes(img, ParsingMap(32, 24, kUpperClothes)), Image(32, 24, 0.5f));
}

TEST(RemoveClothes, ChangesExactlyTheClothesPixels) {
  std::mt19937_64 rng(4);
  const auto img = random_image(rng, 32, 24);
  const auto p = random_parsing(rng, 32, 24);
  const auto out = remove_clothes(img, p);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (p.at(y, x) == kUpperClothes) {
          EXPECT_EQ(out.at(y, x, c), 0.5f);
        } else {
          EXPECT_EQ(out.at(y, x, c), img.at(y, x, c));
        }
      }
    }
  }
}

TEST(ClothesMask, IndicatorOfUpperClothes) {
  EXPECT_EQ(clothes_mask_from_parsing(ParsingMap(16, 12)).sum(), 0.0);
  EXPECT_EQ(clothes_mask_from_parsing(ParsingMap(16, 12, kUpperClothes)), Mask(16, 12, 1.0f));
}

TEST(ClothesMask, ArgmaxOfSynthesisedScores) {
  torch::manual_seed(0);
  const auto scores = torch::randn({kNumLabels, 16, 12});
  const auto mask = clothes_mask_from_parsing(ParsingMap::from_scores(scores));
  const auto a = scores.accessor<float, 3>();
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 12; ++x) {
      int best = 0;
      for (int c = 1; c < kNumLabels; ++c) {
        if (a[c][y][x] > a[best][y][x]) best = c;
      }
      EXPECT_EQ(mask.at(y, x), best == kUpperClothes ? 1.0f : 0.0f);
    }
  }
}

TEST(DataModel, OneHotConsistentWithLabels) {
  std::mt19937_64 rng(6);
  const auto p = random_parsing(rng, 16, 12, 19);
  const auto oh = p.to_one_hot_tensor();
  EXPECT_TRUE(torch::equal(oh.argmax(0), p.to_label_tensor()));
  EXPECT_TRUE(torch::equal(oh.sum(0), torch::ones({16, 12})));
}

TEST(DataModel, ImageRejectsOutOfRange) {
  EXPECT_THROW(Image(2, 2, 1.5f), std::invalid_argument);
  auto t = torch::zeros({3, 2, 2});
  t[0][0][0] = std::nanf("");
  EXPECT_THROW(Image::from_tensor(t), std::invalid_argument);
}

TEST(DataModel, KeypointValidation) {
  EXPECT_NO_THROW(single_keypoint(0, 47, 63).validate({64, 48}));
  EXPECT_THROW(single_keypoint(0, 48, 10).validate({64, 48}), std::invalid_argument);
}

TEST(DataModel, PureFunctionsAreDeterministic) {
  std::mt19937_64 rng(8);
  const auto p = random_parsing(rng, 32, 24);
  const auto a = extract_body_masks(p), b = extract_body_masks(p);
  EXPECT_EQ(a.body_shape, b.body_shape);
}

TEST(ImageIo, PngRoundTrips) {
  const auto dir = scratch_dir("io");
  std::mt19937_64 rng(12);
  Image img(8, 6);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 6; ++x) img.set_pixel(y, x, {(rng() % 256) / 255.0f, (rng() % 256) / 255.0f, 0.0f});
  }
  write_image_png(dir / "a.png", img);
  EXPECT_EQ(read_image_png(dir / "a.png"), img);

  const auto p = random_parsing(rng, 8, 6, 19);
  write_parsing_png(dir / "p.png", p);
  EXPECT_EQ(read_parsing_png(dir / "p.png"), p);

  KeypointSet k;
  k.points[1] = {3.25, 4.5, true};
  write_keypoints(dir / "k.txt", k);
  EXPECT_EQ(read_keypoints(dir / "k.txt"), k);
}
