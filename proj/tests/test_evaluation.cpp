#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mgvton/evaluation.hpp"
#include "mgvton/synthetic_data.hpp"
#include "mgvton/training.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;
namespace fs = std::filesystem;

namespace {

Image gradient_image(int h, int w, double lo, double hi) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = static_cast<float>(lo + (hi - lo) * (x + y) / double(h + w - 2));
      img.set_pixel(y, x, {v, v, v});
    }
  }
  return img;
}

Image invert(const Image& a) {
  Image out(a.height(), a.width());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      out.set_pixel(y, x, {1.0f - a.at(y, x, 0), 1.0f - a.at(y, x, 1), 1.0f - a.at(y, x, 2)});
    }
  }
  return out;
}

std::vector<double> one_hot(int k, int n) {
  std::vector<double> p(n, 0.0);
  p[k] = 1.0;
  return p;
}

}  // namespace

TEST(Ssim, WindowWeightsSumToOne) {
  const auto taps = SsimConfig{}.taps();
  ASSERT_EQ(taps.size(), 11u);
  double s = 0.0;
  for (double t : taps) s += t;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(taps[5] / taps[6], std::exp(1.0 / (2 * 1.5 * 1.5)), 1e-12);
}

TEST(Ssim, SelfSimilarityIsOne) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    const auto x = random_image(rng, 32, 24);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
  }
}

TEST(Ssim, SymmetricAndBounded) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto a = random_image(rng, 32, 24);
    const auto b = random_image(rng, 32, 24);
    const double ab = ssim(a, b), ba = ssim(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(std::abs(ab), 1.0);
  }
}

TEST(Ssim, InvertedStripesAreNegative) {
  Image s(32, 24);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 24; ++x) {
      const float v = x % 2 ? 0.8f : 0.2f;
      s.set_pixel(y, x, {v, v, v});
    }
  }
  EXPECT_LT(ssim(s, invert(s)), -0.9);
}

TEST(Ssim, SmoothGradientAgainstItselfShifted) {
  const auto g = gradient_image(32, 24, 0.25, 0.75);
  const auto h = gradient_image(32, 24, 0.3, 0.8);
  const double v = ssim(g, h);
  EXPECT_GT(v, 0.9);
  EXPECT_LT(v, 1.0);
}

TEST(Ssim, ConstantShiftMatchesLuminanceTerm) {
  const double a = 0.4, b = 0.5;
  const double c1 = 0.01 * 0.01;
  const double want = (2 * a * b + c1) / (a * a + b * b + c1);
  const auto x = Image(16, 16, static_cast<float>(a)), y = Image(16, 16, static_cast<float>(b));
  const double fa = static_cast<float>(a), fb = static_cast<float>(b);
  const double want_f = (2 * fa * fb + c1) / (fa * fa + fb * fb + c1);
  EXPECT_NEAR(ssim(x, y), want_f, 1e-9);
  EXPECT_NEAR(want_f, want, 1e-7);
}

TEST(Ssim, RejectsSmallOrMismatchedImages) {
  EXPECT_THROW(ssim(Image(10, 24), Image(10, 24)), std::invalid_argument);
  EXPECT_THROW(ssim(Image(16, 16), Image(16, 17)), std::invalid_argument);
}

TEST(InceptionScore, IdenticalPosteriorsGiveOne) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const std::vector<std::vector<double>> ps(20, p);
  const auto s = inception_score(ps, 1);
  EXPECT_EQ(s.mean, 1.0);
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(inception_score(ps, 10).mean, 1.0);
}

TEST(InceptionScore, DistinctOneHotClassesGiveN) {
  for (int n : {2, 5, 9}) {
    std::vector<std::vector<double>> ps;
    for (int k = 0; k < n; ++k) ps.push_back(one_hot(k, n));
    EXPECT_NEAR(inception_score(ps, 1).mean, n, 1e-6) << n;
  }
}

TEST(InceptionScore, DuplicatedListAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::vector<double>> ps;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> p(5);
    double s = 0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
    ps.push_back(p);
  }
  const auto base = inception_score(ps, 1);
  auto doubled = ps;
  doubled.insert(doubled.end(), ps.begin(), ps.end());
  EXPECT_NEAR(inception_score(doubled, 1).mean, base.mean, 1e-12);
  const auto base3 = inception_score(ps, 3);
  const auto dbl3 = inception_score(doubled, 3);
  EXPECT_NEAR(dbl3.mean, base3.mean, 1e-12);
  EXPECT_NEAR(dbl3.std, base3.std, 1e-12);
  auto shuffled = ps;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_NEAR(inception_score(shuffled, 1).mean, base.mean, 1e-12);
}

TEST(InceptionScore, TooFewImagesRejected) {
  const std::vector<std::vector<double>> ps(19, one_hot(0, 3));
  EXPECT_THROW(inception_score(ps, 10), std::invalid_argument);
  EXPECT_THROW(inception_score(ps, 0), std::invalid_argument);
}

TEST(ToyClassifier, PosteriorsSumToOneAndSeparateClasses) {
  auto clf = train_toy_classifier({64, 48});
  // Fresh renders not seen in training.
  std::vector<Image> images;
  std::vector<int> labels;
  for (std::uint64_t s = 0; s < 60; ++s) {
    const auto spec = TripletSpec::sample(mix_seed(424242, s));
    images.push_back(render_person(spec.person, spec.clothes, spec.source_pose, {64, 48}).image);
    labels.push_back(static_cast<int>(spec.clothes.pattern) * 3 + spec.source_pose.raised_arms(spec.person));
  }
  const auto post = classify(clf, images);
  int correct = 0;
  for (std::size_t i = 0; i < post.size(); ++i) {
    ASSERT_EQ(post[i].size(), static_cast<std::size_t>(kToyClasses));
    double s = 0;
    for (double v : post[i]) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
    correct += std::max_element(post[i].begin(), post[i].end()) - post[i].begin() == labels[i];
  }
  EXPECT_GE(correct, 48) << "classifier accuracy " << correct << "/60";
}

TEST(Report, TsvLayout) {
  EvaluationReport r;
  r.header_comments = {"note"};
  r.rows.push_back({"full", {0.5, 0.25}, {2.0, 0.125}, 4});
  EXPECT_EQ(r.to_tsv(),
            "# note\nmodel\tssim_mean\tssim_std\tis_mean\tis_std\tn\nfull\t0.500000\t0.250000\t2.000000\t0.125000\t4\n");
}

TEST(Report, EmptyTestSplitRejected) {
  const auto root = scratch_dir("eval_empty");
  make_dataset(3, 1, {64, 48}, root);
  EXPECT_THROW(evaluate_testset(root / "ckpt", root), std::invalid_argument);
}

TEST(Report, EndToEndOnTinyCheckpoints) {
  const auto root = scratch_dir("eval_run");
  make_dataset(12, 4, {64, 48}, root / "data");
  TrainConfig c;
  c.checkpoints = root / "ckpt";
  c.residual_blocks = 1;
  c.render_residual_blocks = 1;
  for (auto& [s, e] : c.epochs) e = 1;
  train_all(c, load_split(root / "data", "train"));

  const auto a = evaluate_testset(root / "ckpt", root / "data", report_variants(), 2);
  ASSERT_EQ(a.rows.size(), report_variants().size());
  for (const auto& row : a.rows) {
    EXPECT_TRUE(std::isfinite(row.ssim.mean) && std::isfinite(row.is.mean)) << row.model;
    EXPECT_EQ(row.n, 2);
  }
  const auto gt = std::find_if(a.rows.begin(), a.rows.end(), [](const ReportRow& r) { return r.model == "ground_truth"; });
  ASSERT_NE(gt, a.rows.end());
  EXPECT_NEAR(gt->ssim.mean, 1.0, 1e-9);

  const auto b = evaluate_testset(root / "ckpt", root / "data", report_variants(), 2);
  EXPECT_EQ(a.to_tsv(), b.to_tsv());
  EXPECT_THROW(evaluate_testset(root / "ckpt", root / "data", {"bogus"}, 2), std::invalid_argument);
}

TEST(ShuffledCases, DeterministicAndDistinctConditions) {
  const auto root = scratch_dir("shuffle");
  const auto m = make_dataset(24, 2, {64, 48}, root);
  const auto tests = load_split(root, "test");
  const auto a = shuffled_cases(m, tests, 8);
  const auto b = shuffled_cases(m, tests, 8);
  ASSERT_GE(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].truth, b[i].truth);
    EXPECT_NE(a[i].person, a[i].clothes);
  }
}
