#pragma once

// SSIM against ground truth, an Inception-Score analogue over a toy
// classifier, and the test-set report.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "mgvton/data_model.hpp"
#include "mgvton/pipeline.hpp"
#include "mgvton/synthetic_data.hpp"

namespace mgvton {

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  // Normalised separable Gaussian taps (length `window`).
  std::vector<double> taps() const;
};

// ITU-R BT.601 luma.
std::vector<double> luma(const Image& image);

// Mean local SSIM over every window position fully inside the image, computed
// on luma. Throws std::invalid_argument for mismatched or too-small images.
double ssim(const Image& a, const Image& b, const SsimConfig& config = {});
double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int height, int width,
                  const SsimConfig& config = {});

struct ScoreSummary {
  double mean = 0.0;
  double std = 0.0;
};

// Posteriors are per-image class probability vectors. Image i goes to split
// i % splits; each split scores exp(mean_i KL(p_i || marginal)). Requires at
// least 2 * splits images.
ScoreSummary inception_score(const std::vector<std::vector<double>>& posteriors, int splits);

// Class = pattern * 3 + raised-arm count, 9 classes.
inline constexpr int kToyClasses = 9;

class ToyClassifierImpl : public torch::nn::Module {
 public:
  ToyClassifierImpl();
  torch::Tensor forward(const torch::Tensor& images);  // logits [N, 9]

 private:
  torch::nn::Sequential features_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ToyClassifier);

struct ToyClassifierTraining {
  int samples = 2160;
  int epochs = 40;
  int batch_size = 32;
  double lr = 0.002;
  std::uint64_t seed = 77;
};

// Renders labelled synthetic people at `resolution` and fits the classifier.
ToyClassifier train_toy_classifier(Resolution resolution, const ToyClassifierTraining& options = {});
// Loads `path` if present (and trained at `resolution`), otherwise trains and saves it.
ToyClassifier load_or_train_classifier(const std::filesystem::path& path, Resolution resolution);
std::vector<std::vector<double>> classify(ToyClassifier& classifier, const std::vector<Image>& images);

ScoreSummary inception_score(const std::vector<Image>& images, ToyClassifier& classifier, int splits);

struct ReportRow {
  std::string model;
  ScoreSummary ssim;
  ScoreSummary is;
  int n = 0;  // paired test triplets behind the SSIM column
};

struct EvaluationReport {
  std::vector<std::string> header_comments;
  std::vector<ReportRow> rows;

  std::string to_tsv() const;
};

inline constexpr int kDefaultIsSplits = 10;

// Person i of the test split wearing clothes j in the target pose of triplet k,
// with the true image rendered from the manifest seeds.
struct ShuffledCase {
  int person = 0;
  int clothes = 0;
  int pose = 0;
  TryOnRequest request;
  Image truth;
};

// Deterministic rounds of (i, i + r, i + 2r + 1) mod n combinations until
// `min_count` cases exist; combinations whose pose leaves the canvas are skipped.
std::vector<ShuffledCase> shuffled_cases(const DatasetManifest& manifest, const std::vector<Triplet>& tests,
                                         std::size_t min_count);

// Variants: full (final image), wo_render (coarse result), copy_source
// (reference image unchanged), ground_truth (true target).
std::vector<std::string> report_variants();

// SSIM on paired test triplets; IS on outputs for shuffled (person, clothes,
// pose) combinations of the test split. The classifier is cached as
// `<checkpoints>/classifier.ckpt`.
EvaluationReport evaluate_testset(const std::filesystem::path& checkpoints, const std::filesystem::path& dataset,
                                  const std::vector<std::string>& variants = report_variants(),
                                  int splits = kDefaultIsSplits);

}  // namespace mgvton
