#pragma once

// Learned mask-to-mask geometric matcher: two feature towers, a correlation
// layer and a regression head that predicts TPS parameters.

#include <array>

#include <torch/torch.h>

#include "mgvton/data_model.hpp"
#include "mgvton/tps.hpp"

namespace mgvton {

// [N, C, h, w] x [N, C, h, w] -> [N, h*w, h, w]. Channel k of output cell
// (i, j) is the cosine similarity between cell (i, j) of `a` and flattened
// cell k of `b`; vectors are normalised by max(|v|, 1e-8).
torch::Tensor correlate(const torch::Tensor& features_a, const torch::Tensor& features_b);

struct MatcherOptions {
  Resolution resolution{64, 48};
  int grid_size = kDefaultGridSize;
  int in_channels_a = 1;
  int in_channels_b = 1;
  std::array<int, 4> filters{32, 64, 128, 256};
  int regression_filters = 64;
};

// Four stride-2 3x3 conv blocks with batch norm and ReLU.
class FeatureTowerImpl : public torch::nn::Module {
 public:
  FeatureTowerImpl(int in_channels, const std::array<int, 4>& filters);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(FeatureTower);

class MatcherImpl : public torch::nn::Module {
 public:
  explicit MatcherImpl(const MatcherOptions& options);

  // Returns TPS parameters [N, 6 + 2K^2]. The head regresses control-point
  // offsets; a fixed linear solve turns them into spline parameters, so the
  // side conditions hold for every output. A zero-initialised last layer makes
  // the untrained model output the identity transform.
  torch::Tensor forward(const torch::Tensor& a, const torch::Tensor& b);

  const MatcherOptions& options() const { return options_; }
  int feature_height() const { return feature_h_; }
  int feature_width() const { return feature_w_; }

 private:
  MatcherOptions options_;
  int feature_h_ = 0;
  int feature_w_ = 0;
  FeatureTower tower_a_{nullptr};
  FeatureTower tower_b_{nullptr};
  torch::nn::Sequential regression_{nullptr};
  torch::nn::Linear offsets_{nullptr};
  torch::Tensor offsets_to_params_;  // [2K^2, 6 + 2K^2], buffer
  torch::Tensor identity_params_;    // [6 + 2K^2], buffer
};
TORCH_MODULE(Matcher);

TpsParams predict_tps(Matcher& model, const Mask& clothes_mask, const Mask& body_shape);

// mean |warp(mask, params) - target| over the batch.
torch::Tensor geometric_matching_loss(const torch::Tensor& params, const torch::Tensor& mask,
                                      const torch::Tensor& target_mask, int grid_size);
double geometric_matching_loss(const TpsParams& params, const Mask& clothes_mask, const Mask& target_clothes_mask);

}  // namespace mgvton
