#pragma once

// Stage II: coarse try-on synthesis with bottleneck feature warping.

#include <array>
#include <cstdint>

#include <torch/torch.h>

#include "mgvton/data_model.hpp"
#include "mgvton/networks.hpp"

namespace mgvton {

// warped clothes (3) + de-clothed reference (3) + pose (18) + parsing (20)
inline constexpr int kWarpInputChannels = 3 + 3 + kNumKeypoints + kNumLabels;
// pose + parsing, concatenated with the 3-channel image for the discriminator
inline constexpr int kWarpConditioningChannels = kNumKeypoints + kNumLabels;

torch::Tensor warp_generator_input(const torch::Tensor& warped_clothes, const torch::Tensor& declothed,
                                   const torch::Tensor& pose, const torch::Tensor& parsing);

// Warps every channel of a bottleneck grid with the same spline (normalised
// coordinates make the transform resolution-independent).
torch::Tensor warp_bottleneck(const torch::Tensor& features, const torch::Tensor& transform, int grid_size);

// The encoder sees inputs from both the target frame (clothes, pose, parsing)
// and the reference frame (de-clothed image), so the bottleneck is fused from
// the raw and the warped feature grids by a 1x1 conv before the residual blocks.
class WarpGeneratorImpl : public torch::nn::Module {
 public:
  WarpGeneratorImpl(const GeneratorOptions& options, int grid_size);

  // `transform` [N, 6 + 2K^2] or undefined (no bottleneck warp). Output in [0, 1].
  torch::Tensor forward(const torch::Tensor& input, const torch::Tensor& transform = {});
  torch::Tensor encode_bottleneck(const torch::Tensor& input);

  int grid_size() const { return grid_size_; }

 private:
  int grid_size_;
  ResnetGenerator net_{nullptr};
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(WarpGenerator);

torch::Tensor synthesize_coarse(WarpGenerator& generator, const torch::Tensor& warped_clothes,
                                const torch::Tensor& declothed, const torch::Tensor& pose,
                                const torch::Tensor& parsing, const torch::Tensor& transform = {});

// Fixed, randomly initialised five-block conv tower standing in for a
// pretrained VGG. Weights come from `seed` alone and never train.
class PerceptualExtractorImpl : public torch::nn::Module {
 public:
  explicit PerceptualExtractorImpl(std::uint64_t seed = 1234);
  std::vector<torch::Tensor> forward(const torch::Tensor& image);
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  torch::nn::ModuleList blocks_{nullptr};
};
TORCH_MODULE(PerceptualExtractor);

// alpha_i = 1 / 2^(4 - i)
std::array<double, 5> default_perceptual_weights();
std::array<double, 3> default_feature_weights();

torch::Tensor perceptual_loss(PerceptualExtractor& extractor, const torch::Tensor& candidate,
                              const torch::Tensor& reference, const std::array<double, 5>& alphas);

// Averaged over discriminator scales; features F_0..F_2 of each scale.
torch::Tensor feature_matching_loss(MultiScaleDiscriminator& discriminator, const torch::Tensor& candidate,
                                    const torch::Tensor& reference, const torch::Tensor& conditioning,
                                    const std::array<double, 3>& gammas);

struct WarpGanLossWeights {
  double adversarial = 1.0;
  double perceptual = 10.0;
  double feature = 10.0;
  double l1 = 10.0;

  void validate() const;
};

struct WarpGanComponents {
  torch::Tensor adversarial;
  torch::Tensor perceptual;
  torch::Tensor feature;
  torch::Tensor l1;
};

torch::Tensor warp_gan_generator_loss(const WarpGanComponents& components, const WarpGanLossWeights& weights);

}  // namespace mgvton
