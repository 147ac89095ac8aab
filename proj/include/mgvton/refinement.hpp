#pragma once

// Stage III: composition mask prediction and blending.

#include <torch/torch.h>

#include "mgvton/data_model.hpp"
#include "mgvton/networks.hpp"
#include "mgvton/warp_gan.hpp"

namespace mgvton {

// warped clothes (3) + coarse result (3) + pose (18)
inline constexpr int kRenderInputChannels = 3 + 3 + kNumKeypoints;

// Keeps the squashed mask away from exact 0 and 1 even when the sigmoid
// saturates in float.
inline constexpr double kMaskMargin = 1e-6;

class RenderGeneratorImpl : public torch::nn::Module {
 public:
  explicit RenderGeneratorImpl(const GeneratorOptions& options);
  // [N, 24, H, W] -> mask [N, 1, H, W] in (0, 1)
  torch::Tensor forward(const torch::Tensor& input);

 private:
  ResnetGenerator net_{nullptr};
};
TORCH_MODULE(RenderGenerator);

torch::Tensor render_input(const torch::Tensor& warped_clothes, const torch::Tensor& coarse, const torch::Tensor& pose);

// mask * warped + (1 - mask) * coarse, mask broadcast over channels.
torch::Tensor compose(const torch::Tensor& warped_clothes, const torch::Tensor& coarse, const torch::Tensor& mask);
Image compose(const Image& warped_clothes, const Image& coarse, const Mask& mask);

enum class MaskTarget { kOne, kZero };

MaskTarget parse_mask_target(const std::string& name);

struct RenderLossWeights {
  double perceptual = 1.0;
  double mask = 0.1;
  MaskTarget mask_target = MaskTarget::kOne;

  void validate() const;
};

struct RenderLoss {
  torch::Tensor total;
  torch::Tensor perceptual;
  torch::Tensor mask_term;  // unweighted mean |target - mask|
};

RenderLoss render_loss(const torch::Tensor& rendered, const torch::Tensor& target, const torch::Tensor& mask,
                       const RenderLossWeights& weights, PerceptualExtractor& extractor,
                       const std::array<double, 5>& alphas = default_perceptual_weights());

}  // namespace mgvton
