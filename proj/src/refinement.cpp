#include "mgvton/refinement.hpp"

#include <algorithm>
#include <cmath>

namespace mgvton {

RenderGeneratorImpl::RenderGeneratorImpl(const GeneratorOptions& options) {
  if (options.in_channels != kRenderInputChannels || options.out_channels != 1) {
    throw std::invalid_argument("render generator maps 24 channels to a 1-channel mask");
  }
  net_ = register_module("net", ResnetGenerator(options));
}

torch::Tensor RenderGeneratorImpl::forward(const torch::Tensor& input) {
  return kMaskMargin + (1.0 - 2.0 * kMaskMargin) * torch::sigmoid(net_->forward(input));
}

torch::Tensor render_input(const torch::Tensor& warped_clothes, const torch::Tensor& coarse, const torch::Tensor& pose) {
  return torch::cat({warped_clothes, coarse, pose}, 1);
}

torch::Tensor compose(const torch::Tensor& warped_clothes, const torch::Tensor& coarse, const torch::Tensor& mask) {
  if (warped_clothes.sizes() != coarse.sizes()) throw std::invalid_argument("compose: image shapes differ");
  // The clamp only removes float rounding past the convex hull of the inputs.
  const auto blended = mask * warped_clothes + (1.0 - mask) * coarse;
  return torch::min(torch::max(blended, torch::minimum(warped_clothes, coarse)), torch::maximum(warped_clothes, coarse));
}

Image compose(const Image& warped_clothes, const Image& coarse, const Mask& mask) {
  const auto res = warped_clothes.resolution();
  if (coarse.resolution() != res || mask.height() != res.height || mask.width() != res.width) {
    throw std::invalid_argument("compose: shapes differ");
  }
  Image out(res.height, res.width);
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      const float m = mask.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const float a = warped_clothes.at(y, x, c);
        const float b = coarse.at(y, x, c);
        out.set(y, x, c, std::clamp(m * a + (1.0f - m) * b, std::min(a, b), std::max(a, b)));
      }
    }
  }
  return out;
}

MaskTarget parse_mask_target(const std::string& name) {
  if (name == "one") return MaskTarget::kOne;
  if (name == "zero") return MaskTarget::kZero;
  throw std::invalid_argument("mask target must be 'one' or 'zero', got '" + name + "'");
}

void RenderLossWeights::validate() const {
  if (!std::isfinite(perceptual) || !std::isfinite(mask) || perceptual < 0.0 || mask < 0.0) {
    throw std::invalid_argument("render loss weights must be finite and >= 0");
  }
}

RenderLoss render_loss(const torch::Tensor& rendered, const torch::Tensor& target, const torch::Tensor& mask,
                       const RenderLossWeights& weights, PerceptualExtractor& extractor,
                       const std::array<double, 5>& alphas) {
  RenderLoss loss;
  loss.perceptual = perceptual_loss(extractor, rendered, target, alphas);
  loss.mask_term = weights.mask_target == MaskTarget::kOne ? (1.0 - mask).abs().mean() : mask.abs().mean();
  loss.total = weights.perceptual * loss.perceptual + weights.mask * loss.mask_term;
  return loss;
}

}  // namespace mgvton
