#include "mgvton/warp_gan.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "mgvton/tps.hpp"

namespace mgvton {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

torch::Tensor warp_generator_input(const torch::Tensor& warped_clothes, const torch::Tensor& declothed,
                                   const torch::Tensor& pose, const torch::Tensor& parsing) {
  return torch::cat({warped_clothes, declothed, pose, parsing}, 1);
}

torch::Tensor warp_bottleneck(const torch::Tensor& features, const torch::Tensor& transform, int grid_size) {
  return warp_tensor(features, transform, grid_size);
}

WarpGeneratorImpl::WarpGeneratorImpl(const GeneratorOptions& options, int grid_size) : grid_size_(grid_size) {
  if (options.in_channels != kWarpInputChannels) throw std::invalid_argument("warp generator takes 44 input channels");
  net_ = register_module("net", ResnetGenerator(options));
  const int c = options.bottleneck_channels();
  fuse_ = register_module("fuse", nn::Conv2d(nn::Conv2dOptions(2 * c, c, 1)));
  init_weights(*fuse_);
}

torch::Tensor WarpGeneratorImpl::encode_bottleneck(const torch::Tensor& input) { return net_->encode(input).bottleneck; }

torch::Tensor WarpGeneratorImpl::forward(const torch::Tensor& input, const torch::Tensor& transform) {
  if (input.dim() != 4 || input.size(1) != kWarpInputChannels) {
    throw std::invalid_argument("warp generator expects a [N,44,H,W] input");
  }
  auto enc = net_->encode(input);
  const auto warped = transform.defined() ? warp_bottleneck(enc.bottleneck, transform, grid_size_) : enc.bottleneck;
  const auto fused = fuse_->forward(torch::cat({enc.bottleneck, warped}, 1));
  return torch::sigmoid(net_->decode(net_->transform(fused), enc.sizes));
}

torch::Tensor synthesize_coarse(WarpGenerator& generator, const torch::Tensor& warped_clothes,
                                const torch::Tensor& declothed, const torch::Tensor& pose,
                                const torch::Tensor& parsing, const torch::Tensor& transform) {
  return generator->forward(warp_generator_input(warped_clothes, declothed, pose, parsing), transform);
}

PerceptualExtractorImpl::PerceptualExtractorImpl(std::uint64_t seed) : seed_(seed) {
  static constexpr int kFilters[5] = {16, 32, 64, 64, 64};
  blocks_ = nn::ModuleList();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int channels = 3;
  for (int f : kFilters) {
    nn::Conv2d conv(nn::Conv2dOptions(channels, f, 3).padding(1));
    {
      torch::NoGradGuard guard;
      const double std = std::sqrt(2.0 / (channels * 9));
      conv->weight.copy_(torch::randn(conv->weight.sizes(), gen, torch::kFloat32) * std);
      conv->bias.copy_(torch::randn(conv->bias.sizes(), gen, torch::kFloat32) * 0.01);
    }
    blocks_->push_back(conv);
    channels = f;
  }
  register_module("blocks", blocks_);
  for (auto& p : parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> PerceptualExtractorImpl::forward(const torch::Tensor& image) {
  std::vector<torch::Tensor> taps;
  auto h = image;
  for (std::size_t i = 0; i < blocks_->size(); ++i) {
    if (i > 0) h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2).stride(2).ceil_mode(true));
    h = torch::relu(blocks_[i]->as<nn::Conv2d>()->forward(h));
    taps.push_back(h);
  }
  return taps;
}

std::array<double, 5> default_perceptual_weights() { return {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}; }

std::array<double, 3> default_feature_weights() { return {1.0, 1.0, 1.0}; }

torch::Tensor perceptual_loss(PerceptualExtractor& extractor, const torch::Tensor& candidate,
                              const torch::Tensor& reference, const std::array<double, 5>& alphas) {
  if (candidate.sizes() != reference.sizes()) throw std::invalid_argument("perceptual loss needs equal shapes");
  const auto fc = extractor->forward(candidate);
  const auto fr = extractor->forward(reference);
  auto total = torch::zeros({}, candidate.options());
  for (std::size_t i = 0; i < fc.size(); ++i) {
    if (alphas[i] == 0.0) continue;
    total = total + alphas[i] * (fc[i] - fr[i]).abs().mean();
  }
  return total;
}

torch::Tensor feature_matching_loss(MultiScaleDiscriminator& discriminator, const torch::Tensor& candidate,
                                    const torch::Tensor& reference, const torch::Tensor& conditioning,
                                    const std::array<double, 3>& gammas) {
  const auto dc = discriminator->forward(torch::cat({candidate, conditioning}, 1));
  const auto dr = discriminator->forward(torch::cat({reference, conditioning}, 1));
  auto total = torch::zeros({}, candidate.options());
  for (std::size_t s = 0; s < dc.size(); ++s) {
    for (std::size_t i = 0; i < gammas.size(); ++i) {
      if (gammas[i] == 0.0) continue;
      total = total + gammas[i] * (dc[s].features[i] - dr[s].features[i]).abs().mean();
    }
  }
  return total / static_cast<double>(dc.size());
}

void WarpGanLossWeights::validate() const {
  bool positive = false;
  for (double w : {adversarial, perceptual, feature, l1}) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("warp GAN loss weights must be finite and >= 0");
    positive = positive || w > 0.0;
  }
  if (!positive) throw std::invalid_argument("at least one warp GAN loss weight must be positive");
}

torch::Tensor warp_gan_generator_loss(const WarpGanComponents& c, const WarpGanLossWeights& w) {
  return w.adversarial * c.adversarial + w.perceptual * c.perceptual + w.feature * c.feature + w.l1 * c.l1;
}

}  // namespace mgvton
