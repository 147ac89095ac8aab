#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

namespace mgvton {

enum class NormKind { kBatch, kInstance };

NormKind parse_norm(const std::string& name);

// Encoder / residual / decoder generator shared by every stage.
//
// Filter schedule: stem `base`, then one stride-2 conv per downsample
// doubling the width (capped at `max_filters`), `residual_blocks` blocks at
// the bottleneck width, and mirrored nearest-upsample + conv layers. With
// base 64, max 512, 3 down / 9 blocks / 3 up this is the 64,128,256,512x9,
// 256,128,64 schedule; dividing base and max by a width factor gives the
// desk-scale variants.
struct GeneratorOptions {
  int in_channels = 3;
  int out_channels = 3;
  int base_filters = 64;
  int max_filters = 512;
  int downsamples = 3;
  int residual_blocks = 9;
  NormKind norm = NormKind::kBatch;

  static GeneratorOptions scaled(int in_channels, int out_channels, int width_factor, int downsamples,
                                 int residual_blocks, NormKind norm);
  int bottleneck_channels() const;
};

// Three 3x3 conv layers, each normalised, ReLU between them, identity skip.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int channels, NormKind norm);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

class ResnetGeneratorImpl : public torch::nn::Module {
 public:
  explicit ResnetGeneratorImpl(const GeneratorOptions& options);

  struct Encoded {
    torch::Tensor bottleneck;
    std::vector<std::vector<int64_t>> sizes;  // spatial size before each downsample
  };

  Encoded encode(const torch::Tensor& x);
  torch::Tensor transform(const torch::Tensor& bottleneck);
  torch::Tensor decode(const torch::Tensor& features, const std::vector<std::vector<int64_t>>& sizes);
  // Raw head output (no output activation).
  torch::Tensor forward(const torch::Tensor& x);

  const GeneratorOptions& options() const { return options_; }

 private:
  GeneratorOptions options_;
  torch::nn::Sequential stem_{nullptr};
  torch::nn::ModuleList down_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(ResnetGenerator);

struct DiscriminatorOutput {
  std::vector<torch::Tensor> features;  // one per downsample block
  torch::Tensor logits;                 // patch scores
};

// Four stride-2 blocks of 4x4 convs (instance norm after the first, LeakyReLU
// 0.2), padded so each block halves the spatial size rounding up, and a 3x3
// patch head.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int in_channels, int base_filters, int max_filters);
  DiscriminatorOutput forward(const torch::Tensor& x);

 private:
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct DiscriminatorOptions {
  int in_channels = 3;
  int base_filters = 64;
  int max_filters = 512;
  int num_scales = 2;

  static DiscriminatorOptions scaled(int in_channels, int width_factor);
};

// Scale s sees the input average-pooled s times by 2.
class MultiScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit MultiScaleDiscriminatorImpl(const DiscriminatorOptions& options);
  std::vector<DiscriminatorOutput> forward(const torch::Tensor& x);
  int num_scales() const { return static_cast<int>(scales_->size()); }

 private:
  torch::nn::ModuleList scales_{nullptr};
};
TORCH_MODULE(MultiScaleDiscriminator);

enum class GanMode { kLeastSquares, kLog };

GanMode parse_gan_mode(const std::string& name);

// Mean adversarial loss over every scale's patch logits against a real/fake target.
torch::Tensor adversarial_loss(const std::vector<DiscriminatorOutput>& outputs, bool target_real, GanMode mode);

// Deterministic initialisation: N(0, 0.02) conv weights, unit norm scales, zero biases.
void init_weights(torch::nn::Module& module);

}  // namespace mgvton
