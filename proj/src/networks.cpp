#include "mgvton/networks.hpp"

#include <algorithm>
#include <stdexcept>

namespace mgvton {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::AnyModule make_norm(NormKind norm, int channels) {
  if (norm == NormKind::kBatch) return nn::AnyModule(nn::BatchNorm2d(channels));
  return nn::AnyModule(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true)));
}

}  // namespace

NormKind parse_norm(const std::string& name) {
  if (name == "batch") return NormKind::kBatch;
  if (name == "instance") return NormKind::kInstance;
  throw std::invalid_argument("unknown norm '" + name + "' (expected batch|instance)");
}

GanMode parse_gan_mode(const std::string& name) {
  if (name == "lsgan") return GanMode::kLeastSquares;
  if (name == "log") return GanMode::kLog;
  throw std::invalid_argument("unknown gan mode '" + name + "' (expected lsgan|log)");
}

GeneratorOptions GeneratorOptions::scaled(int in_channels, int out_channels, int width_factor, int downsamples,
                                          int residual_blocks, NormKind norm) {
  if (width_factor < 1 || 64 % width_factor != 0) throw std::invalid_argument("width factor must divide 64");
  GeneratorOptions o;
  o.in_channels = in_channels;
  o.out_channels = out_channels;
  o.base_filters = 64 / width_factor;
  o.max_filters = 512 / width_factor;
  o.downsamples = downsamples;
  o.residual_blocks = residual_blocks;
  o.norm = norm;
  return o;
}

int GeneratorOptions::bottleneck_channels() const {
  return std::min(base_filters << downsamples, max_filters);
}

ResidualBlockImpl::ResidualBlockImpl(int channels, NormKind norm) {
  body_ = nn::Sequential();
  for (int i = 0; i < 3; ++i) {
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
    body_->push_back(make_norm(norm, channels));
    if (i < 2) body_->push_back(nn::ReLU());
  }
  register_module("body", body_);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

ResnetGeneratorImpl::ResnetGeneratorImpl(const GeneratorOptions& options) : options_(options) {
  const int base = options.base_filters;
  stem_ = nn::Sequential(nn::ReflectionPad2d(3), nn::Conv2d(nn::Conv2dOptions(options.in_channels, base, 7)));
  stem_->push_back(make_norm(options.norm, base));
  stem_->push_back(nn::ReLU());

  down_ = nn::ModuleList();
  int channels = base;
  std::vector<int> widths{channels};
  for (int i = 0; i < options.downsamples; ++i) {
    const int next = std::min(channels * 2, options.max_filters);
    nn::Sequential layer(nn::Conv2d(nn::Conv2dOptions(channels, next, 3).stride(2).padding(1)));
    layer->push_back(make_norm(options.norm, next));
    layer->push_back(nn::ReLU());
    down_->push_back(layer);
    channels = next;
    widths.push_back(channels);
  }

  blocks_ = nn::ModuleList();
  for (int i = 0; i < options.residual_blocks; ++i) blocks_->push_back(ResidualBlock(channels, options.norm));

  up_ = nn::ModuleList();
  for (int i = options.downsamples - 1; i >= 0; --i) {
    const int next = widths[i];
    nn::Sequential layer(nn::Conv2d(nn::Conv2dOptions(channels, next, 3).padding(1)));
    layer->push_back(make_norm(options.norm, next));
    layer->push_back(nn::ReLU());
    up_->push_back(layer);
    channels = next;
  }

  head_ = nn::Sequential(nn::ReflectionPad2d(3), nn::Conv2d(nn::Conv2dOptions(channels, options.out_channels, 7)));

  register_module("stem", stem_);
  register_module("down", down_);
  register_module("blocks", blocks_);
  register_module("up", up_);
  register_module("head", head_);
  init_weights(*this);
}

ResnetGeneratorImpl::Encoded ResnetGeneratorImpl::encode(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != options_.in_channels) {
    throw std::invalid_argument("generator expects " + std::to_string(options_.in_channels) + " input channels, got " +
                                (x.dim() == 4 ? std::to_string(x.size(1)) : std::string("a non-4D tensor")));
  }
  Encoded out;
  auto h = stem_->forward(x);
  for (const auto& layer : *down_) {
    out.sizes.push_back({h.size(2), h.size(3)});
    h = layer->as<nn::Sequential>()->forward(h);
  }
  out.bottleneck = h;
  return out;
}

torch::Tensor ResnetGeneratorImpl::transform(const torch::Tensor& bottleneck) {
  auto h = bottleneck;
  for (const auto& block : *blocks_) h = block->as<ResidualBlock>()->forward(h);
  return h;
}

torch::Tensor ResnetGeneratorImpl::decode(const torch::Tensor& features,
                                          const std::vector<std::vector<int64_t>>& sizes) {
  auto h = features;
  std::size_t level = sizes.size();
  for (const auto& layer : *up_) {
    --level;
    h = F::interpolate(h, F::InterpolateFuncOptions().size(sizes[level]).mode(torch::kNearest));
    h = layer->as<nn::Sequential>()->forward(h);
  }
  return head_->forward(h);
}

torch::Tensor ResnetGeneratorImpl::forward(const torch::Tensor& x) {
  auto enc = encode(x);
  return decode(transform(enc.bottleneck), enc.sizes);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_channels, int base_filters, int max_filters) {
  blocks_ = nn::ModuleList();
  int channels = in_channels;
  for (int i = 0; i < 4; ++i) {
    const int next = std::min(base_filters << i, max_filters);
    nn::Sequential block(nn::ZeroPad2d(nn::ZeroPad2dOptions({1, 2, 1, 2})),
                         nn::Conv2d(nn::Conv2dOptions(channels, next, 4).stride(2)));
    if (i > 0) block->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(next)));
    block->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    blocks_->push_back(block);
    channels = next;
  }
  head_ = nn::Conv2d(nn::Conv2dOptions(channels, 1, 3).padding(1));
  register_module("blocks", blocks_);
  register_module("head", head_);
  init_weights(*this);
}

DiscriminatorOutput PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  DiscriminatorOutput out;
  auto h = x;
  for (const auto& block : *blocks_) {
    h = block->as<nn::Sequential>()->forward(h);
    out.features.push_back(h);
  }
  out.logits = head_->forward(h);
  return out;
}

DiscriminatorOptions DiscriminatorOptions::scaled(int in_channels, int width_factor) {
  if (width_factor < 1 || 64 % width_factor != 0) throw std::invalid_argument("width factor must divide 64");
  DiscriminatorOptions o;
  o.in_channels = in_channels;
  o.base_filters = 64 / width_factor;
  o.max_filters = 512 / width_factor;
  return o;
}

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(const DiscriminatorOptions& options) {
  scales_ = nn::ModuleList();
  for (int s = 0; s < options.num_scales; ++s) {
    scales_->push_back(PatchDiscriminator(options.in_channels, options.base_filters, options.max_filters));
  }
  register_module("scales", scales_);
}

std::vector<DiscriminatorOutput> MultiScaleDiscriminatorImpl::forward(const torch::Tensor& x) {
  std::vector<DiscriminatorOutput> out;
  auto h = x;
  for (std::size_t s = 0; s < scales_->size(); ++s) {
    if (s > 0) {
      h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(3).stride(2).padding(1).count_include_pad(false));
    }
    out.push_back(scales_[s]->as<PatchDiscriminator>()->forward(h));
  }
  return out;
}

torch::Tensor adversarial_loss(const std::vector<DiscriminatorOutput>& outputs, bool target_real, GanMode mode) {
  torch::Tensor total;
  for (const auto& o : outputs) {
    const auto target = target_real ? torch::ones_like(o.logits) : torch::zeros_like(o.logits);
    const auto term = mode == GanMode::kLeastSquares ? (o.logits - target).pow(2).mean()
                                                     : F::binary_cross_entropy_with_logits(o.logits, target);
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(outputs.size());
}

namespace {

void init_one(torch::nn::Module& m) {
  if (auto* conv = m.as<nn::Conv2d>()) {
    conv->weight.normal_(0.0, 0.02);
    if (conv->bias.defined()) conv->bias.zero_();
  } else if (auto* linear = m.as<nn::Linear>()) {
    linear->weight.normal_(0.0, 0.02);
    if (linear->bias.defined()) linear->bias.zero_();
  } else if (auto* bn = m.as<nn::BatchNorm2d>()) {
    bn->weight.fill_(1.0);
    bn->bias.zero_();
  }
}

}  // namespace

// Callable from constructors, where the module is not yet owned by a shared_ptr.
void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  init_one(module);
  for (auto& m : module.modules(/*include_self=*/false)) init_one(*m);
}

}  // namespace mgvton
