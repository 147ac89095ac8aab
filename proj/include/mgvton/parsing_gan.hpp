#pragma once

// Stage I: conditional parsing synthesis from (hair, face, body shape,
// clothes, target pose).

#include <map>
#include <string>

#include <torch/torch.h>

#include "mgvton/data_model.hpp"
#include "mgvton/networks.hpp"

namespace mgvton {

// hair + face + body shape + clothes RGB + 18 pose channels
inline constexpr int kParsingInputChannels = 3 + 3 + kNumKeypoints;
inline constexpr int kParsingDiscriminatorChannels = kNumLabels + kParsingInputChannels;

struct ParsingOutput {
  torch::Tensor logits;         // [N, 20, H, W]
  torch::Tensor probabilities;  // softmax over dim 1
};

// conditioning [N, 24, H, W] = concat(M_h, M_f, M_b, C, P).
torch::Tensor parsing_conditioning(const torch::Tensor& masks, const torch::Tensor& clothes, const torch::Tensor& pose);

ParsingOutput generate_parsing(ResnetGenerator& generator, const torch::Tensor& conditioning);
ParsingOutput generate_parsing(ResnetGenerator& generator, const BodyMasks& masks, const Image& clothes,
                               const PoseHeatmap& pose);

struct ParsingBatch {
  torch::Tensor conditioning;  // [N, 24, H, W]
  torch::Tensor labels;        // [N, H, W] int64
  torch::Tensor one_hot;       // [N, 20, H, W]
};

struct ParsingLossWeights {
  double adversarial = 1.0;
  double l1 = 1.0;
  double cross_entropy = 1.0;
};

struct ParsingGanLoss {
  torch::Tensor generator;
  torch::Tensor discriminator;
  std::map<std::string, torch::Tensor> components;  // g_adv, l1, cross_entropy, d_real, d_fake
};

ParsingGanLoss parsing_gan_loss(const ParsingOutput& generated, MultiScaleDiscriminator& discriminator,
                                const ParsingBatch& batch, const ParsingLossWeights& weights, GanMode mode);

// mean over pixels of -log softmax(logits)[label]
torch::Tensor parsing_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels);
// mean |probabilities - one_hot|
torch::Tensor parsing_l1(const torch::Tensor& probabilities, const torch::Tensor& one_hot);

}  // namespace mgvton
