#include "mgvton/parsing_gan.hpp"

namespace mgvton {

namespace F = torch::nn::functional;

torch::Tensor parsing_conditioning(const torch::Tensor& masks, const torch::Tensor& clothes, const torch::Tensor& pose) {
  return torch::cat({masks, clothes, pose}, 1);
}

ParsingOutput generate_parsing(ResnetGenerator& generator, const torch::Tensor& conditioning) {
  if (conditioning.dim() != 4 || conditioning.size(1) != kParsingInputChannels) {
    throw std::invalid_argument("parsing generator expects a [N,24,H,W] conditioning stack");
  }
  ParsingOutput out;
  out.logits = generator->forward(conditioning);
  out.probabilities = torch::softmax(out.logits, 1);
  return out;
}

ParsingOutput generate_parsing(ResnetGenerator& generator, const BodyMasks& masks, const Image& clothes,
                               const PoseHeatmap& pose) {
  const auto dtype = generator->parameters().front().scalar_type();
  const auto cond = parsing_conditioning(masks.to_tensor().unsqueeze(0), clothes.to_tensor().unsqueeze(0),
                                         pose.to_tensor().unsqueeze(0));
  return generate_parsing(generator, cond.to(dtype));
}

torch::Tensor parsing_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels) {
  return F::cross_entropy(logits, labels);
}

torch::Tensor parsing_l1(const torch::Tensor& probabilities, const torch::Tensor& one_hot) {
  return (probabilities - one_hot).abs().mean();
}

ParsingGanLoss parsing_gan_loss(const ParsingOutput& generated, MultiScaleDiscriminator& discriminator,
                                const ParsingBatch& batch, const ParsingLossWeights& weights, GanMode mode) {
  ParsingGanLoss loss;
  const auto& cond = batch.conditioning;
  const auto fake = torch::cat({generated.probabilities, cond}, 1);
  const auto real = torch::cat({batch.one_hot.to(cond.scalar_type()), cond}, 1);

  const auto g_adv = adversarial_loss(discriminator->forward(fake), true, mode);
  const auto l1 = parsing_l1(generated.probabilities, batch.one_hot.to(cond.scalar_type()));
  const auto ce = parsing_cross_entropy(generated.logits, batch.labels);
  loss.generator = weights.adversarial * g_adv + weights.l1 * l1 + weights.cross_entropy * ce;

  const auto d_real = adversarial_loss(discriminator->forward(real), true, mode);
  const auto d_fake = adversarial_loss(discriminator->forward(fake.detach()), false, mode);
  loss.discriminator = 0.5 * (d_real + d_fake);

  loss.components = {{"g_adv", g_adv}, {"l1", l1}, {"cross_entropy", ce}, {"d_real", d_real}, {"d_fake", d_fake}};
  return loss;
}

}  // namespace mgvton
