#include "mgvton/stages.hpp"

namespace mgvton {

namespace {

GeneratorOptions stage_generator(const TrainConfig& c, int in, int out) {
  return GeneratorOptions::scaled(in, out, c.width_factor, c.downsamples, c.residual_blocks, c.norm);
}

}  // namespace

ResnetGenerator make_parsing_generator(const TrainConfig& c) {
  return ResnetGenerator(stage_generator(c, kParsingInputChannels, kNumLabels));
}

MultiScaleDiscriminator make_parsing_discriminator(const TrainConfig& c) {
  return MultiScaleDiscriminator(DiscriminatorOptions::scaled(kParsingDiscriminatorChannels, c.width_factor));
}

Matcher make_matcher(const TrainConfig& c) {
  MatcherOptions o;
  o.resolution = c.resolution;
  o.grid_size = c.grid_size;
  return Matcher(o);
}

WarpGenerator make_warp_generator(const TrainConfig& c) {
  return WarpGenerator(stage_generator(c, kWarpInputChannels, 3), c.grid_size);
}

MultiScaleDiscriminator make_warp_discriminator(const TrainConfig& c) {
  return MultiScaleDiscriminator(DiscriminatorOptions::scaled(3 + kWarpConditioningChannels, c.width_factor));
}

RenderGenerator make_render_generator(const TrainConfig& c) {
  return RenderGenerator(GeneratorOptions::scaled(kRenderInputChannels, 1, c.width_factor, c.render_downsamples,
                                                  c.render_residual_blocks, c.norm));
}

PairTensors make_pair_tensors(const PersonView& reference, const Image& clothes, const Mask& clothes_mask,
                              const KeypointSet& target_pose, int pose_radius, const PersonView* target) {
  const int h = reference.image.height();
  const int w = reference.image.width();
  if (clothes.resolution() != reference.image.resolution() || clothes_mask.height() != h || clothes_mask.width() != w) {
    throw std::invalid_argument("person and clothes resolutions differ");
  }
  PairTensors p;
  p.ref_masks = extract_body_masks(reference.parsing).to_tensor();
  p.ref_image = reference.image.to_tensor();
  p.ref_declothed = remove_clothes(reference.image, reference.parsing).to_tensor();
  p.ref_foreground = foreground_mask(reference.parsing).to_tensor();
  p.clothes = clothes.to_tensor();
  p.clothes_mask = clothes_mask.to_tensor();
  p.clothes_masked = p.clothes * p.clothes_mask;
  p.target_pose = encode_pose_heatmap(target_pose, h, w, pose_radius).to_tensor();
  if (target != nullptr) {
    p.target_image = target->image.to_tensor();
    p.target_labels = target->parsing.to_label_tensor();
    p.target_one_hot = target->parsing.to_one_hot_tensor();
    p.target_foreground = foreground_mask(target->parsing).to_tensor();
    p.target_clothes_mask = clothes_mask_from_parsing(target->parsing).to_tensor();
    p.target_body_shape = extract_body_masks(target->parsing).body_shape.to_tensor();
  }
  return p;
}

std::vector<PairTensors> make_training_pairs(const std::vector<Triplet>& triplets, PairMode mode, int pose_radius) {
  std::vector<PairTensors> pairs;
  for (const auto& t : triplets) {
    auto add = [&](const PersonView& ref, const PersonView& tgt) {
      pairs.push_back(make_pair_tensors(ref, t.clothes, t.clothes_mask, tgt.keypoints, pose_radius, &tgt));
    };
    if (mode != PairMode::kSelf) {
      add(t.source, t.target);
      add(t.target, t.source);
    }
    if (mode != PairMode::kCross) {
      add(t.source, t.source);
      add(t.target, t.target);
    }
  }
  return pairs;
}

torch::Tensor stack_field(const std::vector<PairTensors>& pairs, torch::Tensor PairTensors::*field,
                          const std::vector<std::size_t>& indices) {
  std::vector<torch::Tensor> parts;
  parts.reserve(indices.size());
  for (auto i : indices) {
    const auto& t = pairs.at(i).*field;
    if (!t.defined()) throw std::invalid_argument("pair tensor field is not populated");
    parts.push_back(t);
  }
  return torch::stack(parts);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

torch::Tensor argmax_one_hot(const torch::Tensor& scores) {
  return torch::one_hot(scores.argmax(1), kNumLabels).permute({0, 3, 1, 2}).to(scores.scalar_type()).contiguous();
}

torch::Tensor body_shape_from_scores(const torch::Tensor& scores) {
  std::vector<torch::Tensor> out;
  for (int64_t i = 0; i < scores.size(0); ++i) {
    const auto parsing = ParsingMap::from_scores(scores[i].detach().to(torch::kFloat32));
    out.push_back(extract_body_masks(parsing).body_shape.to_tensor());
  }
  return torch::stack(out).to(scores.scalar_type());
}

void run_parsing_stage(ResnetGenerator& generator, const torch::Tensor& conditioning, StageIntermediates& out) {
  const auto generated = generate_parsing(generator, conditioning);
  out.parsing_probabilities = generated.probabilities;
  out.parsing = argmax_one_hot(generated.probabilities);
  out.body_shape = body_shape_from_scores(out.parsing);
}

void run_geo_stage(Matcher& clothes_matcher, Matcher& parsing_matcher, const torch::Tensor& clothes_masked,
                   const torch::Tensor& clothes_mask, const torch::Tensor& ref_foreground,
                   const torch::Tensor& ref_declothed, bool prewarp_declothed, StageIntermediates& io) {
  const int k = clothes_matcher->options().grid_size;
  const auto synth_foreground = 1.0 - io.parsing.slice(1, kBackground, kBackground + 1);
  io.clothes_tps = clothes_matcher->forward(clothes_mask, io.body_shape);
  io.parsing_tps = parsing_matcher->forward(ref_foreground, synth_foreground);
  io.warped_clothes = warp_tensor(clothes_masked, io.clothes_tps, k);
  io.declothed = prewarp_declothed ? warp_tensor(ref_declothed, io.parsing_tps, parsing_matcher->options().grid_size)
                                   : ref_declothed;
}

void run_warp_stage(WarpGenerator& generator, const torch::Tensor& target_pose, bool bottleneck_warp,
                    StageIntermediates& io) {
  io.coarse = synthesize_coarse(generator, io.warped_clothes, io.declothed, target_pose, io.parsing,
                                bottleneck_warp ? io.parsing_tps : torch::Tensor());
}

void run_render_stage(RenderGenerator& generator, const torch::Tensor& target_pose, StageIntermediates& io) {
  io.mask = generator->forward(render_input(io.warped_clothes, io.coarse, target_pose));
  io.final_image = compose(io.warped_clothes, io.coarse, io.mask);
}

FrozenScope::FrozenScope(std::vector<torch::nn::Module*> modules) {
  for (auto* m : modules) {
    modules_.emplace_back(m, m->is_training());
    m->eval();
  }
}

FrozenScope::~FrozenScope() {
  for (auto& [m, training] : modules_) m->train(training);
}

}  // namespace mgvton
