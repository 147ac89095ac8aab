#pragma once

// Model factories and the batched inference chain shared by training
// (frozen upstream stages) and end-to-end try-on.

#include <vector>

#include <torch/torch.h>

#include "mgvton/config.hpp"
#include "mgvton/data_model.hpp"
#include "mgvton/matcher.hpp"
#include "mgvton/networks.hpp"
#include "mgvton/parsing_gan.hpp"
#include "mgvton/refinement.hpp"
#include "mgvton/warp_gan.hpp"

namespace mgvton {

ResnetGenerator make_parsing_generator(const TrainConfig& config);
MultiScaleDiscriminator make_parsing_discriminator(const TrainConfig& config);
Matcher make_matcher(const TrainConfig& config);
WarpGenerator make_warp_generator(const TrainConfig& config);
MultiScaleDiscriminator make_warp_discriminator(const TrainConfig& config);
RenderGenerator make_render_generator(const TrainConfig& config);

// Everything one (reference view, clothes, target pose) request contributes,
// as unbatched float tensors. Supervision fields stay undefined when no
// target view is known.
struct PairTensors {
  torch::Tensor ref_masks;       // [3,H,W] hair, face, body shape
  torch::Tensor ref_image;       // [3,H,W]
  torch::Tensor ref_declothed;   // [3,H,W]
  torch::Tensor ref_foreground;  // [1,H,W]
  torch::Tensor clothes;         // [3,H,W]
  torch::Tensor clothes_masked;  // [3,H,W] clothes * clothes mask
  torch::Tensor clothes_mask;    // [1,H,W]
  torch::Tensor target_pose;     // [18,H,W]

  torch::Tensor target_image;          // [3,H,W]
  torch::Tensor target_labels;         // [H,W] int64
  torch::Tensor target_one_hot;        // [20,H,W]
  torch::Tensor target_foreground;     // [1,H,W]
  torch::Tensor target_clothes_mask;   // [1,H,W]
  torch::Tensor target_body_shape;     // [1,H,W]
};

PairTensors make_pair_tensors(const PersonView& reference, const Image& clothes, const Mask& clothes_mask,
                              const KeypointSet& target_pose, int pose_radius, const PersonView* target = nullptr);

// Training pairs (reference view, target view) per triplet, in a fixed order.
std::vector<PairTensors> make_training_pairs(const std::vector<Triplet>& triplets, PairMode mode, int pose_radius);

// Stacks one field of the selected pairs into a batch.
torch::Tensor stack_field(const std::vector<PairTensors>& pairs, torch::Tensor PairTensors::*field,
                          const std::vector<std::size_t>& indices);
std::vector<std::size_t> all_indices(std::size_t n);

// One-hot of the per-pixel argmax, [N,20,H,W].
torch::Tensor argmax_one_hot(const torch::Tensor& scores);
// Body-shape masks [N,1,H,W] recomputed from (synthesised) parsing scores.
torch::Tensor body_shape_from_scores(const torch::Tensor& scores);

struct StageIntermediates {
  torch::Tensor parsing_probabilities;  // [N,20,H,W]
  torch::Tensor parsing;                // one-hot argmax, [N,20,H,W]
  torch::Tensor body_shape;             // from the synthesised parsing
  torch::Tensor clothes_tps;            // [N,6+2K^2]
  torch::Tensor parsing_tps;
  torch::Tensor warped_clothes;         // [N,3,H,W]
  torch::Tensor declothed;              // generator input, pre-warped when enabled
  torch::Tensor coarse;
  torch::Tensor mask;
  torch::Tensor final_image;
};

// The chain below runs without gradients on frozen models in eval mode.
void run_parsing_stage(ResnetGenerator& generator, const torch::Tensor& conditioning, StageIntermediates& out);
void run_geo_stage(Matcher& clothes_matcher, Matcher& parsing_matcher, const torch::Tensor& clothes_masked,
                   const torch::Tensor& clothes_mask, const torch::Tensor& ref_foreground,
                   const torch::Tensor& ref_declothed, bool prewarp_declothed, StageIntermediates& inout);
void run_warp_stage(WarpGenerator& generator, const torch::Tensor& target_pose, bool bottleneck_warp,
                    StageIntermediates& inout);
void run_render_stage(RenderGenerator& generator, const torch::Tensor& target_pose, StageIntermediates& inout);

// Scoped eval mode + no-grad; restores the previous training flags.
class FrozenScope {
 public:
  explicit FrozenScope(std::vector<torch::nn::Module*> modules);
  ~FrozenScope();
  FrozenScope(const FrozenScope&) = delete;
  FrozenScope& operator=(const FrozenScope&) = delete;

 private:
  std::vector<std::pair<torch::nn::Module*, bool>> modules_;
  torch::NoGradGuard guard_;
};

}  // namespace mgvton
