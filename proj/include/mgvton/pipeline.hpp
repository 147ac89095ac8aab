#pragma once

// Loading trained stages and running the full try-on chain.

#include <filesystem>
#include <vector>

#include "mgvton/checkpoint.hpp"
#include "mgvton/config.hpp"
#include "mgvton/data_model.hpp"
#include "mgvton/stages.hpp"
#include "mgvton/tps.hpp"

namespace mgvton {

TrainConfig checkpoint_config(const Checkpoint& checkpoint);
// Throws CheckpointError naming the stage and file when absent or unreadable.
Checkpoint load_stage_checkpoint(const std::filesystem::path& dir, Stage stage);

ResnetGenerator load_parsing_generator(const Checkpoint& checkpoint);
// {clothes matcher, parsing-pair matcher}
std::pair<Matcher, Matcher> load_matchers(const Checkpoint& checkpoint);
WarpGenerator load_warp_generator(const Checkpoint& checkpoint);
RenderGenerator load_render_generator(const Checkpoint& checkpoint);

struct TryOnRequest {
  PersonView person;
  Image clothes;
  Mask clothes_mask;
  KeypointSet target_pose;
};

struct TryOnResult {
  ParsingMap parsing;  // S'_t
  Image warped_clothes;
  Image coarse;
  Mask mask;
  Image final_image;
  TpsParams clothes_tps;
  TpsParams parsing_tps;
};

class Pipeline {
 public:
  // Loads all four stage checkpoints from `dir`; rejects missing stages and
  // checkpoints trained at different resolutions.
  static Pipeline load(const std::filesystem::path& dir);

  // Results are order-aligned with requests; processed in chunks of `batch`.
  std::vector<TryOnResult> run(const std::vector<TryOnRequest>& requests, int batch = 8);
  TryOnResult run(const TryOnRequest& request);

  const TrainConfig& config() const { return config_; }
  Resolution resolution() const { return config_.resolution; }

 private:
  Pipeline() = default;

  TrainConfig config_;  // settings of the final stage
  TrainConfig warp_config_;
  int pose_radius_ = 4;
  ResnetGenerator parsing_{nullptr};
  Matcher clothes_matcher_{nullptr};
  Matcher parsing_matcher_{nullptr};
  WarpGenerator warp_{nullptr};
  RenderGenerator render_{nullptr};
};

// Full-chain convenience wrapper.
TryOnResult run_pipeline(const PersonView& person, const Image& clothes, const Mask& clothes_mask,
                         const KeypointSet& target_pose, const std::filesystem::path& checkpoints);

}  // namespace mgvton
