#include "mgvton/pipeline.hpp"

#include "mgvton/training.hpp"

namespace mgvton {

TrainConfig checkpoint_config(const Checkpoint& checkpoint) { return TrainConfig::parse(checkpoint.meta("config")); }

Checkpoint load_stage_checkpoint(const std::filesystem::path& dir, Stage stage) {
  const auto path = checkpoint_path(dir, stage);
  if (!std::filesystem::exists(path)) {
    throw CheckpointError("missing checkpoint for stage '" + stage_name(stage) + "': " + path.string());
  }
  auto c = Checkpoint::load(path);
  if (c.stage != stage_name(stage)) {
    throw CheckpointError("checkpoint " + path.string() + " holds stage '" + c.stage + "', expected '" +
                          stage_name(stage) + "'");
  }
  return c;
}

ResnetGenerator load_parsing_generator(const Checkpoint& checkpoint) {
  auto g = make_parsing_generator(checkpoint_config(checkpoint));
  checkpoint.load_module("generator", *g);
  return g;
}

std::pair<Matcher, Matcher> load_matchers(const Checkpoint& checkpoint) {
  const auto config = checkpoint_config(checkpoint);
  auto clothes = make_matcher(config);
  auto parsing = make_matcher(config);
  checkpoint.load_module("clothes_matcher", *clothes);
  checkpoint.load_module("parsing_matcher", *parsing);
  return {clothes, parsing};
}

WarpGenerator load_warp_generator(const Checkpoint& checkpoint) {
  auto g = make_warp_generator(checkpoint_config(checkpoint));
  checkpoint.load_module("generator", *g);
  return g;
}

RenderGenerator load_render_generator(const Checkpoint& checkpoint) {
  auto g = make_render_generator(checkpoint_config(checkpoint));
  checkpoint.load_module("generator", *g);
  return g;
}

Pipeline Pipeline::load(const std::filesystem::path& dir) {
  std::string missing;
  for (Stage s : kStageOrder) {
    if (!std::filesystem::exists(checkpoint_path(dir, s))) {
      missing += (missing.empty() ? "" : ", ") + stage_name(s) + " (" + checkpoint_path(dir, s).string() + ")";
    }
  }
  if (!missing.empty()) throw CheckpointError("missing checkpoint for stage(s): " + missing);

  std::vector<Checkpoint> ckpts;
  std::vector<TrainConfig> configs;
  for (Stage s : kStageOrder) {
    ckpts.push_back(load_stage_checkpoint(dir, s));
    configs.push_back(checkpoint_config(ckpts.back()));
  }
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i].resolution != configs[0].resolution) {
      throw CheckpointError("resolution mismatch between checkpoints: " + stage_name(kStageOrder[0]) + " " +
                            configs[0].resolution.to_string() + " vs " + stage_name(kStageOrder[i]) + " " +
                            configs[i].resolution.to_string());
    }
    if (configs[i].pose_radius != configs[0].pose_radius) {
      throw CheckpointError("pose radius differs between checkpoints");
    }
  }

  Pipeline p;
  p.config_ = configs.back();
  p.warp_config_ = configs[2];
  p.pose_radius_ = configs[0].pose_radius;
  p.parsing_ = load_parsing_generator(ckpts[0]);
  std::tie(p.clothes_matcher_, p.parsing_matcher_) = load_matchers(ckpts[1]);
  p.warp_ = load_warp_generator(ckpts[2]);
  p.render_ = load_render_generator(ckpts[3]);
  for (torch::nn::Module* m : std::initializer_list<torch::nn::Module*>{
           p.parsing_.get(), p.clothes_matcher_.get(), p.parsing_matcher_.get(), p.warp_.get(), p.render_.get()}) {
    m->eval();
  }
  return p;
}

std::vector<TryOnResult> Pipeline::run(const std::vector<TryOnRequest>& requests, int batch) {
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  std::vector<TryOnResult> results;
  results.reserve(requests.size());
  FrozenScope frozen({parsing_.get(), clothes_matcher_.get(), parsing_matcher_.get(), warp_.get(), render_.get()});
  for (std::size_t start = 0; start < requests.size(); start += batch) {
    const std::size_t end = std::min(requests.size(), start + static_cast<std::size_t>(batch));
    std::vector<PairTensors> pairs;
    for (std::size_t i = start; i < end; ++i) {
      const auto& r = requests[i];
      if (r.person.image.resolution() != resolution()) {
        throw std::invalid_argument("request resolution " + r.person.image.resolution().to_string() +
                                    " does not match the checkpoints' " + resolution().to_string());
      }
      r.target_pose.validate(resolution());
      pairs.push_back(make_pair_tensors(r.person, r.clothes, r.clothes_mask, r.target_pose, pose_radius_));
    }
    const auto idx = all_indices(pairs.size());
    const auto pose = stack_field(pairs, &PairTensors::target_pose, idx);
    StageIntermediates io;
    run_parsing_stage(parsing_, parsing_conditioning(stack_field(pairs, &PairTensors::ref_masks, idx),
                                                     stack_field(pairs, &PairTensors::clothes, idx), pose),
                      io);
    run_geo_stage(clothes_matcher_, parsing_matcher_, stack_field(pairs, &PairTensors::clothes_masked, idx),
                  stack_field(pairs, &PairTensors::clothes_mask, idx),
                  stack_field(pairs, &PairTensors::ref_foreground, idx),
                  stack_field(pairs, &PairTensors::ref_declothed, idx), warp_config_.prewarp_declothed, io);
    run_warp_stage(warp_, pose, warp_config_.bottleneck_warp, io);
    run_render_stage(render_, pose, io);

    const int k = clothes_matcher_->options().grid_size;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto n = static_cast<int64_t>(i);
      TryOnResult r;
      r.parsing = ParsingMap::from_scores(io.parsing[n]);
      r.warped_clothes = Image::from_tensor(io.warped_clothes[n]);
      r.coarse = Image::from_tensor(io.coarse[n]);
      r.mask = Mask::from_tensor(io.mask[n]);
      r.final_image = Image::from_tensor(io.final_image[n]);
      r.clothes_tps = TpsParams::from_tensor(k, io.clothes_tps[n]);
      r.parsing_tps = TpsParams::from_tensor(k, io.parsing_tps[n]);
      results.push_back(std::move(r));
    }
  }
  return results;
}

TryOnResult Pipeline::run(const TryOnRequest& request) { return run(std::vector<TryOnRequest>{request}, 1).front(); }

TryOnResult run_pipeline(const PersonView& person, const Image& clothes, const Mask& clothes_mask,
                         const KeypointSet& target_pose, const std::filesystem::path& checkpoints) {
  auto p = Pipeline::load(checkpoints);
  return p.run(TryOnRequest{person, clothes, clothes_mask, target_pose});
}

}  // namespace mgvton
