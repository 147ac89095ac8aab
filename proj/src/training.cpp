#include "mgvton/training.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "mgvton/pipeline.hpp"
#include "mgvton/stages.hpp"
#include "mgvton/synthetic_data.hpp"

namespace mgvton {

namespace {

using Components = std::vector<std::pair<std::string, torch::Tensor>>;
using Batch = std::vector<std::pair<std::string, torch::Tensor>>;

struct StageSeeds {
  std::uint64_t init;
  std::uint64_t order;
};

StageSeeds stage_seeds(const TrainConfig& c) {
  const auto base = mix_seed(c.seed, 100 + static_cast<std::uint64_t>(c.stage));
  return {mix_seed(base, 1), mix_seed(base, 2)};
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& c) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2}));
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, Rng& rng) {
  auto order = all_indices(n);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(static_cast<int>(i))]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) {
    out.emplace_back(order.begin() + s, order.begin() + std::min(n, s + static_cast<std::size_t>(batch)));
  }
  return out;
}

torch::Tensor index_tensor(const std::vector<std::size_t>& idx) {
  std::vector<int64_t> v(idx.begin(), idx.end());
  return torch::tensor(v, torch::kInt64);
}

class StageRun {
 public:
  StageRun(const TrainConfig& c) : config_(c) {}

  void record(std::uint64_t step, const Components& components, const Batch& batch) {
    std::vector<double> values;
    bool finite = true;
    for (const auto& [name, t] : components) {
      values.push_back(t.item<double>());
      finite = finite && std::isfinite(values.back());
    }
    if (!finite) dump_and_throw(step, components, values, batch);
    for (std::size_t i = 0; i < components.size(); ++i) metrics_.push_back({step, components[i].first, values[i]});
  }

  Checkpoint base_checkpoint(std::uint64_t steps) const {
    Checkpoint c;
    c.stage = stage_name(config_.stage);
    c.step = steps;
    c.metadata["config"] = config_.to_text();
    c.metadata["resolution"] = config_.resolution.to_string();
    c.metadata["seed"] = std::to_string(config_.seed);
    c.metadata["format"] = "mgvton-stage";
    return c;
  }

  StageResult finish(Checkpoint checkpoint) {
    StageResult r;
    r.checkpoint_path = checkpoint_path(config_.checkpoints, config_.stage);
    r.metrics_path = metrics_path(config_.checkpoints, config_.stage);
    checkpoint.save(r.checkpoint_path);
    write_metrics(r.metrics_path, metrics_);
    r.checkpoint = std::move(checkpoint);
    r.metrics = std::move(metrics_);
    return r;
  }

 private:
  [[noreturn]] void dump_and_throw(std::uint64_t step, const Components& components, const std::vector<double>& values,
                                   const Batch& batch) const {
    std::filesystem::create_directories(config_.checkpoints);
    const auto dump = config_.checkpoints / (stage_name(config_.stage) + "_nonfinite_step" + std::to_string(step) + ".pt");
    std::vector<torch::Tensor> tensors;
    std::string names;
    for (const auto& [name, t] : batch) {
      tensors.push_back(t.detach());
      names += " " + name;
    }
    torch::save(tensors, dump.string());
    std::string msg = "non-finite loss in stage '" + stage_name(config_.stage) + "' at step " + std::to_string(step) + ":";
    for (std::size_t i = 0; i < components.size(); ++i) msg += " " + components[i].first + "=" + std::to_string(values[i]);
    msg += "; batch tensors [" + names + " ] dumped to " + dump.string();
    throw TrainingError(msg);
  }

  const TrainConfig& config_;
  std::vector<MetricRecord> metrics_;
};

void require_prerequisites(const TrainConfig& c) {
  for (Stage s : prerequisites(c.stage)) {
    const auto path = checkpoint_path(c.checkpoints, s);
    if (!std::filesystem::exists(path)) {
      throw TrainingError("stage '" + stage_name(c.stage) + "' needs the '" + stage_name(s) +
                          "' checkpoint, which is missing: " + path.string());
    }
  }
}

Checkpoint load_prerequisite(const TrainConfig& c, Stage s) {
  auto ckpt = load_stage_checkpoint(c.checkpoints, s);
  const auto upstream = checkpoint_config(ckpt);
  if (upstream.resolution != c.resolution) {
    throw TrainingError("'" + stage_name(s) + "' checkpoint was trained at " + upstream.resolution.to_string() +
                        ", this run uses " + c.resolution.to_string());
  }
  if (upstream.pose_radius != c.pose_radius) throw TrainingError("pose radius differs from the upstream checkpoints");
  return ckpt;
}

// Frozen upstream chain evaluated once for every training pair.
struct Precomputed {
  torch::Tensor warped_clothes;
  torch::Tensor declothed;
  torch::Tensor parsing;
  torch::Tensor parsing_tps;
  torch::Tensor pose;
  torch::Tensor target;
  torch::Tensor coarse;
};

Precomputed precompute(const TrainConfig& c, const std::vector<PairTensors>& pairs, bool with_coarse,
                       std::map<std::string, std::string>& digests) {
  auto parsing_ckpt = load_prerequisite(c, Stage::kParsing);
  auto geo_ckpt = load_prerequisite(c, Stage::kGeo);
  digests["parsing_checkpoint_digest"] = file_digest(checkpoint_path(c.checkpoints, Stage::kParsing));
  digests["geo_checkpoint_digest"] = file_digest(checkpoint_path(c.checkpoints, Stage::kGeo));
  auto parsing = load_parsing_generator(parsing_ckpt);
  auto [clothes_matcher, parsing_matcher] = load_matchers(geo_ckpt);
  WarpGenerator warp{nullptr};
  bool bottleneck_warp = c.bottleneck_warp;
  bool prewarp = c.prewarp_declothed;
  if (with_coarse) {
    auto warp_ckpt = load_prerequisite(c, Stage::kWarp);
    digests["warp_checkpoint_digest"] = file_digest(checkpoint_path(c.checkpoints, Stage::kWarp));
    const auto wc = checkpoint_config(warp_ckpt);
    bottleneck_warp = wc.bottleneck_warp;
    prewarp = wc.prewarp_declothed;
    warp = load_warp_generator(warp_ckpt);
  }

  std::vector<torch::nn::Module*> frozen{parsing.get(), clothes_matcher.get(), parsing_matcher.get()};
  if (with_coarse) frozen.push_back(warp.get());
  FrozenScope scope(frozen);

  std::vector<StageIntermediates> chunks;
  constexpr std::size_t kChunk = 16;
  for (std::size_t s = 0; s < pairs.size(); s += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = s; i < std::min(pairs.size(), s + kChunk); ++i) idx.push_back(i);
    const auto pose = stack_field(pairs, &PairTensors::target_pose, idx);
    StageIntermediates io;
    run_parsing_stage(parsing, parsing_conditioning(stack_field(pairs, &PairTensors::ref_masks, idx),
                                                    stack_field(pairs, &PairTensors::clothes, idx), pose),
                      io);
    run_geo_stage(clothes_matcher, parsing_matcher, stack_field(pairs, &PairTensors::clothes_masked, idx),
                  stack_field(pairs, &PairTensors::clothes_mask, idx),
                  stack_field(pairs, &PairTensors::ref_foreground, idx),
                  stack_field(pairs, &PairTensors::ref_declothed, idx), prewarp, io);
    if (with_coarse) run_warp_stage(warp, pose, bottleneck_warp, io);
    chunks.push_back(std::move(io));
  }
  auto cat = [&](torch::Tensor StageIntermediates::*field) {
    std::vector<torch::Tensor> parts;
    for (const auto& ch : chunks) parts.push_back(ch.*field);
    return torch::cat(parts);
  };
  Precomputed p;
  p.warped_clothes = cat(&StageIntermediates::warped_clothes);
  p.declothed = cat(&StageIntermediates::declothed);
  p.parsing = cat(&StageIntermediates::parsing);
  p.parsing_tps = cat(&StageIntermediates::parsing_tps);
  if (with_coarse) p.coarse = cat(&StageIntermediates::coarse);
  const auto all = all_indices(pairs.size());
  p.pose = stack_field(pairs, &PairTensors::target_pose, all);
  p.target = stack_field(pairs, &PairTensors::target_image, all);
  return p;
}

StageResult train_parsing(const TrainConfig& c, const std::vector<PairTensors>& pairs) {
  const auto seeds = stage_seeds(c);
  torch::manual_seed(seeds.init);
  auto g = make_parsing_generator(c);
  auto d = make_parsing_discriminator(c);
  auto og = make_adam(g->parameters(), c);
  auto od = make_adam(d->parameters(), c);

  const auto all = all_indices(pairs.size());
  const auto conditioning = parsing_conditioning(stack_field(pairs, &PairTensors::ref_masks, all),
                                                 stack_field(pairs, &PairTensors::clothes, all),
                                                 stack_field(pairs, &PairTensors::target_pose, all));
  const auto labels = stack_field(pairs, &PairTensors::target_labels, all);
  const auto one_hot = stack_field(pairs, &PairTensors::target_one_hot, all);

  StageRun run(c);
  Rng rng(seeds.order);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < c.stage_epochs(); ++epoch) {
    for (const auto& b : epoch_batches(pairs.size(), c.batch_size, rng)) {
      const auto idx = index_tensor(b);
      ParsingBatch batch{conditioning.index_select(0, idx), labels.index_select(0, idx), one_hot.index_select(0, idx)};
      const auto out = generate_parsing(g, batch.conditioning);
      auto loss = parsing_gan_loss(out, d, batch, c.parsing_weights, c.gan_mode);
      ++step;
      Components comps{{"g_total", loss.generator}, {"d_total", loss.discriminator}};
      for (const auto& [k, v] : loss.components) comps.emplace_back(k, v);
      run.record(step, comps, {{"conditioning", batch.conditioning}, {"labels", batch.labels}});
      og.zero_grad();
      loss.generator.backward();
      og.step();
      od.zero_grad();
      loss.discriminator.backward();
      od.step();
    }
  }
  auto ckpt = run.base_checkpoint(step);
  ckpt.add_module("generator", *g);
  ckpt.add_module("discriminator", *d);
  ckpt.add_optimizer("opt_generator", og);
  ckpt.add_optimizer("opt_discriminator", od);
  return run.finish(std::move(ckpt));
}

StageResult train_geo(const TrainConfig& c, const std::vector<PairTensors>& pairs) {
  const auto seeds = stage_seeds(c);
  torch::manual_seed(seeds.init);
  auto clothes = make_matcher(c);
  auto parsing = make_matcher(c);
  auto oc = make_adam(clothes->parameters(), c);
  auto op = make_adam(parsing->parameters(), c);

  const auto all = all_indices(pairs.size());
  const auto clothes_mask = stack_field(pairs, &PairTensors::clothes_mask, all);
  const auto body_shape = stack_field(pairs, &PairTensors::target_body_shape, all);
  const auto target_clothes = stack_field(pairs, &PairTensors::target_clothes_mask, all);
  const auto ref_fg = stack_field(pairs, &PairTensors::ref_foreground, all);
  const auto target_fg = stack_field(pairs, &PairTensors::target_foreground, all);

  StageRun run(c);
  Rng rng(seeds.order);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < c.stage_epochs(); ++epoch) {
    for (const auto& b : epoch_batches(pairs.size(), c.batch_size, rng)) {
      const auto idx = index_tensor(b);
      const auto cm = clothes_mask.index_select(0, idx);
      const auto bs = body_shape.index_select(0, idx);
      const auto tc = target_clothes.index_select(0, idx);
      const auto rf = ref_fg.index_select(0, idx);
      const auto tf = target_fg.index_select(0, idx);
      const auto clothes_loss = geometric_matching_loss(clothes->forward(cm, bs), cm, tc, c.grid_size);
      const auto parsing_loss = geometric_matching_loss(parsing->forward(rf, tf), rf, tf, c.grid_size);
      ++step;
      run.record(step, {{"clothes_l1", clothes_loss}, {"parsing_l1", parsing_loss}},
                 {{"clothes_mask", cm}, {"body_shape", bs}, {"target_clothes_mask", tc}, {"ref_foreground", rf},
                  {"target_foreground", tf}});
      oc.zero_grad();
      clothes_loss.backward();
      oc.step();
      op.zero_grad();
      parsing_loss.backward();
      op.step();
    }
  }
  auto ckpt = run.base_checkpoint(step);
  ckpt.add_module("clothes_matcher", *clothes);
  ckpt.add_module("parsing_matcher", *parsing);
  ckpt.add_optimizer("opt_clothes_matcher", oc);
  ckpt.add_optimizer("opt_parsing_matcher", op);
  return run.finish(std::move(ckpt));
}

StageResult train_warp(const TrainConfig& c, const std::vector<PairTensors>& pairs) {
  std::map<std::string, std::string> digests;
  const auto pre = precompute(c, pairs, false, digests);
  const auto seeds = stage_seeds(c);
  torch::manual_seed(seeds.init);
  auto g = make_warp_generator(c);
  auto d = make_warp_discriminator(c);
  PerceptualExtractor extractor(c.perceptual_seed);
  auto og = make_adam(g->parameters(), c);
  auto od = make_adam(d->parameters(), c);
  const auto alphas = default_perceptual_weights();
  const auto gammas = default_feature_weights();

  StageRun run(c);
  Rng rng(seeds.order);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < c.stage_epochs(); ++epoch) {
    for (const auto& b : epoch_batches(pairs.size(), c.batch_size, rng)) {
      const auto idx = index_tensor(b);
      const auto wc = pre.warped_clothes.index_select(0, idx);
      const auto dc = pre.declothed.index_select(0, idx);
      const auto pose = pre.pose.index_select(0, idx);
      const auto parsing = pre.parsing.index_select(0, idx);
      const auto target = pre.target.index_select(0, idx);
      const auto tps = c.bottleneck_warp ? pre.parsing_tps.index_select(0, idx) : torch::Tensor();
      const auto cond = torch::cat({pose, parsing}, 1);

      const auto out = g->forward(warp_generator_input(wc, dc, pose, parsing), tps);
      WarpGanComponents parts;
      parts.adversarial = adversarial_loss(d->forward(torch::cat({out, cond}, 1)), true, c.gan_mode);
      parts.perceptual = perceptual_loss(extractor, out, target, alphas);
      parts.feature = feature_matching_loss(d, out, target, cond, gammas);
      parts.l1 = (out - target).abs().mean();
      const auto g_total = warp_gan_generator_loss(parts, c.warp_weights);
      const auto d_real = adversarial_loss(d->forward(torch::cat({target, cond}, 1)), true, c.gan_mode);
      const auto d_fake = adversarial_loss(d->forward(torch::cat({out.detach(), cond}, 1)), false, c.gan_mode);
      const auto d_total = 0.5 * (d_real + d_fake);
      ++step;
      run.record(step,
                 {{"g_total", g_total}, {"d_total", d_total}, {"g_adv", parts.adversarial},
                  {"perceptual", parts.perceptual}, {"feature", parts.feature}, {"l1", parts.l1},
                  {"d_real", d_real}, {"d_fake", d_fake}},
                 {{"warped_clothes", wc}, {"declothed", dc}, {"pose", pose}, {"parsing", parsing}, {"target", target}});
      og.zero_grad();
      g_total.backward();
      og.step();
      od.zero_grad();
      d_total.backward();
      od.step();
    }
  }
  auto ckpt = run.base_checkpoint(step);
  for (const auto& [k, v] : digests) ckpt.metadata[k] = v;
  ckpt.add_module("generator", *g);
  ckpt.add_module("discriminator", *d);
  ckpt.add_module("extractor", *extractor);
  ckpt.add_optimizer("opt_generator", og);
  ckpt.add_optimizer("opt_discriminator", od);
  return run.finish(std::move(ckpt));
}

StageResult train_refine(const TrainConfig& c, const std::vector<PairTensors>& pairs) {
  std::map<std::string, std::string> digests;
  const auto pre = precompute(c, pairs, true, digests);
  const auto seeds = stage_seeds(c);
  torch::manual_seed(seeds.init);
  auto g = make_render_generator(c);
  PerceptualExtractor extractor(c.perceptual_seed);
  auto og = make_adam(g->parameters(), c);

  StageRun run(c);
  Rng rng(seeds.order);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < c.stage_epochs(); ++epoch) {
    for (const auto& b : epoch_batches(pairs.size(), c.batch_size, rng)) {
      const auto idx = index_tensor(b);
      const auto wc = pre.warped_clothes.index_select(0, idx);
      const auto coarse = pre.coarse.index_select(0, idx);
      const auto pose = pre.pose.index_select(0, idx);
      const auto target = pre.target.index_select(0, idx);
      const auto mask = g->forward(render_input(wc, coarse, pose));
      const auto loss = render_loss(compose(wc, coarse, mask), target, mask, c.render_weights, extractor);
      ++step;
      run.record(step, {{"total", loss.total}, {"perceptual", loss.perceptual}, {"mask", loss.mask_term}},
                 {{"warped_clothes", wc}, {"coarse", coarse}, {"pose", pose}, {"target", target}});
      og.zero_grad();
      loss.total.backward();
      og.step();
    }
  }
  auto ckpt = run.base_checkpoint(step);
  for (const auto& [k, v] : digests) ckpt.metadata[k] = v;
  ckpt.add_module("generator", *g);
  ckpt.add_module("extractor", *extractor);
  ckpt.add_optimizer("opt_generator", og);
  return run.finish(std::move(ckpt));
}

}  // namespace

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Stage stage) {
  return dir / (stage_name(stage) + ".ckpt");
}

std::filesystem::path metrics_path(const std::filesystem::path& dir, Stage stage) {
  return dir / (stage_name(stage) + "_metrics.tsv");
}

std::vector<Stage> prerequisites(Stage stage) {
  switch (stage) {
    case Stage::kParsing:
    case Stage::kGeo: return {};
    case Stage::kWarp: return {Stage::kParsing, Stage::kGeo};
    case Stage::kRefine: return {Stage::kParsing, Stage::kGeo, Stage::kWarp};
  }
  return {};
}

StageResult train_stage(const TrainConfig& config, const std::vector<Triplet>& triplets) {
  config.validate();
  require_prerequisites(config);
  if (triplets.empty()) throw TrainingError("no training triplets");
  for (const auto& t : triplets) {
    if (t.source.image.resolution() != config.resolution) {
      throw TrainingError("triplet " + t.id + " is " + t.source.image.resolution().to_string() +
                          " but the config asks for " + config.resolution.to_string());
    }
  }
  const auto pairs = make_training_pairs(triplets, config.pair_mode, config.pose_radius);
  switch (config.stage) {
    case Stage::kParsing: return train_parsing(config, pairs);
    case Stage::kGeo: return train_geo(config, pairs);
    case Stage::kWarp: return train_warp(config, pairs);
    case Stage::kRefine: return train_refine(config, pairs);
  }
  throw TrainingError("unknown stage");
}

StageResult train_stage(const TrainConfig& config) {
  const auto manifest = read_manifest(config.dataset);
  if (manifest.resolution != config.resolution) {
    throw TrainingError("dataset " + config.dataset.string() + " is " + manifest.resolution.to_string() +
                        " but the config asks for " + config.resolution.to_string());
  }
  return train_stage(config, load_split(config.dataset, "train"));
}

std::vector<StageResult> train_all(TrainConfig config, const std::vector<Triplet>& triplets) {
  std::vector<StageResult> out;
  for (Stage s : kStageOrder) {
    config.stage = s;
    out.push_back(train_stage(config, triplets));
  }
  return out;
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricRecord>& metrics) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TrainingError("cannot write metrics log " + path.string());
  out << "step\tcomponent\tvalue\n";
  char buf[64];
  for (const auto& m : metrics) {
    const auto r = std::to_chars(buf, buf + sizeof buf, m.value);
    out << m.step << '\t' << m.component << '\t' << std::string_view(buf, r.ptr - buf) << '\n';
  }
}

double geo_training_loss(const std::filesystem::path& checkpoints, const std::vector<Triplet>& triplets) {
  const auto ckpt = load_stage_checkpoint(checkpoints, Stage::kGeo);
  const auto config = checkpoint_config(ckpt);
  auto [clothes, parsing] = load_matchers(ckpt);
  const auto pairs = make_training_pairs(triplets, config.pair_mode, config.pose_radius);
  FrozenScope scope({clothes.get()});
  const auto all = all_indices(pairs.size());
  const auto cm = stack_field(pairs, &PairTensors::clothes_mask, all);
  const auto params = clothes->forward(cm, stack_field(pairs, &PairTensors::target_body_shape, all));
  return geometric_matching_loss(params, cm, stack_field(pairs, &PairTensors::target_clothes_mask, all),
                                 config.grid_size)
      .item<double>();
}

}  // namespace mgvton
