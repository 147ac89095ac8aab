#pragma once

// Flat key=value run configuration shared by training, inference and the CLI.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mgvton/data_model.hpp"
#include "mgvton/networks.hpp"
#include "mgvton/parsing_gan.hpp"
#include "mgvton/refinement.hpp"
#include "mgvton/warp_gan.hpp"

namespace mgvton {

enum class Stage { kParsing, kGeo, kWarp, kRefine };

inline constexpr std::array<Stage, 4> kStageOrder{Stage::kParsing, Stage::kGeo, Stage::kWarp, Stage::kRefine};

std::string stage_name(Stage stage);
Stage parse_stage(const std::string& name);

// Which (reference, target) view pairs each triplet contributes to training.
enum class PairMode { kAll, kCross, kSelf };

PairMode parse_pair_mode(const std::string& name);
std::string pair_mode_name(PairMode mode);

struct TrainConfig {
  std::string preset = "desk";
  Stage stage = Stage::kParsing;
  std::filesystem::path dataset = "data";
  std::filesystem::path checkpoints = "checkpoints";

  Resolution resolution{64, 48};
  std::uint64_t seed = 0;
  int batch_size = 8;
  double lr = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int width_factor = 8;
  std::map<Stage, int> epochs{{Stage::kParsing, 50}, {Stage::kGeo, 50}, {Stage::kWarp, 50}, {Stage::kRefine, 20}};

  NormKind norm = NormKind::kBatch;
  GanMode gan_mode = GanMode::kLeastSquares;
  int downsamples = 3;
  int residual_blocks = 9;
  int render_downsamples = 2;
  int render_residual_blocks = 4;
  int grid_size = 5;
  int pose_radius = 4;
  PairMode pair_mode = PairMode::kAll;

  ParsingLossWeights parsing_weights;
  WarpGanLossWeights warp_weights;
  RenderLossWeights render_weights;
  std::uint64_t perceptual_seed = 1234;
  bool bottleneck_warp = true;
  bool prewarp_declothed = true;

  static TrainConfig desk();
  static TrainConfig paper();
  static TrainConfig preset_named(const std::string& name);

  // Throws std::invalid_argument on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  // key=value lines in keys() order; parse(to_text()) round-trips.
  std::string to_text() const;
  // Lines "key = value"; '#' starts a comment. A leading `preset` key selects
  // the base preset before the remaining keys apply.
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);

  int stage_epochs() const { return epochs.at(stage); }
};

}  // namespace mgvton
