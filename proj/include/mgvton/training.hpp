#pragma once

// Stage training loops, checkpoints and metrics logs.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgvton/checkpoint.hpp"
#include "mgvton/config.hpp"
#include "mgvton/data_model.hpp"

namespace mgvton {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricRecord {
  std::uint64_t step = 0;
  std::string component;
  double value = 0.0;
};

struct StageResult {
  Checkpoint checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::vector<MetricRecord> metrics;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Stage stage);
std::filesystem::path metrics_path(const std::filesystem::path& dir, Stage stage);

// Stages whose checkpoints must exist before `stage` can train.
std::vector<Stage> prerequisites(Stage stage);

// Trains config.stage on `triplets` and writes its checkpoint and metrics TSV
// into config.checkpoints. Throws TrainingError for a missing prerequisite or
// a non-finite loss (after dumping the offending batch next to the metrics).
StageResult train_stage(const TrainConfig& config, const std::vector<Triplet>& triplets);
// Loads the train split of config.dataset.
StageResult train_stage(const TrainConfig& config);

// Stage order parsing -> geo -> warp -> refine.
std::vector<StageResult> train_all(TrainConfig config, const std::vector<Triplet>& triplets);

void write_metrics(const std::filesystem::path& path, const std::vector<MetricRecord>& metrics);

// Mean clothes-matcher loss of a trained geo checkpoint over every training
// pair of `triplets`, on ground-truth target parsing.
double geo_training_loss(const std::filesystem::path& checkpoints, const std::vector<Triplet>& triplets);

}  // namespace mgvton
