// mgvton: dataset generation, stage training, try-on inference and evaluation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "mgvton/config.hpp"
#include "mgvton/evaluation.hpp"
#include "mgvton/image_io.hpp"
#include "mgvton/pipeline.hpp"
#include "mgvton/synthetic_data.hpp"
#include "mgvton/training.hpp"
#include "mgvton/visualize.hpp"

namespace fs = std::filesystem;
using namespace mgvton;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- gen-data -------------------------------------------------------------

struct GenDataArgs {
  int count = 60;
  std::uint64_t seed = 0;
  std::string resolution = "64x48";
  fs::path out = "data";
  bool overwrite = false;
};

int run_gen_data(const GenDataArgs& a) {
  if (a.count < 1) throw UsageError("--count must be at least 1");
  const Resolution res = Resolution::parse(a.resolution);
  if (fs::exists(a.out)) {
    if (!fs::is_directory(a.out)) throw std::runtime_error(a.out.string() + " exists and is not a directory");
    if (!fs::is_empty(a.out)) {
      if (!a.overwrite) {
        throw std::runtime_error(a.out.string() + " is not empty; pass --overwrite to replace it");
      }
      fs::remove_all(a.out);
    }
  }
  fs::create_directories(a.out);
  const auto manifest = make_dataset(a.count, a.seed, res, a.out);
  const auto test = std::count_if(manifest.entries.begin(), manifest.entries.end(),
                                  [](const ManifestEntry& e) { return e.split == "test"; });
  std::cout << "triplets " << manifest.entries.size() << " train " << manifest.entries.size() - test << " test "
            << test << " resolution " << res.to_string() << " out " << a.out.string() << "\n";
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::string stage = "all";
  std::map<std::string, std::string> overrides;
};

TrainConfig resolve_config(const TrainArgs& a) {
  std::string text;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw std::runtime_error("cannot read config file " + a.config.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str() + "\n";
  }
  for (const auto& [k, v] : a.overrides) text += k + " = " + v + "\n";
  TrainConfig c = TrainConfig::parse(text);
  c.validate();
  return c;
}

void print_result(const StageResult& r) {
  std::map<std::string, double> last;
  for (const auto& m : r.metrics) last[m.component] = m.value;
  std::cout << stage_name(parse_stage(r.checkpoint.stage)) << ": steps " << r.checkpoint.step;
  for (const auto& [k, v] : last) std::cout << " " << k << "=" << v;
  std::cout << "\n  checkpoint " << r.checkpoint_path.string() << "\n  metrics " << r.metrics_path.string() << "\n";
}

int run_train(const TrainArgs& a) {
  TrainConfig c = resolve_config(a);
  const auto manifest = read_manifest(c.dataset);
  if (!(manifest.resolution == c.resolution)) {
    throw std::runtime_error("dataset resolution " + manifest.resolution.to_string() + " differs from configured " +
                             c.resolution.to_string());
  }
  const auto triplets = load_split(c.dataset, "train");
  if (triplets.empty()) throw std::runtime_error("train split of " + c.dataset.string() + " is empty");
  if (a.stage == "all") {
    for (const auto& r : train_all(c, triplets)) print_result(r);
  } else {
    c.stage = parse_stage(a.stage);
    print_result(train_stage(c, triplets));
  }
  return 0;
}

// --- try-on ---------------------------------------------------------------

struct TryOnArgs {
  fs::path person;
  std::string clothes;
  fs::path pose;
  fs::path dataset;
  fs::path checkpoints = "checkpoints";
  fs::path out = "tryon";
};

PersonView read_person(const fs::path& dir) {
  for (const char* f : {"source.png", "source_parsing.png", "source_pose.txt"}) {
    if (!fs::exists(dir / f)) throw std::runtime_error("person directory " + dir.string() + " lacks " + f);
  }
  return {read_image_png(dir / "source.png"), read_parsing_png(dir / "source_parsing.png"),
          read_keypoints(dir / "source_pose.txt")};
}

// A directory holding clothes.png / clothes_mask.png, or a triplet id looked
// up in the dataset.
fs::path resolve_clothes_dir(const std::string& clothes, const fs::path& dataset) {
  if (fs::is_directory(clothes)) return clothes;
  if (!dataset.empty()) {
    for (const char* split : {"train", "test"}) {
      const fs::path p = dataset / split / clothes;
      if (fs::is_directory(p)) return p;
    }
  }
  throw std::runtime_error("clothes '" + clothes + "' is neither a directory nor a triplet id in the dataset");
}

void write_result(const fs::path& out, const TryOnRequest& request, const TryOnResult& result) {
  fs::create_directories(out);
  write_image_png(out / "result.png", result.final_image);
  write_image_png(out / "grid.png", make_panel_row(try_on_panels(request, result)));
}

int run_try_on(const TryOnArgs& a) {
  TryOnRequest request;
  request.person = read_person(a.person);
  const fs::path cdir = resolve_clothes_dir(a.clothes, a.dataset);
  request.clothes = read_image_png(cdir / "clothes.png");
  request.clothes_mask = read_mask_png(cdir / "clothes_mask.png");
  request.target_pose = read_keypoints(a.pose);
  auto pipeline = Pipeline::load(a.checkpoints);
  const auto result = pipeline.run(request);
  write_result(a.out, request, result);
  std::cout << "wrote " << (a.out / "result.png").string() << " and " << (a.out / "grid.png").string() << "\n";
  return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoints = "checkpoints";
  fs::path dataset = "data";
  fs::path out = "eval";
  int splits = kDefaultIsSplits;
  std::vector<std::string> variants = report_variants();
};

int run_eval(const EvalArgs& a) {
  const auto report = evaluate_testset(a.checkpoints, a.dataset, a.variants, a.splits);
  fs::create_directories(a.out);
  const fs::path path = a.out / "report.tsv";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << report.to_tsv();
  f.close();
  const ReportRow& row = report.rows.front();
  std::printf("%s\tssim %.4f +- %.4f\tis %.4f +- %.4f\tn %d\n", row.model.c_str(), row.ssim.mean, row.ssim.std,
              row.is.mean, row.is.std, row.n);
  std::cout << "report " << path.string() << "\n";
  return 0;
}

// --- grid -----------------------------------------------------------------

struct GridArgs {
  fs::path checkpoints = "checkpoints";
  fs::path dataset = "data";
  fs::path out = "grid.png";
  std::string split = "test";
  int count = 4;
};

int run_grid(const GridArgs& a) {
  if (a.count < 1) throw UsageError("--count must be at least 1");
  auto triplets = load_split(a.dataset, a.split);
  if (triplets.empty()) throw std::runtime_error(a.split + " split of " + a.dataset.string() + " is empty");
  if (static_cast<int>(triplets.size()) > a.count) triplets.resize(a.count);
  std::vector<TryOnRequest> requests;
  for (const auto& t : triplets) requests.push_back({t.source, t.clothes, t.clothes_mask, t.target.keypoints});
  auto pipeline = Pipeline::load(a.checkpoints);
  const auto results = pipeline.run(requests);

  std::vector<Image> rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto panels = try_on_panels(requests[i], results[i]);
    panels.push_back({"TARGET", triplets[i].target.image});
    rows.push_back(make_panel_row(panels));
  }
  Image sheet(static_cast<int>(rows.size()) * rows[0].height(), rows[0].width());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int y = 0; y < rows[r].height(); ++y) {
      for (int x = 0; x < rows[r].width(); ++x) {
        sheet.set_pixel(static_cast<int>(r) * rows[r].height() + y, x,
                        {rows[r].at(y, x, 0), rows[r].at(y, x, 1), rows[r].at(y, x, 2)});
      }
    }
  }
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_image_png(a.out, sheet);
  std::cout << "wrote " << a.out.string() << " (" << rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Multi-pose virtual try-on on synthetic data"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Render a synthetic triplet dataset");
  gen_cmd->add_option("--count", gen.count, "Number of triplets")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--resolution", gen.resolution, "HxW")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
  gen_cmd->add_flag("--overwrite", gen.overwrite, "Replace a non-empty output directory");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one stage or the whole chain");
  train_cmd->add_option("--config", train.config, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& key : TrainConfig::keys()) {
    if (key == "stage") continue;
    std::string name = "--" + key;
    if (key == "checkpoints") name += ",--out";
    train_cmd->add_option_function<std::string>(
        name, [&train, key](const std::string& v) { train.overrides[key] = v; }, "Override config key " + key);
  }
  train_cmd->add_option("--stage", train.stage, "parsing, geo, warp, refine or all")
      ->check(CLI::IsMember({"parsing", "geo", "warp", "refine", "all"}))
      ->capture_default_str();

  TryOnArgs tryon;
  auto* tryon_cmd = app.add_subcommand("try-on", "Dress a person in new clothes and a new pose");
  tryon_cmd->add_option("--person", tryon.person, "Directory with source.png, source_parsing.png, source_pose.txt")
      ->required();
  tryon_cmd->add_option("--clothes", tryon.clothes, "Clothes directory or triplet id")->required();
  tryon_cmd->add_option("--pose", tryon.pose, "Target keypoint file")->required()->check(CLI::ExistingFile);
  tryon_cmd->add_option("--dataset", tryon.dataset, "Dataset for resolving clothes ids");
  tryon_cmd->add_option("--checkpoints", tryon.checkpoints)->capture_default_str();
  tryon_cmd->add_option("--out", tryon.out, "Output directory")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score the test split");
  eval_cmd->add_option("--checkpoints", ev.checkpoints)->capture_default_str();
  eval_cmd->add_option("--dataset", ev.dataset)->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Directory for report.tsv")->capture_default_str();
  eval_cmd->add_option("--splits", ev.splits, "Score splits")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--variants", ev.variants, "Report rows")
      ->check(CLI::IsMember(report_variants()))
      ->delimiter(',');

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Labelled intermediate panels for several triplets");
  grid_cmd->add_option("--checkpoints", grid.checkpoints)->capture_default_str();
  grid_cmd->add_option("--dataset", grid.dataset)->capture_default_str();
  grid_cmd->add_option("--out", grid.out, "PNG path")->capture_default_str();
  grid_cmd->add_option("--split", grid.split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  grid_cmd->add_option("--count", grid.count, "Rows")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(train);
    if (*tryon_cmd) return run_try_on(tryon);
    if (*eval_cmd) return run_eval(ev);
    if (*grid_cmd) return run_grid(grid);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
