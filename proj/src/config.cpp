#include "mgvton/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mgvton {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size() || !std::isfinite(v)) {
    throw std::invalid_argument("config key '" + key + "' expects a finite number, got '" + value + "'");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& value) { return static_cast<int>(parse_integer(key, value)); }

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key '" + key + "' expects true/false, got '" + value + "'");
}

std::string norm_name(NormKind n) { return n == NormKind::kBatch ? "batch" : "instance"; }
std::string gan_name(GanMode m) { return m == GanMode::kLeastSquares ? "lsgan" : "log"; }
std::string mask_target_name(MaskTarget t) { return t == MaskTarget::kOne ? "one" : "zero"; }

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kParsing: return "parsing";
    case Stage::kGeo: return "geo";
    case Stage::kWarp: return "warp";
    case Stage::kRefine: return "refine";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : kStageOrder) {
    if (stage_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown stage '" + name + "' (expected parsing, geo, warp or refine)");
}

PairMode parse_pair_mode(const std::string& name) {
  if (name == "all") return PairMode::kAll;
  if (name == "cross") return PairMode::kCross;
  if (name == "self") return PairMode::kSelf;
  throw std::invalid_argument("pair_mode must be all, cross or self");
}

std::string pair_mode_name(PairMode mode) {
  switch (mode) {
    case PairMode::kAll: return "all";
    case PairMode::kCross: return "cross";
    case PairMode::kSelf: return "self";
  }
  return "?";
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.preset = "paper";
  c.resolution = {256, 192};
  c.batch_size = 40;
  c.width_factor = 1;
  c.epochs = {{Stage::kParsing, 200}, {Stage::kGeo, 35}, {Stage::kWarp, 15}, {Stage::kRefine, 5}};
  c.render_downsamples = 3;
  c.render_residual_blocks = 9;
  return c;
}

TrainConfig TrainConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "preset", "stage", "dataset", "checkpoints", "resolution", "seed", "batch_size", "lr", "beta1", "beta2",
      "width_factor", "epochs_parsing", "epochs_geo", "epochs_warp", "epochs_refine", "norm", "gan_mode",
      "downsamples", "residual_blocks", "render_downsamples", "render_residual_blocks", "grid_size", "pose_radius",
      "pair_mode", "parsing_w_adv", "parsing_w_l1", "parsing_w_ce", "warp_w_adv", "warp_w_perceptual",
      "warp_w_feature", "warp_w_l1", "render_w_perceptual", "render_w_mask", "render_mask_target",
      "perceptual_seed", "bottleneck_warp", "prewarp_declothed"};
  return k;
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "preset") {
    preset_named(value);
    preset = value;
  } else if (key == "stage") {
    stage = parse_stage(value);
  } else if (key == "dataset") {
    dataset = value;
  } else if (key == "checkpoints") {
    checkpoints = value;
  } else if (key == "resolution") {
    resolution = Resolution::parse(value);
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_int(key, value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "beta1") {
    beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    beta2 = parse_double(key, value);
  } else if (key == "width_factor") {
    width_factor = parse_int(key, value);
  } else if (key.rfind("epochs_", 0) == 0) {
    epochs[parse_stage(key.substr(7))] = parse_int(key, value);
  } else if (key == "norm") {
    norm = parse_norm(value);
  } else if (key == "gan_mode") {
    gan_mode = parse_gan_mode(value);
  } else if (key == "downsamples") {
    downsamples = parse_int(key, value);
  } else if (key == "residual_blocks") {
    residual_blocks = parse_int(key, value);
  } else if (key == "render_downsamples") {
    render_downsamples = parse_int(key, value);
  } else if (key == "render_residual_blocks") {
    render_residual_blocks = parse_int(key, value);
  } else if (key == "grid_size") {
    grid_size = parse_int(key, value);
  } else if (key == "pose_radius") {
    pose_radius = parse_int(key, value);
  } else if (key == "pair_mode") {
    pair_mode = parse_pair_mode(value);
  } else if (key == "parsing_w_adv") {
    parsing_weights.adversarial = parse_double(key, value);
  } else if (key == "parsing_w_l1") {
    parsing_weights.l1 = parse_double(key, value);
  } else if (key == "parsing_w_ce") {
    parsing_weights.cross_entropy = parse_double(key, value);
  } else if (key == "warp_w_adv") {
    warp_weights.adversarial = parse_double(key, value);
  } else if (key == "warp_w_perceptual") {
    warp_weights.perceptual = parse_double(key, value);
  } else if (key == "warp_w_feature") {
    warp_weights.feature = parse_double(key, value);
  } else if (key == "warp_w_l1") {
    warp_weights.l1 = parse_double(key, value);
  } else if (key == "render_w_perceptual") {
    render_weights.perceptual = parse_double(key, value);
  } else if (key == "render_w_mask") {
    render_weights.mask = parse_double(key, value);
  } else if (key == "render_mask_target") {
    render_weights.mask_target = parse_mask_target(value);
  } else if (key == "perceptual_seed") {
    perceptual_seed = parse_u64(key, value);
  } else if (key == "bottleneck_warp") {
    bottleneck_warp = parse_bool(key, value);
  } else if (key == "prewarp_declothed") {
    prewarp_declothed = parse_bool(key, value);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::string TrainConfig::get(const std::string& key) const {
  if (key == "preset") return preset;
  if (key == "stage") return stage_name(stage);
  if (key == "dataset") return dataset.string();
  if (key == "checkpoints") return checkpoints.string();
  if (key == "resolution") return resolution.to_string();
  if (key == "seed") return std::to_string(seed);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "lr") return fmt(lr);
  if (key == "beta1") return fmt(beta1);
  if (key == "beta2") return fmt(beta2);
  if (key == "width_factor") return std::to_string(width_factor);
  if (key.rfind("epochs_", 0) == 0) return std::to_string(epochs.at(parse_stage(key.substr(7))));
  if (key == "norm") return norm_name(norm);
  if (key == "gan_mode") return gan_name(gan_mode);
  if (key == "downsamples") return std::to_string(downsamples);
  if (key == "residual_blocks") return std::to_string(residual_blocks);
  if (key == "render_downsamples") return std::to_string(render_downsamples);
  if (key == "render_residual_blocks") return std::to_string(render_residual_blocks);
  if (key == "grid_size") return std::to_string(grid_size);
  if (key == "pose_radius") return std::to_string(pose_radius);
  if (key == "pair_mode") return pair_mode_name(pair_mode);
  if (key == "parsing_w_adv") return fmt(parsing_weights.adversarial);
  if (key == "parsing_w_l1") return fmt(parsing_weights.l1);
  if (key == "parsing_w_ce") return fmt(parsing_weights.cross_entropy);
  if (key == "warp_w_adv") return fmt(warp_weights.adversarial);
  if (key == "warp_w_perceptual") return fmt(warp_weights.perceptual);
  if (key == "warp_w_feature") return fmt(warp_weights.feature);
  if (key == "warp_w_l1") return fmt(warp_weights.l1);
  if (key == "render_w_perceptual") return fmt(render_weights.perceptual);
  if (key == "render_w_mask") return fmt(render_weights.mask);
  if (key == "render_mask_target") return mask_target_name(render_weights.mask_target);
  if (key == "perceptual_seed") return std::to_string(perceptual_seed);
  if (key == "bottleneck_warp") return bottleneck_warp ? "true" : "false";
  if (key == "prewarp_declothed") return prewarp_declothed ? "true" : "false";
  throw std::invalid_argument("unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
  if (resolution.height < 16 || resolution.width < 12) fail("resolution must be at least 16x12");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) fail("betas must lie in [0, 1)");
  if (width_factor < 1 || 64 % width_factor != 0) fail("width_factor must divide 64");
  for (const auto& [s, e] : epochs) {
    if (e < 0) fail("epochs_" + stage_name(s) + " must be >= 0");
  }
  if (downsamples < 1 || render_downsamples < 1) fail("downsample counts must be >= 1");
  if (residual_blocks < 0 || render_residual_blocks < 0) fail("residual block counts must be >= 0");
  if (grid_size < 2) fail("grid_size must be >= 2");
  if (pose_radius < 0 || 2 * pose_radius >= std::min(resolution.height, resolution.width)) {
    fail("pose_radius must be >= 0 and fit the canvas");
  }
  for (double w : {parsing_weights.adversarial, parsing_weights.l1, parsing_weights.cross_entropy}) {
    if (w < 0.0) fail("parsing loss weights must be >= 0");
  }
  warp_weights.validate();
  render_weights.validate();
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  for (const auto& k : keys()) out << k << " = " << get(k) << "\n";
  return out.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  TrainConfig c;
  for (const auto& [k, v] : entries) {
    if (k == "preset") c = preset_named(v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") c.set(k, v);
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace mgvton
