#pragma once

// Procedural stand-in for a photographic try-on corpus.
//
// A person is an articulated 2D figure built in a canonical 256 x 192 frame and
// rasterised at the requested resolution by testing pixel sample points
// against simple primitives (capsules, discs, convex quads). There is no
// anti-aliasing, so every pixel carries exactly one parsing label.
//
// The ten joint angles of a PoseSpec drive the 18-keypoint skeleton:
//   body joints (neck, shoulders, elbows, wrists, hips, knees, ankles) come
//   from forward kinematics; nose, eyes and ears are fixed offsets from the
//   head centre, rotated with the head.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mgvton/data_model.hpp"

namespace mgvton {

// Platform-independent random source: raw mt19937_64 output mapped to doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int below(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

using Rgb = std::array<float, 3>;

struct PersonSpec {
  std::uint64_t identity_seed = 0;
  Rgb skin{};
  Rgb hair{};
  int hair_style = 0;  // 0 short cap, 1 long side strands
  Rgb lower_clothes{};
  double shoulder_half_width = 24.0;
  double hip_half_width = 13.0;
  double torso_length = 70.0;
  double upper_arm = 38.0;
  double forearm = 34.0;
  double thigh = 46.0;
  double shin = 44.0;
  double arm_radius = 6.5;
  double leg_radius = 8.5;
  double head_radius = 14.0;

  static PersonSpec sample(std::uint64_t seed);
};

enum class Pattern : int { kSolid = 0, kStripes = 1, kDots = 2 };
inline constexpr int kNumPatterns = 3;

enum class Sleeve : int { kNone = 0, kShort = 1, kLong = 2 };

struct ClothesSpec {
  Rgb base{};
  Pattern pattern = Pattern::kSolid;
  Sleeve sleeve = Sleeve::kShort;

  static ClothesSpec sample(std::uint64_t seed);
  Rgb color_at(double u, double v) const;  // pattern lookup in garment-local canonical units
};

// Joint angles in radians. Limb angles are measured from straight down,
// positive values swing the limb away from the body midline.
struct PoseSpec {
  enum Angle : int {
    kHeadTilt = 0,
    kTorsoLean,
    kRightShoulder,
    kLeftShoulder,
    kRightElbow,
    kLeftElbow,
    kRightHip,
    kLeftHip,
    kRightKnee,
    kLeftKnee,
  };
  std::array<double, 10> angles{};
  double offset_x = 0.0;  // canonical pixels
  double offset_y = 0.0;
  double scale = 1.0;

  static PoseSpec sample(Rng& rng, const PersonSpec& person);
  // Number of wrists above their shoulder (0..2); used as a coarse pose class.
  int raised_arms(const PersonSpec& person) const;
};

double pose_distance(const PoseSpec& a, const PoseSpec& b);

struct Point2d {
  double x = 0.0;
  double y = 0.0;
};

// Canonical-frame skeleton derived from a pose (before resolution scaling).
struct Skeleton {
  std::array<Point2d, kNumKeypoints> joints{};
  Point2d head_center;
  double head_angle = 0.0;
  Point2d pelvis;
};

Skeleton forward_kinematics(const PersonSpec& person, const PoseSpec& pose);

struct RenderedPerson {
  Image image;
  ParsingMap parsing;
  KeypointSet keypoints;
  Mask clothes_coverage;  // visible pixels painted by garment primitives
  Mask hair_coverage;     // pixels painted by the hair primitive
};

// Throws std::invalid_argument if a keypoint would leave the canvas.
RenderedPerson render_person(const PersonSpec& person, const ClothesSpec& clothes, const PoseSpec& pose,
                             Resolution resolution);

struct ClothesProduct {
  Image image;
  Mask mask;
};

ClothesProduct render_clothes_product(const ClothesSpec& clothes, Resolution resolution);

struct TripletSpec {
  std::uint64_t seed = 0;
  PersonSpec person;
  ClothesSpec clothes;
  PoseSpec source_pose;
  PoseSpec target_pose;

  static TripletSpec sample(std::uint64_t seed);
};

inline constexpr double kMinPoseDistance = 1.0;

Triplet render_triplet(const TripletSpec& spec, Resolution resolution, const std::string& id);

struct ManifestEntry {
  std::string id;
  std::string split;  // "train" or "test"
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  Resolution resolution;
  std::vector<ManifestEntry> entries;
};

// Triplet i goes to the test split iff i % 6 == 5, so a dataset of n triplets
// holds floor(n / 6) test and n - floor(n / 6) train triplets.
std::string split_for_index(int index);
std::uint64_t triplet_seed(std::uint64_t dataset_seed, int index);

DatasetManifest make_dataset(int count, std::uint64_t seed, Resolution resolution, const std::filesystem::path& root);
DatasetManifest read_manifest(const std::filesystem::path& root);
Triplet load_triplet(const std::filesystem::path& triplet_dir, const std::string& id);
std::vector<Triplet> load_split(const std::filesystem::path& root, const std::string& split);

}  // namespace mgvton
