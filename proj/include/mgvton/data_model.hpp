#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace mgvton {

inline constexpr int kNumLabels = 20;
inline constexpr int kNumKeypoints = 18;
inline constexpr int kBodyShapeHeight = 16;
inline constexpr int kBodyShapeWidth = 12;
inline constexpr float kClothesFill = 0.5f;

// Parsing vocabulary. Labels 10..19 are reserved so the channel count stays at 20.
enum Label : std::uint8_t {
  kBackground = 0,
  kHair = 1,
  kFace = 2,
  kUpperClothes = 3,
  kLowerClothes = 4,
  kLeftArm = 5,
  kRightArm = 6,
  kLeftLeg = 7,
  kRightLeg = 8,
  kTorsoSkin = 9,
};

// Keypoint slots in OpenPose/COCO-18 order.
enum Joint : int {
  kNose = 0,
  kNeck,
  kRightShoulder,
  kRightElbow,
  kRightWrist,
  kLeftShoulder,
  kLeftElbow,
  kLeftWrist,
  kRightHip,
  kRightKnee,
  kRightAnkle,
  kLeftHip,
  kLeftKnee,
  kLeftAnkle,
  kRightEye,
  kLeftEye,
  kRightEar,
  kLeftEar,
};

bool is_clothes_label(int label);
bool is_body_label(int label);

struct Resolution {
  int height = 256;
  int width = 192;

  bool operator==(const Resolution&) const = default;
  std::string to_string() const;
  static Resolution parse(const std::string& text);  // "HxW"
};

// H x W x 3 raster, interleaved, every value finite and in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f);
  Image(int height, int width, std::vector<float> hwc);

  int height() const { return height_; }
  int width() const { return width_; }
  Resolution resolution() const { return {height_, width_}; }
  bool empty() const { return pixels_.empty(); }

  float at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }
  void set(int y, int x, int c, float value);
  void set_pixel(int y, int x, const std::array<float, 3>& rgb);
  std::span<const float> data() const { return pixels_; }

  // [3, H, W] float32.
  torch::Tensor to_tensor() const;
  // Accepts [3, H, W]; values are clamped into [0, 1], non-finite values rejected.
  static Image from_tensor(const torch::Tensor& chw);

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

// Single-channel real mask (binary masks hold exactly 0 or 1).
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, float fill = 0.0f);
  Mask(int height, int width, std::vector<float> values);

  int height() const { return height_; }
  int width() const { return width_; }
  float at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> data() const { return values_; }
  double sum() const;

  torch::Tensor to_tensor() const;  // [1, H, W]
  static Mask from_tensor(const torch::Tensor& t);  // [1, H, W] or [H, W]

  bool operator==(const Mask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

class ParsingMap {
 public:
  ParsingMap() = default;
  ParsingMap(int height, int width, std::uint8_t fill = kBackground);
  ParsingMap(int height, int width, std::vector<std::uint8_t> labels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, std::uint8_t label);
  std::span<const std::uint8_t> data() const { return labels_; }

  torch::Tensor to_label_tensor() const;    // [H, W] int64
  torch::Tensor to_one_hot_tensor() const;  // [20, H, W] float32
  // Per-pixel argmax over a [20, H, W] score tensor.
  static ParsingMap from_scores(const torch::Tensor& scores);

  bool operator==(const ParsingMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

struct Keypoint {
  double x = -1.0;
  double y = -1.0;
  bool visible = false;

  bool operator==(const Keypoint&) const = default;
};

struct KeypointSet {
  std::array<Keypoint, kNumKeypoints> points{};

  // Throws std::invalid_argument if a visible point is non-finite or off-canvas.
  void validate(Resolution resolution) const;
  bool operator==(const KeypointSet&) const = default;
};

// 18 binary channels, channel-major.
class PoseHeatmap {
 public:
  PoseHeatmap() = default;
  PoseHeatmap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t at(int channel, int y, int x) const { return values_[index(channel, y, x)]; }
  void set(int channel, int y, int x, std::uint8_t v) { values_[index(channel, y, x)] = v; }
  long channel_sum(int channel) const;

  torch::Tensor to_tensor() const;  // [18, H, W] float32

  bool operator==(const PoseHeatmap&) const = default;

 private:
  std::size_t index(int channel, int y, int x) const {
    return (static_cast<std::size_t>(channel) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct BodyMasks {
  Mask hair;
  Mask face;
  Mask body_shape;

  torch::Tensor to_tensor() const;  // [3, H, W]: hair, face, body shape
};

struct PersonView {
  Image image;
  ParsingMap parsing;
  KeypointSet keypoints;
};

struct Triplet {
  std::string id;
  PersonView source;
  Image clothes;
  Mask clothes_mask;
  PersonView target;
};

PoseHeatmap encode_pose_heatmap(const KeypointSet& keypoints, int height, int width, int radius = 4);
BodyMasks extract_body_masks(const ParsingMap& parsing);
Image remove_clothes(const Image& person, const ParsingMap& parsing);
Mask clothes_mask_from_parsing(const ParsingMap& parsing);
// Indicator of every non-background label.
Mask foreground_mask(const ParsingMap& parsing);
Mask label_mask(const ParsingMap& parsing, std::span<const std::uint8_t> labels);

// Area-average `mask` down to out_h x out_w (fractional cell overlaps are weighted).
Mask area_downsample(const Mask& mask, int out_h, int out_w);
// Half-pixel-centred bilinear resize with edge clamping.
Mask bilinear_resize(const Mask& mask, int out_h, int out_w);

}  // namespace mgvton
