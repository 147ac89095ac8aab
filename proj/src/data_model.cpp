#include "mgvton/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mgvton {

namespace {

void check_dims(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("raster dimensions must be positive");
  }
}

}  // namespace

bool is_clothes_label(int label) { return label == kUpperClothes; }

bool is_body_label(int label) {
  switch (label) {
    case kUpperClothes:
    case kLowerClothes:
    case kLeftArm:
    case kRightArm:
    case kLeftLeg:
    case kRightLeg:
    case kTorsoSkin:
      return true;
    default:
      return false;
  }
}

std::string Resolution::to_string() const {
  return std::to_string(height) + "x" + std::to_string(width);
}

Resolution Resolution::parse(const std::string& text) {
  int h = 0;
  int w = 0;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> h >> sep >> w) || (sep != 'x' && sep != 'X') || h <= 0 || w <= 0 || !in.eof()) {
    throw std::invalid_argument("resolution must look like HxW, got '" + text + "'");
  }
  return {h, w};
}

// ---------------------------------------------------------------- Image

Image::Image(int height, int width, float fill) : height_(height), width_(width) {
  check_dims(height, width);
  if (!(fill >= 0.0f && fill <= 1.0f)) throw std::invalid_argument("image fill outside [0,1]");
  pixels_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

Image::Image(int height, int width, std::vector<float> hwc)
    : height_(height), width_(width), pixels_(std::move(hwc)) {
  check_dims(height, width);
  if (pixels_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw std::invalid_argument("image buffer size does not match dimensions");
  }
  for (float v : pixels_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("image value outside [0,1]");
  }
}

void Image::set(int y, int x, int c, float value) {
  if (!(value >= 0.0f && value <= 1.0f)) throw std::invalid_argument("image value outside [0,1]");
  pixels_[index(y, x, c)] = value;
}

void Image::set_pixel(int y, int x, const std::array<float, 3>& rgb) {
  for (int c = 0; c < 3; ++c) set(y, x, c, rgb[c]);
}

torch::Tensor Image::to_tensor() const {
  auto hwc = torch::from_blob(const_cast<float*>(pixels_.data()), {height_, width_, 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

Image Image::from_tensor(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) throw std::invalid_argument("expected a [3,H,W] tensor");
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32);
  if (!torch::isfinite(t).all().item<bool>()) throw std::invalid_argument("non-finite image tensor");
  t = t.clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
  const int h = static_cast<int>(t.size(0));
  const int w = static_cast<int>(t.size(1));
  std::vector<float> buf(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  return Image(h, w, std::move(buf));
}

// ---------------------------------------------------------------- Mask

Mask::Mask(int height, int width, float fill) : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

Mask::Mask(int height, int width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("mask buffer size does not match dimensions");
  }
}

double Mask::sum() const {
  double s = 0.0;
  for (float v : values_) s += v;
  return s;
}

torch::Tensor Mask::to_tensor() const {
  return torch::from_blob(const_cast<float*>(values_.data()), {1, height_, width_}, torch::kFloat32).clone();
}

Mask Mask::from_tensor(const torch::Tensor& t) {
  auto m = t.detach().to(torch::kCPU, torch::kFloat32);
  if (m.dim() == 3) {
    if (m.size(0) != 1) throw std::invalid_argument("expected a single-channel mask tensor");
    m = m[0];
  }
  if (m.dim() != 2) throw std::invalid_argument("expected a [1,H,W] or [H,W] mask tensor");
  m = m.contiguous();
  std::vector<float> buf(m.data_ptr<float>(), m.data_ptr<float>() + m.numel());
  return Mask(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), std::move(buf));
}

// ---------------------------------------------------------------- ParsingMap

ParsingMap::ParsingMap(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  check_dims(height, width);
  if (fill >= kNumLabels) throw std::invalid_argument("label outside vocabulary");
  labels_.assign(static_cast<std::size_t>(height) * width, fill);
}

ParsingMap::ParsingMap(int height, int width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  check_dims(height, width);
  if (labels_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("parsing buffer size does not match dimensions");
  }
  for (auto l : labels_) {
    if (l >= kNumLabels) throw std::invalid_argument("label outside vocabulary");
  }
}

void ParsingMap::set(int y, int x, std::uint8_t label) {
  if (label >= kNumLabels) throw std::invalid_argument("label outside vocabulary");
  labels_[static_cast<std::size_t>(y) * width_ + x] = label;
}

torch::Tensor ParsingMap::to_label_tensor() const {
  auto t = torch::empty({height_, width_}, torch::kInt64);
  auto* p = t.data_ptr<std::int64_t>();
  for (std::size_t i = 0; i < labels_.size(); ++i) p[i] = labels_[i];
  return t;
}

torch::Tensor ParsingMap::to_one_hot_tensor() const {
  auto t = torch::zeros({kNumLabels, height_, width_}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(height_) * width_;
  for (std::size_t i = 0; i < labels_.size(); ++i) p[labels_[i] * plane + i] = 1.0f;
  return t;
}

ParsingMap ParsingMap::from_scores(const torch::Tensor& scores) {
  if (scores.dim() != 3 || scores.size(0) != kNumLabels) {
    throw std::invalid_argument("expected a [20,H,W] score tensor");
  }
  auto arg = scores.detach().to(torch::kCPU).argmax(0).to(torch::kInt64).contiguous();
  const int h = static_cast<int>(arg.size(0));
  const int w = static_cast<int>(arg.size(1));
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w);
  const auto* p = arg.data_ptr<std::int64_t>();
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(p[i]);
  return ParsingMap(h, w, std::move(labels));
}

// ---------------------------------------------------------------- Keypoints

void KeypointSet::validate(Resolution resolution) const {
  for (const auto& kp : points) {
    if (!kp.visible) continue;
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
      throw std::invalid_argument("visible keypoint has non-finite coordinates");
    }
    if (kp.x < 0.0 || kp.y < 0.0 || kp.x > resolution.width - 1 || kp.y > resolution.height - 1) {
      throw std::invalid_argument("visible keypoint outside image bounds");
    }
  }
}

// ---------------------------------------------------------------- PoseHeatmap

PoseHeatmap::PoseHeatmap(int height, int width) : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(kNumKeypoints) * height * width, 0);
}

long PoseHeatmap::channel_sum(int channel) const {
  long s = 0;
  const std::size_t plane = static_cast<std::size_t>(height_) * width_;
  for (std::size_t i = 0; i < plane; ++i) s += values_[channel * plane + i];
  return s;
}

torch::Tensor PoseHeatmap::to_tensor() const {
  auto t = torch::empty({kNumKeypoints, height_, width_}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t i = 0; i < values_.size(); ++i) p[i] = values_[i];
  return t;
}

torch::Tensor BodyMasks::to_tensor() const {
  return torch::cat({hair.to_tensor(), face.to_tensor(), body_shape.to_tensor()}, 0);
}

// ---------------------------------------------------------------- operations

PoseHeatmap encode_pose_heatmap(const KeypointSet& keypoints, int height, int width, int radius) {
  if (radius < 0 || height <= 2 * radius || width <= 2 * radius) {
    throw std::invalid_argument("heatmap size must exceed twice the disc radius");
  }
  PoseHeatmap heatmap(height, width);
  const double r2 = static_cast<double>(radius) * radius;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto& kp = keypoints.points[k];
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
      if (kp.visible) throw std::invalid_argument("keypoint coordinates must be finite");
      continue;
    }
    if (!kp.visible) continue;
    const int y0 = std::max(0, static_cast<int>(std::floor(kp.y - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(kp.y + radius)));
    const int x0 = std::max(0, static_cast<int>(std::floor(kp.x - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(kp.x + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - kp.x;
        const double dy = y - kp.y;
        if (dx * dx + dy * dy <= r2) heatmap.set(k, y, x, 1);
      }
    }
  }
  return heatmap;
}

Mask label_mask(const ParsingMap& parsing, std::span<const std::uint8_t> labels) {
  Mask mask(parsing.height(), parsing.width());
  for (int y = 0; y < parsing.height(); ++y) {
    for (int x = 0; x < parsing.width(); ++x) {
      const auto l = parsing.at(y, x);
      if (std::find(labels.begin(), labels.end(), l) != labels.end()) mask.at(y, x) = 1.0f;
    }
  }
  return mask;
}

Mask area_downsample(const Mask& mask, int out_h, int out_w) {
  check_dims(out_h, out_w);
  const double sy = static_cast<double>(mask.height()) / out_h;
  const double sx = static_cast<double>(mask.width()) / out_w;
  Mask out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const double ya = i * sy;
    const double yb = (i + 1) * sy;
    for (int j = 0; j < out_w; ++j) {
      const double xa = j * sx;
      const double xb = (j + 1) * sx;
      double acc = 0.0;
      for (int y = static_cast<int>(std::floor(ya)); y < std::min<double>(mask.height(), std::ceil(yb)); ++y) {
        const double wy = std::min<double>(y + 1, yb) - std::max<double>(y, ya);
        if (wy <= 0.0) continue;
        for (int x = static_cast<int>(std::floor(xa)); x < std::min<double>(mask.width(), std::ceil(xb)); ++x) {
          const double wx = std::min<double>(x + 1, xb) - std::max<double>(x, xa);
          if (wx <= 0.0) continue;
          acc += wy * wx * mask.at(y, x);
        }
      }
      out.at(i, j) = static_cast<float>(acc / (sy * sx));
    }
  }
  return out;
}

Mask bilinear_resize(const Mask& mask, int out_h, int out_w) {
  check_dims(out_h, out_w);
  const double sy = static_cast<double>(mask.height()) / out_h;
  const double sx = static_cast<double>(mask.width()) / out_w;
  Mask out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(mask.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, mask.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(mask.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, mask.width() - 1);
      const double tx = fx - x0;
      const double top = (1.0 - tx) * mask.at(y0, x0) + tx * mask.at(y0, x1);
      const double bottom = (1.0 - tx) * mask.at(y1, x0) + tx * mask.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - ty) * top + ty * bottom);
    }
  }
  return out;
}

BodyMasks extract_body_masks(const ParsingMap& parsing) {
  static constexpr std::uint8_t kHairLabels[] = {kHair};
  static constexpr std::uint8_t kFaceLabels[] = {kFace};
  static constexpr std::uint8_t kBodyLabels[] = {kUpperClothes, kLowerClothes, kLeftArm, kRightArm,
                                                 kLeftLeg,      kRightLeg,     kTorsoSkin};
  BodyMasks masks;
  masks.hair = label_mask(parsing, kHairLabels);
  masks.face = label_mask(parsing, kFaceLabels);
  const Mask body = label_mask(parsing, kBodyLabels);
  masks.body_shape = bilinear_resize(area_downsample(body, kBodyShapeHeight, kBodyShapeWidth),
                                     parsing.height(), parsing.width());
  return masks;
}

Image remove_clothes(const Image& person, const ParsingMap& parsing) {
  if (person.height() != parsing.height() || person.width() != parsing.width()) {
    throw std::invalid_argument("person image and parsing are not aligned");
  }
  Image out = person;
  for (int y = 0; y < parsing.height(); ++y) {
    for (int x = 0; x < parsing.width(); ++x) {
      if (is_clothes_label(parsing.at(y, x))) out.set_pixel(y, x, {kClothesFill, kClothesFill, kClothesFill});
    }
  }
  return out;
}

Mask clothes_mask_from_parsing(const ParsingMap& parsing) {
  static constexpr std::uint8_t kClothes[] = {kUpperClothes};
  return label_mask(parsing, kClothes);
}

Mask foreground_mask(const ParsingMap& parsing) {
  Mask mask(parsing.height(), parsing.width());
  for (int y = 0; y < parsing.height(); ++y) {
    for (int x = 0; x < parsing.width(); ++x) {
      if (parsing.at(y, x) != kBackground) mask.at(y, x) = 1.0f;
    }
  }
  return mask;
}

}  // namespace mgvton
