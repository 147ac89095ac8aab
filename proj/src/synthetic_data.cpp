#include "mgvton/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "mgvton/image_io.hpp"

namespace mgvton {

namespace {

constexpr double kCanonicalHeight = 256.0;
constexpr double kCanonicalWidth = 192.0;
constexpr double kPelvisX = 96.0;
constexpr double kPelvisY = 136.0;
constexpr double kKeypointMargin = 20.0;
constexpr Rgb kWhite{1.0f, 1.0f, 1.0f};

Point2d operator+(Point2d a, Point2d b) { return {a.x + b.x, a.y + b.y}; }
Point2d operator-(Point2d a, Point2d b) { return {a.x - b.x, a.y - b.y}; }
Point2d operator*(double s, Point2d a) { return {s * a.x, s * a.y}; }

Point2d rotate(Point2d p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {p.x * c - p.y * s, p.x * s + p.y * c};
}

// Unit limb direction; `side` is -1 for the person's right (image left), +1 for the left.
Point2d limb_direction(double angle, double side) { return {side * std::sin(angle), std::cos(angle)}; }

double segment_distance2(Point2d p, Point2d a, Point2d b) {
  const Point2d ab = b - a;
  const Point2d ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point2d d = p - (a + t * ab);
  return d.x * d.x + d.y * d.y;
}

bool in_capsule(Point2d p, Point2d a, Point2d b, double radius) {
  return segment_distance2(p, a, b) <= radius * radius;
}

bool in_disc(Point2d p, Point2d c, double radius) {
  const Point2d d = p - c;
  return d.x * d.x + d.y * d.y <= radius * radius;
}

// Convex polygon, vertices in consistent winding.
bool in_convex(Point2d p, const std::vector<Point2d>& poly) {
  int sign = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2d a = poly[i];
    const Point2d b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const int s = cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

Rgb jitter(Rgb c, Rng& rng, double amount) {
  for (auto& v : c) v = static_cast<float>(std::clamp(v + rng.uniform(-amount, amount), 0.0, 0.92));
  return c;
}

double positive_mod(double v, double m) {
  const double r = std::fmod(v, m);
  return r < 0.0 ? r + m : r;
}

class Canvas {
 public:
  explicit Canvas(Resolution res)
      : res_(res),
        image_(res.height, res.width, 1.0f),
        parsing_(res.height, res.width),
        clothes_(res.height, res.width),
        hair_(res.height, res.width) {}

  Point2d canonical(int x, int y) const {
    return {x * kCanonicalWidth / res_.width, y * kCanonicalHeight / res_.height};
  }

  void paint(const std::function<bool(Point2d)>& inside, std::uint8_t label,
             const std::function<Rgb(Point2d)>& color, bool garment = false, bool hair = false) {
    for (int y = 0; y < res_.height; ++y) {
      for (int x = 0; x < res_.width; ++x) {
        const Point2d q = canonical(x, y);
        if (!inside(q)) continue;
        image_.set_pixel(y, x, color(q));
        parsing_.set(y, x, label);
        clothes_.at(y, x) = garment ? 1.0f : 0.0f;
        hair_.at(y, x) = hair ? 1.0f : 0.0f;
      }
    }
  }

  void clear(const std::function<bool(Point2d)>& inside) {
    paint(inside, kBackground, [](Point2d) { return kWhite; });
  }

  Image& image() { return image_; }
  ParsingMap& parsing() { return parsing_; }
  Mask& clothes() { return clothes_; }
  Mask& hair() { return hair_; }

 private:
  Resolution res_;
  Image image_;
  ParsingMap parsing_;
  Mask clothes_;
  Mask hair_;
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- specs

PersonSpec PersonSpec::sample(std::uint64_t seed) {
  static constexpr Rgb kSkin[] = {
      {0.96f, 0.80f, 0.69f}, {0.87f, 0.67f, 0.52f}, {0.72f, 0.52f, 0.38f}, {0.55f, 0.38f, 0.26f}, {0.40f, 0.27f, 0.18f}};
  static constexpr Rgb kHairColors[] = {
      {0.10f, 0.08f, 0.06f}, {0.35f, 0.22f, 0.10f}, {0.70f, 0.55f, 0.30f}, {0.50f, 0.50f, 0.50f}, {0.60f, 0.20f, 0.10f}};
  Rng rng(mix_seed(seed, 11));
  PersonSpec p;
  p.identity_seed = seed;
  p.skin = jitter(kSkin[rng.below(5)], rng, 0.03);
  p.hair = jitter(kHairColors[rng.below(5)], rng, 0.03);
  p.hair_style = rng.below(2);
  p.lower_clothes = {static_cast<float>(rng.uniform(0.08, 0.6)), static_cast<float>(rng.uniform(0.08, 0.6)),
                     static_cast<float>(rng.uniform(0.08, 0.6))};
  const double build = rng.uniform(0.94, 1.06);
  p.shoulder_half_width = 24.0 * rng.uniform(0.92, 1.08);
  p.hip_half_width = 13.0 * rng.uniform(0.92, 1.08);
  p.torso_length = 70.0 * build;
  p.upper_arm = 38.0 * build;
  p.forearm = 34.0 * build;
  p.thigh = 46.0 * build;
  p.shin = 44.0 * build;
  p.arm_radius = 6.5 * rng.uniform(0.9, 1.15);
  p.leg_radius = 8.5 * rng.uniform(0.9, 1.15);
  p.head_radius = 14.0 * rng.uniform(0.95, 1.05);
  return p;
}

ClothesSpec ClothesSpec::sample(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 23));
  ClothesSpec c;
  for (auto& v : c.base) v = static_cast<float>(rng.uniform(0.1, 0.9));
  // keep garments visibly saturated so they separate from skin and background
  c.base[rng.below(3)] = static_cast<float>(rng.uniform(0.05, 0.35));
  c.pattern = static_cast<Pattern>(rng.below(kNumPatterns));
  c.sleeve = static_cast<Sleeve>(rng.below(3));
  return c;
}

Rgb ClothesSpec::color_at(double u, double v) const {
  const Rgb dark{base[0] * 0.55f, base[1] * 0.55f, base[2] * 0.55f};
  switch (pattern) {
    case Pattern::kSolid:
      return base;
    case Pattern::kStripes:
      return positive_mod(v, 16.0) < 8.0 ? dark : base;
    case Pattern::kDots: {
      const double du = positive_mod(u, 16.0) - 8.0;
      const double dv = positive_mod(v, 16.0) - 8.0;
      return du * du + dv * dv <= 16.0 ? dark : base;
    }
  }
  return base;
}

Skeleton forward_kinematics(const PersonSpec& person, const PoseSpec& pose) {
  using A = PoseSpec::Angle;
  const auto& a = pose.angles;
  const double lean = a[A::kTorsoLean];
  const double right = -1.0;
  const double left = 1.0;

  // body-frame points relative to the pelvis, later scaled and placed
  const Point2d pelvis{0.0, 0.0};
  const Point2d neck = rotate({0.0, -person.torso_length}, lean);
  const Point2d r_shoulder = neck + rotate({-person.shoulder_half_width, 6.0}, lean);
  const Point2d l_shoulder = neck + rotate({person.shoulder_half_width, 6.0}, lean);
  const Point2d r_elbow = r_shoulder + person.upper_arm * limb_direction(a[A::kRightShoulder], right);
  const Point2d l_elbow = l_shoulder + person.upper_arm * limb_direction(a[A::kLeftShoulder], left);
  const Point2d r_wrist =
      r_elbow + person.forearm * limb_direction(a[A::kRightShoulder] + a[A::kRightElbow], right);
  const Point2d l_wrist = l_elbow + person.forearm * limb_direction(a[A::kLeftShoulder] + a[A::kLeftElbow], left);
  const Point2d r_hip{-person.hip_half_width, 0.0};
  const Point2d l_hip{person.hip_half_width, 0.0};
  const Point2d r_knee = r_hip + person.thigh * limb_direction(a[A::kRightHip], right);
  const Point2d l_knee = l_hip + person.thigh * limb_direction(a[A::kLeftHip], left);
  const Point2d r_ankle = r_knee + person.shin * limb_direction(a[A::kRightHip] + a[A::kRightKnee], right);
  const Point2d l_ankle = l_knee + person.shin * limb_direction(a[A::kLeftHip] + a[A::kLeftKnee], left);

  const double head_angle = lean + a[A::kHeadTilt];
  const Point2d head = neck + rotate({0.0, -20.0}, head_angle);
  const auto face = [&](double x, double y) { return head + rotate({x, y}, head_angle); };

  Skeleton s;
  s.joints[kNose] = face(0.0, 3.0);
  s.joints[kNeck] = neck;
  s.joints[kRightShoulder] = r_shoulder;
  s.joints[kRightElbow] = r_elbow;
  s.joints[kRightWrist] = r_wrist;
  s.joints[kLeftShoulder] = l_shoulder;
  s.joints[kLeftElbow] = l_elbow;
  s.joints[kLeftWrist] = l_wrist;
  s.joints[kRightHip] = r_hip;
  s.joints[kRightKnee] = r_knee;
  s.joints[kRightAnkle] = r_ankle;
  s.joints[kLeftHip] = l_hip;
  s.joints[kLeftKnee] = l_knee;
  s.joints[kLeftAnkle] = l_ankle;
  s.joints[kRightEye] = face(-5.0, -3.0);
  s.joints[kLeftEye] = face(5.0, -3.0);
  s.joints[kRightEar] = face(-13.0, 0.0);
  s.joints[kLeftEar] = face(13.0, 0.0);
  s.head_center = head;
  s.head_angle = head_angle;
  s.pelvis = pelvis;

  const Point2d origin{kPelvisX + pose.offset_x, kPelvisY + pose.offset_y};
  const auto place = [&](Point2d p) { return origin + pose.scale * p; };
  for (auto& j : s.joints) j = place(j);
  s.head_center = place(s.head_center);
  s.pelvis = place(s.pelvis);
  return s;
}

namespace {

bool skeleton_on_canvas(const Skeleton& s, const PersonSpec& person, double scale) {
  for (const auto& j : s.joints) {
    if (j.x < kKeypointMargin || j.x > kCanonicalWidth - 1 - kKeypointMargin || j.y < kKeypointMargin ||
        j.y > kCanonicalHeight - 1 - kKeypointMargin) {
      return false;
    }
  }
  return s.head_center.y - scale * (person.head_radius + 2.0) >= 2.0;
}

}  // namespace

PoseSpec PoseSpec::sample(Rng& rng, const PersonSpec& person) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    PoseSpec p;
    p.angles[kHeadTilt] = rng.uniform(-0.25, 0.25);
    p.angles[kTorsoLean] = rng.uniform(-0.12, 0.12);
    p.angles[kRightShoulder] = rng.uniform(-0.1, 2.4);
    p.angles[kLeftShoulder] = rng.uniform(-0.1, 2.4);
    p.angles[kRightElbow] = rng.uniform(-0.3, 1.6);
    p.angles[kLeftElbow] = rng.uniform(-0.3, 1.6);
    p.angles[kRightHip] = rng.uniform(-0.05, 0.45);
    p.angles[kLeftHip] = rng.uniform(-0.05, 0.45);
    p.angles[kRightKnee] = rng.uniform(-0.35, 0.2);
    p.angles[kLeftKnee] = rng.uniform(-0.35, 0.2);
    p.offset_x = rng.uniform(-8.0, 8.0);
    p.offset_y = rng.uniform(-5.0, 5.0);
    p.scale = rng.uniform(0.92, 1.04);
    if (skeleton_on_canvas(forward_kinematics(person, p), person, p.scale)) return p;
  }
  throw std::runtime_error("pose sampler failed to place the figure on the canvas");
}

int PoseSpec::raised_arms(const PersonSpec& person) const {
  const Skeleton s = forward_kinematics(person, *this);
  int n = 0;
  if (s.joints[kRightWrist].y < s.joints[kRightShoulder].y) ++n;
  if (s.joints[kLeftWrist].y < s.joints[kLeftShoulder].y) ++n;
  return n;
}

double pose_distance(const PoseSpec& a, const PoseSpec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.angles.size(); ++i) {
    const double d = a.angles[i] - b.angles[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------- rendering

RenderedPerson render_person(const PersonSpec& person, const ClothesSpec& clothes, const PoseSpec& pose,
                             Resolution resolution) {
  const Skeleton s = forward_kinematics(person, pose);
  const double sx = resolution.width / kCanonicalWidth;
  const double sy = resolution.height / kCanonicalHeight;

  RenderedPerson out;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double x = s.joints[k].x * sx;
    const double y = s.joints[k].y * sy;
    if (!(x >= 0.0 && y >= 0.0 && x <= resolution.width - 1 && y <= resolution.height - 1)) {
      throw std::invalid_argument("pose places a keypoint outside the canvas");
    }
    out.keypoints.points[k] = {x, y, true};
  }

  const double g = pose.scale;
  const auto& j = s.joints;
  const Point2d collar = j[kNeck];
  const auto garment = [&](Point2d q) { return clothes.color_at(q.x - collar.x, q.y - collar.y); };
  const auto solid = [](Rgb c) { return [c](Point2d) { return c; }; };

  Canvas canvas(resolution);
  const double arm_r = person.arm_radius * g;
  const double leg_r = person.leg_radius * g;

  // legs (skin below the shorts)
  canvas.paint([&](Point2d q) { return in_capsule(q, j[kRightKnee], j[kRightAnkle], leg_r * 0.85); }, kRightLeg,
               solid(person.skin));
  canvas.paint([&](Point2d q) { return in_capsule(q, j[kLeftKnee], j[kLeftAnkle], leg_r * 0.85); }, kLeftLeg,
               solid(person.skin));

  // shorts: thighs and pelvis block
  const Point2d r_mid = j[kRightHip] + 0.8 * (j[kRightKnee] - j[kRightHip]);
  const Point2d l_mid = j[kLeftHip] + 0.8 * (j[kLeftKnee] - j[kLeftHip]);
  const std::vector<Point2d> pelvis_block = {
      j[kRightHip] + Point2d{-leg_r, -12.0 * g}, j[kLeftHip] + Point2d{leg_r, -12.0 * g},
      j[kLeftHip] + Point2d{leg_r, 6.0 * g}, j[kRightHip] + Point2d{-leg_r, 6.0 * g}};
  canvas.paint(
      [&](Point2d q) {
        return in_convex(q, pelvis_block) || in_capsule(q, j[kRightHip], r_mid, leg_r) ||
               in_capsule(q, j[kLeftHip], l_mid, leg_r);
      },
      kLowerClothes, solid(person.lower_clothes));

  // neck
  canvas.paint([&](Point2d q) { return in_capsule(q, j[kNeck], j[kNeck] + Point2d{0.0, -12.0 * g}, 6.0 * g); },
               kTorsoSkin, solid(person.skin));

  // torso garment
  const Point2d rs = j[kRightShoulder];
  const Point2d ls = j[kLeftShoulder];
  const std::vector<Point2d> torso = {rs + Point2d{-5.0 * g, -4.0 * g}, ls + Point2d{5.0 * g, -4.0 * g},
                                      j[kLeftHip] + Point2d{7.0 * g, -2.0 * g},
                                      j[kRightHip] + Point2d{-7.0 * g, -2.0 * g}};
  canvas.paint([&](Point2d q) { return in_convex(q, torso) && !in_disc(q, j[kNeck] + Point2d{0.0, -3.0 * g}, 6.0 * g); },
               kUpperClothes, garment, true);

  // arms
  canvas.paint(
      [&](Point2d q) {
        return in_capsule(q, rs, j[kRightElbow], arm_r) || in_capsule(q, j[kRightElbow], j[kRightWrist], arm_r * 0.9);
      },
      kRightArm, solid(person.skin));
  canvas.paint(
      [&](Point2d q) {
        return in_capsule(q, ls, j[kLeftElbow], arm_r) || in_capsule(q, j[kLeftElbow], j[kLeftWrist], arm_r * 0.9);
      },
      kLeftArm, solid(person.skin));

  // sleeves
  if (clothes.sleeve != Sleeve::kNone) {
    const auto sleeve_end = [&](Point2d shoulder, Point2d elbow, Point2d wrist) {
      if (clothes.sleeve == Sleeve::kShort) return shoulder + 0.5 * (elbow - shoulder);
      return elbow + 0.75 * (wrist - elbow);
    };
    const Point2d r_end = sleeve_end(rs, j[kRightElbow], j[kRightWrist]);
    const Point2d l_end = sleeve_end(ls, j[kLeftElbow], j[kLeftWrist]);
    const bool long_sleeve = clothes.sleeve == Sleeve::kLong;
    const double sr = arm_r + 1.5 * g;
    canvas.paint(
        [&](Point2d q) {
          if (long_sleeve) {
            return in_capsule(q, rs, j[kRightElbow], sr) || in_capsule(q, j[kRightElbow], r_end, sr) ||
                   in_capsule(q, ls, j[kLeftElbow], sr) || in_capsule(q, j[kLeftElbow], l_end, sr);
          }
          return in_capsule(q, rs, r_end, sr) || in_capsule(q, ls, l_end, sr);
        },
        kUpperClothes, garment, true);
  }

  // head
  const Point2d hc = s.head_center;
  const double hr = person.head_radius * g;
  canvas.paint([&](Point2d q) { return in_disc(q, hc, hr); }, kFace, solid(person.skin));

  // hair: cap above the brow line, optional long side strands
  const double ha = s.head_angle;
  const auto head_local = [&](Point2d q) { return rotate(q - hc, -ha); };
  canvas.paint(
      [&](Point2d q) {
        const Point2d p = head_local(q);
        const bool cap = in_disc(p, {0.0, 0.0}, hr + 2.0 * g) && p.y < -0.35 * hr;
        if (person.hair_style == 0) return cap;
        const bool strands = in_capsule(p, {-hr, -0.2 * hr}, {-hr, 1.1 * hr}, 3.5 * g) ||
                             in_capsule(p, {hr, -0.2 * hr}, {hr, 1.1 * hr}, 3.5 * g);
        return cap || strands;
      },
      kHair, solid(person.hair), false, true);

  out.image = std::move(canvas.image());
  out.parsing = std::move(canvas.parsing());
  out.clothes_coverage = std::move(canvas.clothes());
  out.hair_coverage = std::move(canvas.hair());
  return out;
}

ClothesProduct render_clothes_product(const ClothesSpec& clothes, Resolution resolution) {
  Canvas canvas(resolution);
  const Point2d collar{96.0, 86.0};
  const std::vector<Point2d> body = {{66.0, 88.0}, {126.0, 88.0}, {122.0, 170.0}, {70.0, 170.0}};
  const auto garment = [&](Point2d q) { return clothes.color_at(q.x - collar.x, q.y - collar.y); };
  const Point2d r_shoulder{70.0, 94.0};
  const Point2d l_shoulder{122.0, 94.0};
  const double sleeve_len = clothes.sleeve == Sleeve::kLong ? 64.0 : 20.0;
  const Point2d r_end = r_shoulder + sleeve_len * limb_direction(0.7, -1.0);
  const Point2d l_end = l_shoulder + sleeve_len * limb_direction(0.7, 1.0);
  const bool sleeves = clothes.sleeve != Sleeve::kNone;
  canvas.paint(
      [&](Point2d q) {
        const bool torso = in_convex(q, body) && !in_disc(q, collar, 9.0);
        return torso || (sleeves && (in_capsule(q, r_shoulder, r_end, 8.0) || in_capsule(q, l_shoulder, l_end, 8.0)));
      },
      kUpperClothes, garment, true);
  return {std::move(canvas.image()), std::move(canvas.clothes())};
}

// ---------------------------------------------------------------- triplets

TripletSpec TripletSpec::sample(std::uint64_t seed) {
  TripletSpec t;
  t.seed = seed;
  t.person = PersonSpec::sample(mix_seed(seed, 1));
  t.clothes = ClothesSpec::sample(mix_seed(seed, 2));
  Rng rng(mix_seed(seed, 3));
  t.source_pose = PoseSpec::sample(rng, t.person);
  for (int attempt = 0;; ++attempt) {
    t.target_pose = PoseSpec::sample(rng, t.person);
    if (pose_distance(t.source_pose, t.target_pose) >= kMinPoseDistance) break;
    if (attempt > 10000) throw std::runtime_error("could not sample a sufficiently different target pose");
  }
  return t;
}

Triplet render_triplet(const TripletSpec& spec, Resolution resolution, const std::string& id) {
  Triplet t;
  t.id = id;
  auto src = render_person(spec.person, spec.clothes, spec.source_pose, resolution);
  auto tgt = render_person(spec.person, spec.clothes, spec.target_pose, resolution);
  auto product = render_clothes_product(spec.clothes, resolution);
  t.source = {std::move(src.image), std::move(src.parsing), src.keypoints};
  t.target = {std::move(tgt.image), std::move(tgt.parsing), tgt.keypoints};
  t.clothes = std::move(product.image);
  t.clothes_mask = std::move(product.mask);
  return t;
}

// ---------------------------------------------------------------- dataset tree

std::string split_for_index(int index) { return index % 6 == 5 ? "test" : "train"; }

std::uint64_t triplet_seed(std::uint64_t dataset_seed, int index) {
  return mix_seed(dataset_seed, 1000 + static_cast<std::uint64_t>(index));
}

namespace {

std::string triplet_id(int index) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

DatasetManifest make_dataset(int count, std::uint64_t seed, Resolution resolution, const std::filesystem::path& root) {
  if (count < 1) throw std::invalid_argument("dataset needs at least one triplet");
  namespace fs = std::filesystem;
  DatasetManifest manifest{resolution, {}};
  for (int i = 0; i < count; ++i) {
    const std::string id = triplet_id(i);
    const std::uint64_t tseed = triplet_seed(seed, i);
    const std::string split = split_for_index(i);
    const Triplet t = render_triplet(TripletSpec::sample(tseed), resolution, id);
    const fs::path dir = root / split / id;
    fs::create_directories(dir);
    write_image_png(dir / "source.png", t.source.image);
    write_image_png(dir / "target.png", t.target.image);
    write_image_png(dir / "clothes.png", t.clothes);
    write_mask_png(dir / "clothes_mask.png", t.clothes_mask);
    write_parsing_png(dir / "source_parsing.png", t.source.parsing);
    write_parsing_png(dir / "target_parsing.png", t.target.parsing);
    write_keypoints(dir / "source_pose.txt", t.source.keypoints);
    write_keypoints(dir / "target_pose.txt", t.target.keypoints);
    manifest.entries.push_back({id, split, tseed});
  }

  std::ofstream out(root / "manifest.tsv");
  if (!out) throw std::runtime_error("cannot write manifest in " + root.string());
  const int test = count / 6;
  out << "# resolution " << resolution.to_string() << "\n";
  out << "# split train:test = 5:1, test = floor(count / 6) = " << test << ", train = " << count - test << "\n";
  out << "triplet_id\tsplit\tseed\n";
  for (const auto& e : manifest.entries) out << e.id << '\t' << e.split << '\t' << e.seed << '\n';
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.tsv");
  if (!in) throw std::runtime_error("no manifest.tsv in " + root.string());
  DatasetManifest manifest;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# resolution ", 0) == 0) {
      manifest.resolution = Resolution::parse(line.substr(13));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream row(line);
    ManifestEntry e;
    if (!(row >> e.id >> e.split >> e.seed)) throw std::runtime_error("malformed manifest row '" + line + "'");
    manifest.entries.push_back(e);
  }
  return manifest;
}

Triplet load_triplet(const std::filesystem::path& dir, const std::string& id) {
  Triplet t;
  t.id = id;
  t.source = {read_image_png(dir / "source.png"), read_parsing_png(dir / "source_parsing.png"),
              read_keypoints(dir / "source_pose.txt")};
  t.target = {read_image_png(dir / "target.png"), read_parsing_png(dir / "target_parsing.png"),
              read_keypoints(dir / "target_pose.txt")};
  t.clothes = read_image_png(dir / "clothes.png");
  t.clothes_mask = read_mask_png(dir / "clothes_mask.png");
  return t;
}

std::vector<Triplet> load_split(const std::filesystem::path& root, const std::string& split) {
  const auto manifest = read_manifest(root);
  std::vector<Triplet> out;
  for (const auto& e : manifest.entries) {
    if (e.split == split) out.push_back(load_triplet(root / split / e.id, e.id));
  }
  return out;
}

}  // namespace mgvton
