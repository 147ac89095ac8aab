#include "mgvton/tps.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mgvton {

namespace {

double normalized_coordinate(int index, int extent) {
  return extent > 1 ? -1.0 + 2.0 * index / (extent - 1) : 0.0;
}

double pixel_scale(int extent) { return extent > 1 ? 0.5 * (extent - 1) : 0.0; }

bool matches_grid(std::span<const Point2> points, int& grid_size) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(points.size()))));
  if (k < 2 || k * k != static_cast<int>(points.size())) return false;
  const auto grid = control_grid(k);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] == points[i])) return false;
  }
  grid_size = k;
  return true;
}

template <typename T>
void put_le(std::ofstream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("truncated TPS parameter file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kTpsMagic[4] = {'T', 'P', 'S', '1'};
constexpr std::uint32_t kTpsVersion = 1;

}  // namespace

double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

std::vector<Point2> control_grid(int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("control grid needs at least 2 points per axis");
  std::vector<Point2> points;
  points.reserve(static_cast<std::size_t>(grid_size) * grid_size);
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      points.push_back({normalized_coordinate(j, grid_size), normalized_coordinate(i, grid_size)});
    }
  }
  return points;
}

TpsParams TpsParams::identity(int grid_size) {
  TpsParams p;
  p.grid_size = grid_size;
  p.control_points = control_grid(grid_size);
  p.weights_x.assign(p.control_points.size(), 0.0);
  p.weights_y.assign(p.control_points.size(), 0.0);
  return p;
}

TpsParams TpsParams::translation_pixels(double dx, double dy, Resolution resolution, int grid_size) {
  TpsParams p = identity(grid_size);
  const double sx = pixel_scale(resolution.width);
  const double sy = pixel_scale(resolution.height);
  p.affine[0] = sx > 0.0 ? dx / sx : 0.0;
  p.affine[3] = sy > 0.0 ? dy / sy : 0.0;
  return p;
}

Point2 TpsParams::map(Point2 p) const {
  double dx = affine[0] + (affine[1] - 1.0) * p.x + affine[2] * p.y;
  double dy = affine[3] + affine[4] * p.x + (affine[5] - 1.0) * p.y;
  for (std::size_t i = 0; i < control_points.size(); ++i) {
    const double ex = p.x - control_points[i].x;
    const double ey = p.y - control_points[i].y;
    const double u = tps_kernel(ex * ex + ey * ey);
    dx += weights_x[i] * u;
    dy += weights_y[i] * u;
  }
  return {p.x + dx, p.y + dy};
}

std::vector<double> TpsParams::flat() const {
  if (grid_size < 2) throw std::invalid_argument("only grid-based TPS parameters have a flat layout");
  std::vector<double> v(affine.begin(), affine.end());
  v.insert(v.end(), weights_x.begin(), weights_x.end());
  v.insert(v.end(), weights_y.begin(), weights_y.end());
  return v;
}

TpsParams TpsParams::from_flat(int grid_size, std::span<const double> values) {
  if (static_cast<int>(values.size()) != tps_param_count(grid_size)) {
    throw std::invalid_argument("TPS parameter count does not match the grid size");
  }
  TpsParams p = identity(grid_size);
  const std::size_t n = p.control_points.size();
  std::copy_n(values.begin(), 6, p.affine.begin());
  std::copy_n(values.begin() + 6, n, p.weights_x.begin());
  std::copy_n(values.begin() + 6 + n, n, p.weights_y.begin());
  return p;
}

torch::Tensor TpsParams::to_tensor(torch::ScalarType dtype) const {
  const auto v = flat();
  return torch::tensor(v, torch::kFloat64).to(dtype);
}

TpsParams TpsParams::from_tensor(int grid_size, const torch::Tensor& values) {
  auto t = values.detach().to(torch::kCPU, torch::kFloat64).contiguous().view({-1});
  return from_flat(grid_size, {t.data_ptr<double>(), static_cast<std::size_t>(t.numel())});
}

double TpsParams::side_condition_residual() const {
  double r = 0.0;
  for (const auto* w : {&weights_x, &weights_y}) {
    double s0 = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < w->size(); ++i) {
      s0 += (*w)[i];
      sx += (*w)[i] * control_points[i].x;
      sy += (*w)[i] * control_points[i].y;
    }
    r = std::max({r, std::abs(s0), std::abs(sx), std::abs(sy)});
  }
  return r;
}

TpsParams solve_tps(std::span<const Point2> source, std::span<const Point2> target, double regularization) {
  if (source.size() != target.size()) throw std::invalid_argument("source and target point lists differ in length");
  if (source.size() < 3) throw SolverError("TPS needs at least three control points");
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) {
    throw std::invalid_argument("TPS regularization must be a finite non-negative number");
  }
  const int n = static_cast<int>(source.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = source[i].x - source[j].x;
      const double dy = source[i].y - source[j].y;
      system(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    system(i, i) += regularization;
    system(i, n) = 1.0;
    system(i, n + 1) = source[i].x;
    system(i, n + 2) = source[i].y;
    system(n, i) = 1.0;
    system(n + 1, i) = source[i].x;
    system(n + 2, i) = source[i].y;
    // solve for the displacement so identity correspondences give exact zeros
    rhs(i, 0) = target[i].x - source[i].x;
    rhs(i, 1) = target[i].y - source[i].y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) throw SolverError("singular TPS system (collinear or duplicate control points)");
  const Eigen::MatrixXd solution = lu.solve(rhs);

  TpsParams p;
  p.control_points.assign(source.begin(), source.end());
  int k = 0;
  p.grid_size = matches_grid(source, k) ? k : 0;
  p.regularization = regularization;
  p.weights_x.resize(n);
  p.weights_y.resize(n);
  for (int i = 0; i < n; ++i) {
    p.weights_x[i] = solution(i, 0);
    p.weights_y[i] = solution(i, 1);
  }
  p.affine = {solution(n, 0), solution(n + 1, 0) + 1.0, solution(n + 2, 0),
              solution(n, 1), solution(n + 1, 1),       solution(n + 2, 1) + 1.0};
  return p;
}

void write_tps_params(const std::filesystem::path& path, const TpsParams& params) {
  const auto values = params.flat();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kTpsMagic, 4);
  put_le<std::uint32_t>(out, kTpsVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.grid_size));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) put_le<float>(out, static_cast<float>(v));
}

TpsParams read_tps_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTpsMagic, 4) != 0) {
    throw std::runtime_error(path.string() + ": not a TPS parameter file");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kTpsVersion) throw std::runtime_error(path.string() + ": unsupported TPS file version");
  const int k = static_cast<int>(get_le<std::uint32_t>(in));
  const auto count = get_le<std::uint32_t>(in);
  if (k < 2 || static_cast<int>(count) != tps_param_count(k)) {
    throw std::runtime_error(path.string() + ": inconsistent TPS header");
  }
  std::vector<double> values(count);
  for (auto& v : values) v = get_le<float>(in);
  return TpsParams::from_flat(k, values);
}

// ---------------------------------------------------------------- dense warping

TpsGridGenerator::TpsGridGenerator(int grid_size, int height, int width)
    : grid_size_(grid_size), height_(height), width_(width) {
  const auto ctrl = control_grid(grid_size);
  const int n = static_cast<int>(ctrl.size());
  basis_ = torch::empty({height * width, 3 + n}, torch::kFloat64);
  base_x_ = torch::empty({height * width}, torch::kFloat64);
  base_y_ = torch::empty({height * width}, torch::kFloat64);
  auto b = basis_.accessor<double, 2>();
  auto bx = base_x_.accessor<double, 1>();
  auto by = base_y_.accessor<double, 1>();
  for (int y = 0; y < height; ++y) {
    const double ny = normalized_coordinate(y, height);
    for (int x = 0; x < width; ++x) {
      const double nx = normalized_coordinate(x, width);
      const int row = y * width + x;
      b[row][0] = 1.0;
      b[row][1] = nx;
      b[row][2] = ny;
      for (int i = 0; i < n; ++i) {
        const double ex = nx - ctrl[i].x;
        const double ey = ny - ctrl[i].y;
        b[row][3 + i] = tps_kernel(ex * ex + ey * ey);
      }
      bx[row] = x;
      by[row] = y;
    }
  }
}

torch::Tensor TpsGridGenerator::sample_coordinates(const torch::Tensor& params) const {
  const int n = grid_size_ * grid_size_;
  if (params.dim() != 2 || params.size(1) != tps_param_count(grid_size_)) {
    throw std::invalid_argument("TPS parameter tensor must be [N, 6 + 2K^2]");
  }
  const auto opts = params.options();
  const auto basis = basis_.to(opts);
  // displacement coefficients: a0, a1 - 1, a2 (x) and a3, a4, a5 - 1 (y)
  const auto cx = torch::cat({params.slice(1, 0, 1), params.slice(1, 1, 2) - 1.0, params.slice(1, 2, 3),
                              params.slice(1, 6, 6 + n)}, 1);
  const auto cy = torch::cat({params.slice(1, 3, 4), params.slice(1, 4, 5), params.slice(1, 5, 6) - 1.0,
                              params.slice(1, 6 + n, 6 + 2 * n)}, 1);
  const auto dx = torch::matmul(cx, basis.t());  // [N, H*W]
  const auto dy = torch::matmul(cy, basis.t());
  const auto px = base_x_.to(opts).unsqueeze(0) + dx * pixel_scale(width_);
  const auto py = base_y_.to(opts).unsqueeze(0) + dy * pixel_scale(height_);
  return torch::stack({px, py}, -1).view({params.size(0), height_, width_, 2});
}

torch::Tensor bilinear_sample(const torch::Tensor& input, const torch::Tensor& coords) {
  if (input.dim() != 4 || coords.dim() != 4 || coords.size(3) != 2 || coords.size(0) != input.size(0)) {
    throw std::invalid_argument("bilinear_sample expects input [N,C,H,W] and coords [N,Ho,Wo,2]");
  }
  const auto n = input.size(0);
  const auto c = input.size(1);
  const auto h = input.size(2);
  const auto w = input.size(3);
  const auto ho = coords.size(1);
  const auto wo = coords.size(2);
  const double tol = coords.scalar_type() == torch::kFloat64 ? 1e-9 : 1e-4;

  auto snap = [tol](const torch::Tensor& v) {
    const auto r = v.detach().round();
    const auto delta = (r - v.detach()) * ((r - v.detach()).abs() < tol).to(v.scalar_type());
    return v + delta;
  };
  const auto x = snap(coords.select(3, 0)).reshape({n, ho * wo});
  const auto y = snap(coords.select(3, 1)).reshape({n, ho * wo});
  const auto x0 = x.detach().floor();
  const auto y0 = y.detach().floor();
  const auto fx = x - x0;
  const auto fy = y - y0;
  const auto flat = input.reshape({n, c, h * w});

  auto corner = [&](const torch::Tensor& cx, const torch::Tensor& cy) {
    const auto valid = ((cx >= 0) & (cx <= w - 1) & (cy >= 0) & (cy <= h - 1)).to(input.scalar_type());
    const auto idx = (cy.clamp(0, h - 1) * w + cx.clamp(0, w - 1)).to(torch::kInt64);
    const auto gathered = flat.gather(2, idx.unsqueeze(1).expand({n, c, ho * wo}));
    return gathered * valid.unsqueeze(1);
  };
  const auto v00 = corner(x0, y0);
  const auto v01 = corner(x0 + 1, y0);
  const auto v10 = corner(x0, y0 + 1);
  const auto v11 = corner(x0 + 1, y0 + 1);
  const auto wx1 = fx.unsqueeze(1);
  const auto wy1 = fy.unsqueeze(1);
  const auto wx0 = 1.0 - wx1;
  const auto wy0 = 1.0 - wy1;
  const auto out = wx0 * wy0 * v00 + wx1 * wy0 * v01 + wx0 * wy1 * v10 + wx1 * wy1 * v11;
  return out.view({n, c, ho, wo});
}

torch::Tensor warp_tensor(const torch::Tensor& input, const torch::Tensor& params, int grid_size) {
  const TpsGridGenerator grid(grid_size, static_cast<int>(input.size(2)), static_cast<int>(input.size(3)));
  return bilinear_sample(input, grid.sample_coordinates(params.to(input.scalar_type())));
}

namespace {

torch::Tensor dense_coordinates(const TpsParams& params, int height, int width) {
  auto coords = torch::empty({1, height, width, 2}, torch::kFloat64);
  auto a = coords.accessor<double, 4>();
  const double sx = pixel_scale(width);
  const double sy = pixel_scale(height);
  for (int y = 0; y < height; ++y) {
    const double ny = normalized_coordinate(y, height);
    for (int x = 0; x < width; ++x) {
      const double nx = normalized_coordinate(x, width);
      const Point2 m = params.map({nx, ny});
      a[0][y][x][0] = x + (m.x - nx) * sx;
      a[0][y][x][1] = y + (m.y - ny) * sy;
    }
  }
  return coords;
}

}  // namespace

Image warp_image(const Image& input, const TpsParams& params) {
  const auto in = input.to_tensor().unsqueeze(0).to(torch::kFloat64);
  const auto out = bilinear_sample(in, dense_coordinates(params, input.height(), input.width()));
  return Image::from_tensor(out[0].to(torch::kFloat32));
}

Mask warp_mask(const Mask& input, const TpsParams& params) {
  const auto in = input.to_tensor().unsqueeze(0).to(torch::kFloat64);
  const auto out = bilinear_sample(in, dense_coordinates(params, input.height(), input.width()));
  return Mask::from_tensor(out[0].to(torch::kFloat32));
}

}  // namespace mgvton
