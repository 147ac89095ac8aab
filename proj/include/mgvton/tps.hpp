#pragma once

// Thin-plate-spline transforms in normalised image coordinates.
//
// Coordinates span [-1, 1] along each axis, with -1 and +1 on the centres of
// the first and last pixel. A transform maps an output location p to the
// location T(p) that is sampled from the input (backward warping):
//
//   T_x(p) = a0 + a1 x + a2 y + sum_i wx_i U(|p - c_i|)
//   T_y(p) = a3 + a4 x + a5 y + sum_i wy_i U(|p - c_i|),   U(r) = r^2 log r^2.

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

#include "mgvton/data_model.hpp"

namespace mgvton {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultGridSize = 5;

double tps_kernel(double r2);

// K x K control points over [-1, 1]^2, row-major (y outer, x inner).
std::vector<Point2> control_grid(int grid_size);

struct TpsParams {
  int grid_size = 0;  // K when the control points are the regular grid, 0 otherwise
  std::vector<Point2> control_points;
  std::array<double, 6> affine{0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  std::vector<double> weights_x;
  std::vector<double> weights_y;
  double regularization = 0.0;

  static TpsParams identity(int grid_size = kDefaultGridSize);
  // Pure translation by (dx, dy) pixels at the given resolution: output(p) = input(p + d).
  static TpsParams translation_pixels(double dx, double dy, Resolution resolution, int grid_size = kDefaultGridSize);

  Point2 map(Point2 p) const;

  // Flat layout [a0..a5, wx_0..wx_{K^2-1}, wy_0..wy_{K^2-1}], grid parameters only.
  std::vector<double> flat() const;
  static TpsParams from_flat(int grid_size, std::span<const double> values);
  torch::Tensor to_tensor(torch::ScalarType dtype = torch::kFloat32) const;  // [6 + 2K^2]
  static TpsParams from_tensor(int grid_size, const torch::Tensor& values);

  // Max absolute residual of the side conditions sum w = sum w x = sum w y = 0.
  double side_condition_residual() const;
};

inline int tps_param_count(int grid_size) { return 6 + 2 * grid_size * grid_size; }

// Solves for the spline taking each source point to its target. With
// regularization 0 the mapping interpolates exactly; lambda > 0 adds lambda to
// the kernel diagonal. Throws SolverError for collinear or duplicated sources.
TpsParams solve_tps(std::span<const Point2> source_points, std::span<const Point2> target_points,
                    double regularization = 0.0);

// 16-byte header (magic "TPS1", version, K, value count) + little-endian float32 values.
void write_tps_params(const std::filesystem::path& path, const TpsParams& params);
TpsParams read_tps_params(const std::filesystem::path& path);

// Dense sampling-grid generator for grid-based parameters.
class TpsGridGenerator {
 public:
  TpsGridGenerator(int grid_size, int height, int width);

  int grid_size() const { return grid_size_; }
  int height() const { return height_; }
  int width() const { return width_; }

  // params [N, 6 + 2K^2] -> pixel-space sample coordinates [N, H, W, 2] (x, y).
  torch::Tensor sample_coordinates(const torch::Tensor& params) const;

 private:
  int grid_size_;
  int height_;
  int width_;
  torch::Tensor basis_;  // [H*W, 3 + K^2]: 1, x, y, U(|p - c_i|)
  torch::Tensor base_x_;  // [H*W] pixel x
  torch::Tensor base_y_;
};

// Bilinear sampling at pixel coordinates [N, Ho, Wo, 2]; samples outside the
// input read as 0. Coordinates within a dtype-dependent tolerance of an integer
// are snapped onto it (value only; gradients pass through unchanged).
torch::Tensor bilinear_sample(const torch::Tensor& input, const torch::Tensor& coords);

// input [N, C, H, W], params [N, 6 + 2K^2] -> warped [N, C, H, W].
torch::Tensor warp_tensor(const torch::Tensor& input, const torch::Tensor& params, int grid_size);

Image warp_image(const Image& input, const TpsParams& params);
Mask warp_mask(const Mask& input, const TpsParams& params);

}  // namespace mgvton
