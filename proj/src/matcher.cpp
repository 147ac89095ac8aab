#include "mgvton/matcher.hpp"

#include <Eigen/Dense>

#include "mgvton/networks.hpp"

namespace mgvton {

namespace nn = torch::nn;

namespace {

int ceil_halvings(int extent, int times) {
  for (int i = 0; i < times; ++i) extent = (extent + 1) / 2;
  return extent;
}

// Maps stacked control-point offsets [dx_0..dx_{n-1}, dy_0..dy_{n-1}] to the
// change in flat TPS parameters.
torch::Tensor offset_solve_matrix(int grid_size) {
  const auto ctrl = control_grid(grid_size);
  const int n = static_cast<int>(ctrl.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = ctrl[i].x - ctrl[j].x;
      const double dy = ctrl[i].y - ctrl[j].y;
      system(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    system(i, n) = system(n, i) = 1.0;
    system(i, n + 1) = system(n + 1, i) = ctrl[i].x;
    system(i, n + 2) = system(n + 2, i) = ctrl[i].y;
  }
  const Eigen::MatrixXd inv = system.fullPivLu().inverse();

  auto m = torch::zeros({2 * n, tps_param_count(grid_size)}, torch::kFloat64);
  auto a = m.accessor<double, 2>();
  for (int i = 0; i < n; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      const int row = axis * n + i;
      for (int k = 0; k < 3; ++k) a[row][axis * 3 + k] = inv(n + k, i);
      for (int j = 0; j < n; ++j) a[row][6 + axis * n + j] = inv(j, i);
    }
  }
  return m;
}

}  // namespace

torch::Tensor correlate(const torch::Tensor& features_a, const torch::Tensor& features_b) {
  if (features_a.sizes() != features_b.sizes() || features_a.dim() != 4) {
    throw std::invalid_argument("correlate expects two feature grids of identical shape [N,C,h,w]");
  }
  const auto n = features_a.size(0);
  const auto c = features_a.size(1);
  const auto h = features_a.size(2);
  const auto w = features_a.size(3);
  const auto na = features_a / features_a.norm(2, 1, true).clamp_min(1e-8);
  const auto nb = features_b / features_b.norm(2, 1, true).clamp_min(1e-8);
  // [N, hw_b, C] x [N, C, hw_a] -> [N, hw_b, hw_a]
  const auto corr = torch::bmm(nb.view({n, c, h * w}).transpose(1, 2), na.view({n, c, h * w}));
  return corr.view({n, h * w, h, w});
}

FeatureTowerImpl::FeatureTowerImpl(int in_channels, const std::array<int, 4>& filters) {
  body_ = nn::Sequential();
  int channels = in_channels;
  for (int f : filters) {
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, f, 3).stride(2).padding(1)));
    body_->push_back(nn::BatchNorm2d(f));
    body_->push_back(nn::ReLU());
    channels = f;
  }
  register_module("body", body_);
}

torch::Tensor FeatureTowerImpl::forward(const torch::Tensor& x) { return body_->forward(x); }

MatcherImpl::MatcherImpl(const MatcherOptions& options) : options_(options) {
  feature_h_ = ceil_halvings(options.resolution.height, 4);
  feature_w_ = ceil_halvings(options.resolution.width, 4);
  const int cells = feature_h_ * feature_w_;
  const int k2 = options.grid_size * options.grid_size;

  tower_a_ = register_module("tower_a", FeatureTower(options.in_channels_a, options.filters));
  tower_b_ = register_module("tower_b", FeatureTower(options.in_channels_b, options.filters));
  regression_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(cells, 2 * options.regression_filters, 3).padding(1)),
                               nn::BatchNorm2d(2 * options.regression_filters), nn::ReLU(),
                               nn::Conv2d(nn::Conv2dOptions(2 * options.regression_filters,
                                                            options.regression_filters, 3).padding(1)),
                               nn::BatchNorm2d(options.regression_filters), nn::ReLU());
  register_module("regression", regression_);
  offsets_ = register_module("offsets", nn::Linear(options.regression_filters * cells, 2 * k2));
  init_weights(*this);
  {
    torch::NoGradGuard guard;
    offsets_->weight.zero_();
    offsets_->bias.zero_();
  }
  offsets_to_params_ = register_buffer("offsets_to_params", offset_solve_matrix(options.grid_size).to(torch::kFloat32));
  identity_params_ = register_buffer("identity_params",
                                     TpsParams::identity(options.grid_size).to_tensor(torch::kFloat32));
}

torch::Tensor MatcherImpl::forward(const torch::Tensor& a, const torch::Tensor& b) {
  const auto fa = tower_a_->forward(a);
  const auto fb = tower_b_->forward(b);
  const auto corr = correlate(fa, fb);
  const auto h = regression_->forward(corr).flatten(1);
  const auto offsets = offsets_->forward(h);
  return identity_params_.unsqueeze(0) + torch::matmul(offsets, offsets_to_params_);
}

TpsParams predict_tps(Matcher& model, const Mask& clothes_mask, const Mask& body_shape) {
  torch::NoGradGuard guard;
  const bool was_training = model->is_training();
  model->eval();
  const auto dtype = model->parameters().front().scalar_type();
  const auto params = model->forward(clothes_mask.to_tensor().unsqueeze(0).to(dtype),
                                     body_shape.to_tensor().unsqueeze(0).to(dtype));
  model->train(was_training);
  return TpsParams::from_tensor(model->options().grid_size, params[0]);
}

torch::Tensor geometric_matching_loss(const torch::Tensor& params, const torch::Tensor& mask,
                                      const torch::Tensor& target_mask, int grid_size) {
  return (warp_tensor(mask, params, grid_size) - target_mask).abs().mean();
}

double geometric_matching_loss(const TpsParams& params, const Mask& clothes_mask, const Mask& target_clothes_mask) {
  const auto warped = warp_mask(clothes_mask, params);
  double s = 0.0;
  for (std::size_t i = 0; i < warped.data().size(); ++i) {
    s += std::abs(static_cast<double>(warped.data()[i]) - target_clothes_mask.data()[i]);
  }
  return s / static_cast<double>(warped.data().size());
}

}  // namespace mgvton
