#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "csg/graph.hpp"

namespace csg {

struct NetworkConfig {
  int input_dim = 4;
  std::vector<int> hidden = {32, 64};
  int num_classes = 32;
  int kernels = 4;
  int embed_dim = 3;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;

  /// Output width of each convolution layer; the last equals num_classes.
  std::vector<int> layer_widths() const;
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Parameters of one Gaussian-kernel graph convolution. Also used as a gradient container.
struct LayerParams {
  /// (kernels * in) x out; row k*in + q, column p holds w_pqk.
  MatrixXd weights;
  VectorXd bias;       // out
  MatrixXd mu;         // kernels x embed_dim
  VectorXd log_sigma;  // kernels

  int in_dim() const { return static_cast<int>(weights.rows() / mu.rows()); }
  int out_dim() const { return static_cast<int>(weights.cols()); }
  int kernels() const { return static_cast<int>(mu.rows()); }
  int embed_dim() const { return static_cast<int>(mu.cols()); }
  double& w(int p, int q, int k) { return weights(k * in_dim() + q, p); }
  double w(int p, int q, int k) const { return weights(k * in_dim() + q, p); }

  static LayerParams zeros(int in, int out, int kernels, int embed_dim);
};

struct NetworkParams {
  NetworkConfig config;
  std::vector<LayerParams> layers;
};

/// Gradients of every parameter group, laid out like NetworkParams::layers.
struct NetworkGradients {
  std::vector<LayerParams> layers;

  static NetworkGradients zeros_like(const NetworkParams& params);
  NetworkGradients& operator+=(const NetworkGradients& other);
  NetworkGradients& operator*=(double factor);
  double max_abs_kernel() const;
};

/// w ~ U(+-sqrt(6 / (fan_in + fan_out))) with fan_in = kernels * in, b = 0,
/// mu ~ N(0, 0.01 I), log sigma = 0.
NetworkParams init_network(const NetworkConfig& config);

/// Per-subject network input: features, kernel coordinates and convolution stencil.
struct ConvInput {
  RowMatrixXd features;  // N x input_dim
  RowMatrixXd coords;    // N x embed_dim
  ConvStencil stencil;

  int num_nodes() const { return static_cast<int>(features.rows()); }
};

/// exp(-sigma * ||(u_j - u_i) - mu||^2).
template <typename A, typename B, typename C>
double gaussian_kernel(const Eigen::MatrixBase<A>& u_i, const Eigen::MatrixBase<B>& u_j,
                       const Eigen::MatrixBase<C>& mu, double sigma) {
  return std::exp(-sigma * ((u_j - u_i) - mu).squaredNorm());
}

inline double leaky_relu(double z, double slope = 0.01) { return z >= 0.0 ? z : slope * z; }
/// Derivative; 1 at exactly zero.
inline double leaky_relu_derivative(double z, double slope = 0.01) { return z >= 0.0 ? 1.0 : slope; }

struct LayerCache {
  RowMatrixXd input;       // Y, N x in
  RowMatrixXd aggregated;  // N x (kernels * in): sum_j phi_ijk y_j per kernel block
  RowMatrixXd phi;         // stencil slots x kernels
  RowMatrixXd pre;         // Z, N x out
};

/// Pre-activations z_ip = sum_{j in N(i)} sum_q sum_k w_pqk y_jq phi(u_i, u_j; mu_k, sigma_k) + b_p.
RowMatrixXd layer_forward(const RowMatrixXd& input, const LayerParams& params, const RowMatrixXd& coords,
                          const ConvStencil& stencil, LayerCache* cache = nullptr);

struct ForwardCache {
  std::vector<LayerCache> layers;
  RowMatrixXd logits;         // activated output of the last layer
  RowMatrixXd probabilities;  // row-wise softmax of logits
};

ForwardCache forward(const NetworkParams& params, const ConvInput& input);

/// Row-wise softmax with max subtraction.
RowMatrixXd softmax_rows(const RowMatrixXd& logits);

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// -sum over labelled nodes of log p[i, label_i]; throws UsageError when nothing is labelled.
double cross_entropy(const RowMatrixXd& probabilities, const VectorXi& labels);

/// Gradient of cross_entropy with respect to the logits fed to softmax_rows.
RowMatrixXd cross_entropy_gradient(const RowMatrixXd& probabilities, const VectorXi& labels);

/// Exact backward pass from dE/d(logits). With frozen kernels the mu and log-sigma gradients are
/// exactly zero.
NetworkGradients backward(const NetworkParams& params, const ConvInput& input, const ForwardCache& cache,
                          const RowMatrixXd& logits_gradient, bool freeze_kernels);

/// 1-D grid convolution with zero padding: z_ip = sum_q sum_{k=-K..K} w_pqk y_{i+k,q} + b_p.
/// `taps[k + K]` is the in x out matrix for offset k.
RowMatrixXd grid_conv_1d(const RowMatrixXd& signal, const std::vector<MatrixXd>& taps, const VectorXd& bias,
                         int half_width);

}  // namespace csg
