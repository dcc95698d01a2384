#include "csg/gconv.hpp"

#include <algorithm>
#include <string>

#include "csg/error.hpp"
#include "csg/rng.hpp"

namespace csg {

std::vector<int> NetworkConfig::layer_widths() const {
  std::vector<int> widths = hidden;
  widths.push_back(num_classes);
  return widths;
}

void NetworkConfig::validate() const {
  if (input_dim < 1 || num_classes < 1 || kernels < 1 || embed_dim < 1) {
    throw UsageError("network sizes must be positive");
  }
  for (int h : hidden) {
    if (h < 1) throw UsageError("hidden layer sizes must be positive");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw UsageError("leaky slope must be in [0, 1)");
}

LayerParams LayerParams::zeros(int in, int out, int kernels, int embed_dim) {
  LayerParams p;
  p.weights = MatrixXd::Zero(static_cast<Eigen::Index>(kernels) * in, out);
  p.bias = VectorXd::Zero(out);
  p.mu = MatrixXd::Zero(kernels, embed_dim);
  p.log_sigma = VectorXd::Zero(kernels);
  return p;
}

NetworkGradients NetworkGradients::zeros_like(const NetworkParams& params) {
  NetworkGradients g;
  for (const auto& layer : params.layers) {
    g.layers.push_back(LayerParams::zeros(layer.in_dim(), layer.out_dim(), layer.kernels(), layer.embed_dim()));
  }
  return g;
}

NetworkGradients& NetworkGradients::operator+=(const NetworkGradients& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += other.layers[l].weights;
    layers[l].bias += other.layers[l].bias;
    layers[l].mu += other.layers[l].mu;
    layers[l].log_sigma += other.layers[l].log_sigma;
  }
  return *this;
}

NetworkGradients& NetworkGradients::operator*=(double factor) {
  for (auto& layer : layers) {
    layer.weights *= factor;
    layer.bias *= factor;
    layer.mu *= factor;
    layer.log_sigma *= factor;
  }
  return *this;
}

double NetworkGradients::max_abs_kernel() const {
  double m = 0.0;
  for (const auto& layer : layers) {
    if (layer.mu.size()) m = std::max(m, layer.mu.cwiseAbs().maxCoeff());
    if (layer.log_sigma.size()) m = std::max(m, layer.log_sigma.cwiseAbs().maxCoeff());
  }
  return m;
}

NetworkParams init_network(const NetworkConfig& config) {
  config.validate();
  NetworkParams params;
  params.config = config;
  Rng rng(config.seed);
  int in = config.input_dim;
  for (int out : config.layer_widths()) {
    LayerParams layer = LayerParams::zeros(in, out, config.kernels, config.embed_dim);
    const double bound = std::sqrt(6.0 / static_cast<double>(config.kernels * in + out));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
    }
    for (Eigen::Index k = 0; k < layer.mu.rows(); ++k) {
      for (Eigen::Index c = 0; c < layer.mu.cols(); ++c) layer.mu(k, c) = 0.1 * rng.normal();
    }
    params.layers.push_back(std::move(layer));
    in = out;
  }
  return params;
}

RowMatrixXd layer_forward(const RowMatrixXd& input, const LayerParams& params, const RowMatrixXd& coords,
                          const ConvStencil& stencil, LayerCache* cache) {
  const int n = static_cast<int>(input.rows());
  const int in = params.in_dim();
  const int kernels = params.kernels();
  const int d = params.embed_dim();
  if (input.cols() != in) {
    throw UsageError("layer expects " + std::to_string(in) + " input maps, got " + std::to_string(input.cols()));
  }
  if (coords.rows() != n || coords.cols() != d) throw UsageError("kernel coordinates do not match the layer");
  if (stencil.num_nodes() != n) throw UsageError("stencil does not match the feature map");

  const VectorXd sigma = params.log_sigma.array().exp();
  RowMatrixXd phi(stencil.num_slots(), kernels);
  RowMatrixXd aggregated = RowMatrixXd::Zero(n, static_cast<Eigen::Index>(kernels) * in);
  for (int i = 0; i < n; ++i) {
    for (int e = stencil.offsets[i]; e < stencil.offsets[i + 1]; ++e) {
      const int j = stencil.nodes[e];
      for (int k = 0; k < kernels; ++k) {
        double sq = 0.0;
        for (int c = 0; c < d; ++c) {
          const double r = (coords(j, c) - coords(i, c)) - params.mu(k, c);
          sq += r * r;
        }
        const double value = std::exp(-sigma[k] * sq);
        phi(e, k) = value;
        aggregated.row(i).segment(static_cast<Eigen::Index>(k) * in, in).noalias() += value * input.row(j);
      }
    }
  }
  RowMatrixXd pre = aggregated * params.weights;
  pre.rowwise() += params.bias.transpose();
  if (cache) {
    cache->input = input;
    cache->aggregated = std::move(aggregated);
    cache->phi = std::move(phi);
    cache->pre = pre;
  }
  return pre;
}

namespace {

RowMatrixXd activate(const RowMatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
}

}  // namespace

ForwardCache forward(const NetworkParams& params, const ConvInput& input) {
  if (input.features.cols() != params.config.input_dim) {
    throw UsageError("network expects " + std::to_string(params.config.input_dim) + " input features, got " +
                     std::to_string(input.features.cols()));
  }
  ForwardCache cache;
  cache.layers.resize(params.layers.size());
  RowMatrixXd y = input.features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const RowMatrixXd z = layer_forward(y, params.layers[l], input.coords, input.stencil, &cache.layers[l]);
    y = activate(z, params.config.leaky_slope);
  }
  cache.logits = std::move(y);
  cache.probabilities = softmax_rows(cache.logits);
  return cache;
}

RowMatrixXd softmax_rows(const RowMatrixXd& logits) {
  RowMatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - top).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

double cross_entropy(const RowMatrixXd& probabilities, const VectorXi& labels) {
  if (labels.size() != probabilities.rows()) throw UsageError("label count does not match probabilities");
  double loss = 0.0;
  int labelled = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) continue;
    if (labels[i] < 0 || labels[i] >= probabilities.cols()) {
      throw UsageError("label " + std::to_string(labels[i]) + " out of range");
    }
    loss -= std::log(std::max(probabilities(i, labels[i]), kProbabilityFloor));
    ++labelled;
  }
  if (labelled == 0) throw UsageError("cross-entropy needs at least one labelled node");
  return loss;
}

RowMatrixXd cross_entropy_gradient(const RowMatrixXd& probabilities, const VectorXi& labels) {
  RowMatrixXd g = RowMatrixXd::Zero(probabilities.rows(), probabilities.cols());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c == kUnlabeled) continue;
    // Inside the clamp the loss is constant in the logits.
    if (probabilities(i, c) < kProbabilityFloor) continue;
    g.row(i) = probabilities.row(i);
    g(i, c) -= 1.0;
  }
  return g;
}

NetworkGradients backward(const NetworkParams& params, const ConvInput& input, const ForwardCache& cache,
                          const RowMatrixXd& logits_gradient, bool freeze_kernels) {
  if (cache.layers.size() != params.layers.size() || cache.logits.size() == 0) {
    throw UsageError("backward pass needs the cache of a forward pass");
  }
  if (logits_gradient.rows() != cache.logits.rows() || logits_gradient.cols() != cache.logits.cols()) {
    throw UsageError("upstream gradient shape does not match the network output");
  }
  const double slope = params.config.leaky_slope;
  const ConvStencil& stencil = input.stencil;
  const RowMatrixXd& coords = input.coords;
  const int n = input.num_nodes();

  NetworkGradients grads = NetworkGradients::zeros_like(params);
  RowMatrixXd upstream = logits_gradient;  // dE/dY for the current layer's output
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const LayerParams& layer = params.layers[l];
    const LayerCache& lc = cache.layers[l];
    LayerParams& g = grads.layers[l];
    const int in = layer.in_dim();
    const int kernels = layer.kernels();
    const int d = layer.embed_dim();

    RowMatrixXd dz = upstream;
    for (Eigen::Index i = 0; i < dz.rows(); ++i) {
      for (Eigen::Index p = 0; p < dz.cols(); ++p) dz(i, p) *= leaky_relu_derivative(lc.pre(i, p), slope);
    }
    g.weights.noalias() = lc.aggregated.transpose() * dz;
    g.bias = dz.colwise().sum().transpose();
    const RowMatrixXd dh = dz * layer.weights.transpose();

    const bool need_input = l > 0;
    RowMatrixXd dinput;
    if (need_input) dinput = RowMatrixXd::Zero(n, in);
    const VectorXd sigma = layer.log_sigma.array().exp();
    for (int i = 0; i < n; ++i) {
      for (int e = stencil.offsets[i]; e < stencil.offsets[i + 1]; ++e) {
        const int j = stencil.nodes[e];
        for (int k = 0; k < kernels; ++k) {
          const double phi = lc.phi(e, k);
          const auto dh_block = dh.row(i).segment(static_cast<Eigen::Index>(k) * in, in);
          if (need_input) dinput.row(j).noalias() += phi * dh_block;
          if (freeze_kernels) continue;
          const double dphi = dh_block.dot(lc.input.row(j));
          const double common = dphi * phi;
          double sq = 0.0;
          for (int c = 0; c < d; ++c) {
            const double r = (coords(j, c) - coords(i, c)) - layer.mu(k, c);
            sq += r * r;
            g.mu(k, c) += common * 2.0 * sigma[k] * r;
          }
          g.log_sigma[k] -= common * sigma[k] * sq;
        }
      }
    }
    if (need_input) upstream = std::move(dinput);
  }
  return grads;
}

RowMatrixXd grid_conv_1d(const RowMatrixXd& signal, const std::vector<MatrixXd>& taps, const VectorXd& bias,
                         int half_width) {
  if (static_cast<int>(taps.size()) != 2 * half_width + 1) throw UsageError("grid convolution needs 2K+1 taps");
  const Eigen::Index n = signal.rows();
  RowMatrixXd out(n, bias.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = bias.transpose();
    for (int k = -half_width; k <= half_width; ++k) {
      const Eigen::Index j = i + k;
      if (j < 0 || j >= n) continue;
      out.row(i).noalias() += signal.row(j) * taps[static_cast<std::size_t>(k + half_width)];
    }
  }
  return out;
}

}  // namespace csg
