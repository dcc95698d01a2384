#include <doctest.h>

#include <cmath>
#include <numeric>

#include "csg/checkpoint.hpp"
#include "csg/error.hpp"
#include "csg/gconv.hpp"
#include "helpers.hpp"

using namespace csg;

namespace {

ConvInput random_input(Rng& rng, const SurfaceMesh& mesh, int in_dim, int embed_dim) {
  const BrainGraph g = build_graph(mesh, AdjacencyMode::mesh_edges);
  ConvInput in;
  in.features.resize(mesh.num_vertices(), in_dim);
  in.coords.resize(mesh.num_vertices(), embed_dim);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    for (int c = 0; c < in_dim; ++c) in.features(i, c) = rng.normal();
    for (int c = 0; c < embed_dim; ++c) in.coords(i, c) = rng.normal();
  }
  in.stencil = conv_stencil(g);
  return in;
}

NetworkConfig small_config(int classes = 5) {
  NetworkConfig c;
  c.input_dim = 4;
  c.hidden = {6, 7};
  c.num_classes = classes;
  c.kernels = 3;
  c.embed_dim = 3;
  c.seed = 11;
  return c;
}

VectorXi random_labels(Rng& rng, int n, int classes) {
  VectorXi l(n);
  for (int i = 0; i < n; ++i) l[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return l;
}

}  // namespace

TEST_SUITE("gconv_net") {

TEST_CASE("Gaussian kernel closed forms") {
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  const Eigen::Vector3d e1(1, 0, 0);
  CHECK(gaussian_kernel(zero, e1, e1, 3.0) == 1.0);
  CHECK(gaussian_kernel(zero, e1, zero, 1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(gaussian_kernel(zero, e1, zero, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
  double prev = 1.0;
  for (double sigma : {1.0, 5.0, 25.0, 125.0}) {
    const double v = gaussian_kernel(zero, e1, zero, sigma);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-50);
}

TEST_CASE("zero weights give the bias in every row") {
  Rng rng(1);
  const ConvInput in = random_input(rng, test::sphere_mesh(1), 4, 3);
  LayerParams p = LayerParams::zeros(4, 5, 2, 3);
  p.bias << 1, 2, 3, 4, 5;
  const RowMatrixXd z = layer_forward(in.features, p, in.coords, in.stencil);
  for (int i = 0; i < z.rows(); ++i) CHECK((z.row(i).transpose() - p.bias).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single node self-loop with zero mean kernel is a dense layer") {
  ConvInput in;
  in.features.resize(1, 3);
  in.features << 0.5, -1.0, 2.0;
  in.coords = RowMatrixXd::Zero(1, 3);
  in.stencil = path_stencil(1);
  LayerParams p = LayerParams::zeros(3, 2, 1, 3);
  p.weights << 1, 2, 3, 4, 5, 6;
  p.bias << 0.25, -0.25;
  p.log_sigma << 1.7;
  const RowMatrixXd z = layer_forward(in.features, p, in.coords, in.stencil);
  const Eigen::RowVector2d expected = in.features.row(0) * p.weights + p.bias.transpose();
  CHECK((z.row(0) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("leaky ReLU") {
  CHECK(leaky_relu(2.0) == 2.0);
  CHECK(leaky_relu(-2.0) == doctest::Approx(-0.02));
  CHECK(leaky_relu(0.0) == 0.0);
  CHECK(leaky_relu_derivative(-1.0) == 0.01);
  CHECK(leaky_relu_derivative(1.0) == 1.0);
}

TEST_CASE("softmax rows") {
  RowMatrixXd u = RowMatrixXd::Zero(2, 32);
  u(1, 0) = 1000.0;
  const RowMatrixXd p = softmax_rows(u);
  for (int c = 0; c < 32; ++c) CHECK(p(0, c) == doctest::Approx(1.0 / 32.0));
  CHECK(p(1, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) < 1e-300);
  CHECK(p.allFinite());
  Rng rng(2);
  RowMatrixXd r(3, 6);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 6; ++c) r(i, c) = rng.normal();
  }
  RowMatrixXd shifted = r;
  shifted.row(1).array() += 37.0;
  CHECK((softmax_rows(r) - softmax_rows(shifted)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((softmax_rows(r).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("cross-entropy closed forms") {
  const int n = 7;
  const RowMatrixXd uniform = RowMatrixXd::Constant(n, 32, 1.0 / 32.0);
  VectorXi labels(n);
  labels << 0, 3, 5, 31, 2, 2, 9;
  CHECK(cross_entropy(uniform, labels) == doctest::Approx(n * std::log(32.0)));

  RowMatrixXd perfect = RowMatrixXd::Zero(n, 32);
  for (int i = 0; i < n; ++i) perfect(i, labels[i]) = 1.0;
  CHECK(cross_entropy(perfect, labels) == doctest::Approx(0.0));

  RowMatrixXd better = uniform;
  better(0, 0) += 0.1;
  better(0, 1) -= 0.1;
  CHECK(cross_entropy(better, labels) < cross_entropy(uniform, labels));

  VectorXi partial = labels;
  partial[1] = kUnlabeled;
  CHECK(cross_entropy(uniform, partial) == doctest::Approx((n - 1) * std::log(32.0)));
  CHECK_THROWS_AS(cross_entropy(uniform, VectorXi::Constant(n, kUnlabeled)), UsageError);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(3);
  const ConvInput in = random_input(rng, test::sphere_mesh(1), 4, 3);
  const NetworkParams params = init_network(small_config());
  const ForwardCache cache = forward(params, in);
  const NetworkGradients g = backward(params, in, cache, RowMatrixXd::Zero(in.num_nodes(), 5), false);
  for (const auto& l : g.layers) {
    CHECK(l.weights.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.mu.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.log_sigma.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(4);
  const ConvInput in = random_input(rng, test::grid_mesh(4, 5), 4, 3);
  NetworkParams params = init_network(small_config());
  // Move kernels away from the origin so every parameter has a visible effect.
  for (auto& l : params.layers) {
    for (int k = 0; k < l.kernels(); ++k) {
      for (int c = 0; c < 3; ++c) l.mu(k, c) = 0.5 * rng.normal();
      l.log_sigma[k] = 0.3 * rng.normal() - 0.5;
    }
  }
  const VectorXi labels = random_labels(rng, in.num_nodes(), 5);
  auto loss = [&](const NetworkParams& p) { return cross_entropy(forward(p, in).probabilities, labels); };
  const ForwardCache cache = forward(params, in);
  const NetworkGradients g =
      backward(params, in, cache, cross_entropy_gradient(cache.probabilities, labels), false);
  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& value, double analytic) {
    const double saved = value;
    value = saved + h;
    const double up = loss(params);
    value = saved - h;
    const double down = loss(params);
    value = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-4}));
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& d = g.layers[l];
    for (Eigen::Index i = 0; i < p.weights.size(); i += 3) check(p.weights.data()[i], d.weights.data()[i]);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) check(p.bias[i], d.bias[i]);
    for (Eigen::Index i = 0; i < p.mu.size(); ++i) check(p.mu.data()[i], d.mu.data()[i]);
    for (Eigen::Index i = 0; i < p.log_sigma.size(); ++i) check(p.log_sigma[i], d.log_sigma[i]);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("frozen kernels give exactly zero kernel gradients") {
  Rng rng(5);
  const ConvInput in = random_input(rng, test::sphere_mesh(1), 4, 3);
  const NetworkParams params = init_network(small_config());
  const VectorXi labels = random_labels(rng, in.num_nodes(), 5);
  const ForwardCache cache = forward(params, in);
  const NetworkGradients g = backward(params, in, cache, cross_entropy_gradient(cache.probabilities, labels), true);
  CHECK(g.max_abs_kernel() == 0.0);
  double w = 0.0;
  for (const auto& l : g.layers) w = std::max(w, l.weights.cwiseAbs().maxCoeff());
  CHECK(w > 0.0);
}

TEST_CASE("convolution is equivariant to node relabelling") {
  Rng rng(6);
  const SurfaceMesh m = test::sphere_mesh(1);
  const ConvInput in = random_input(rng, m, 4, 3);
  const NetworkParams params = init_network(small_config());
  std::vector<int> perm(static_cast<std::size_t>(m.num_vertices()));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);

  SurfaceMesh pm = m;
  for (int i = 0; i < m.num_vertices(); ++i) pm.vertices.row(i) = m.vertices.row(perm[i]);
  for (int f = 0; f < m.num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) pm.faces(f, c) = inverse[m.faces(f, c)];
  }
  ConvInput pin;
  pin.features.resize(in.features.rows(), in.features.cols());
  pin.coords.resize(in.coords.rows(), in.coords.cols());
  for (int i = 0; i < m.num_vertices(); ++i) {
    pin.features.row(i) = in.features.row(perm[i]);
    pin.coords.row(i) = in.coords.row(perm[i]);
  }
  pin.stencil = conv_stencil(build_graph(pm, AdjacencyMode::mesh_edges));
  const RowMatrixXd a = forward(params, in).probabilities;
  const RowMatrixXd b = forward(params, pin).probabilities;
  for (int i = 0; i < m.num_vertices(); ++i) CHECK((b.row(i) - a.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identity adjacency makes nodes independent") {
  Rng rng(7);
  const SurfaceMesh m = test::sphere_mesh(1);
  ConvInput in = random_input(rng, m, 4, 3);
  in.stencil = conv_stencil(build_graph(m, AdjacencyMode::identity));
  in.features.row(5) = in.features.row(2);
  const NetworkParams params = init_network(small_config());
  const RowMatrixXd p = forward(params, in).probabilities;
  CHECK((p.row(5) - p.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initialization follows the documented scheme") {
  NetworkConfig c;
  c.seed = 3;
  const NetworkParams p = init_network(c);
  REQUIRE(p.layers.size() == 3);
  CHECK(p.layers[0].weights.rows() == 16);
  CHECK(p.layers[0].weights.cols() == 32);
  CHECK(p.layers[2].weights.cols() == 32);
  for (const auto& l : p.layers) {
    const double bound = std::sqrt(6.0 / (l.weights.rows() + l.weights.cols()));
    CHECK(l.weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.log_sigma.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.mu.cwiseAbs().maxCoeff() < 1.0);
  }
  const NetworkParams q = init_network(c);
  CHECK(encode_checkpoint(p, CheckpointFormat::binary) == encode_checkpoint(q, CheckpointFormat::binary));
}

TEST_CASE("delta filter on a path reproduces the input") {
  const int n = 12;
  RowMatrixXd y(n, 2);
  Rng rng(8);
  for (int i = 0; i < n; ++i) y.row(i) << rng.normal(), rng.normal();
  std::vector<MatrixXd> taps(3, MatrixXd::Zero(2, 2));
  taps[1] = MatrixXd::Identity(2, 2);
  const RowMatrixXd z = grid_conv_1d(y, taps, VectorXd::Zero(2), 1);
  CHECK((z - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grid convolution of a constant signal is constant in the interior") {
  const int n = 10;
  const RowMatrixXd y = RowMatrixXd::Constant(n, 1, 2.5);
  std::vector<MatrixXd> taps = {MatrixXd::Constant(1, 1, 0.3), MatrixXd::Constant(1, 1, -1.1),
                                MatrixXd::Constant(1, 1, 0.7)};
  VectorXd b(1);
  b << 0.4;
  const RowMatrixXd z = grid_conv_1d(y, taps, b, 1);
  for (int i = 2; i < n - 1; ++i) CHECK(z(i, 0) == doctest::Approx(z(1, 0)));
}

TEST_CASE("grid convolution matches a direct triple loop") {
  Rng rng(9);
  const int n = 16;
  RowMatrixXd y(n, 1);
  for (int i = 0; i < n; ++i) y(i, 0) = rng.normal();
  std::vector<MatrixXd> taps(3, MatrixXd(1, 1));
  for (auto& t : taps) t(0, 0) = rng.normal();
  VectorXd b(1);
  b << rng.normal();
  const RowMatrixXd z = grid_conv_1d(y, taps, b, 1);
  for (int i = 0; i < n; ++i) {
    double expected = b[0];
    for (int k = -1; k <= 1; ++k) {
      if (i + k >= 0 && i + k < n) expected += taps[k + 1](0, 0) * y(i + k, 0);
    }
    CHECK(z(i, 0) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("graph convolution with indicator kernels matches grid convolution") {
  Rng rng(10);
  const int n = 20, in = 2, out = 3;
  RowMatrixXd y(n, in);
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < in; ++q) y(i, q) = rng.normal();
  }
  LayerParams p = LayerParams::zeros(in, out, 3, 1);
  p.mu << -1, 0, 1;
  p.log_sigma.setConstant(std::log(50.0));
  std::vector<MatrixXd> taps(3, MatrixXd(in, out));
  for (int k = 0; k < 3; ++k) {
    for (int q = 0; q < in; ++q) {
      for (int o = 0; o < out; ++o) {
        taps[k](q, o) = rng.normal();
        p.w(o, q, k) = taps[k](q, o);
      }
    }
  }
  for (int o = 0; o < out; ++o) p.bias[o] = rng.normal();
  RowMatrixXd coords(n, 1);
  for (int i = 0; i < n; ++i) coords(i, 0) = i;
  const RowMatrixXd graph = layer_forward(y, p, coords, path_stencil(n));
  const RowMatrixXd grid = grid_conv_1d(y, taps, p.bias, 1);
  CHECK((graph - grid).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("checkpoint round-trips in both formats") {
  NetworkConfig c = small_config();
  NetworkParams p = init_network(c);
  Rng rng(12);
  for (auto& l : p.layers) l.log_sigma[0] = rng.normal();
  const auto dir = test::temp_dir("ckpt");
  for (auto fmt : {CheckpointFormat::binary, CheckpointFormat::json}) {
    save_checkpoint(dir / "ckpt", p, fmt);
    const NetworkParams r = load_checkpoint(dir / "ckpt");
    CHECK(r.config == p.config);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      CHECK(r.layers[l].weights == p.layers[l].weights);
      CHECK(r.layers[l].bias == p.layers[l].bias);
      CHECK(r.layers[l].mu == p.layers[l].mu);
      CHECK(r.layers[l].log_sigma == p.layers[l].log_sigma);
    }
  }
}

TEST_CASE("missing or corrupt checkpoint is a data error") {
  const auto dir = test::temp_dir("ckpt_bad");
  try {
    load_checkpoint(dir / "nope.bin");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("nope.bin") != std::string::npos);
  }
  std::string bytes = encode_checkpoint(init_network(small_config()), CheckpointFormat::binary);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(bytes), DataError);
  CHECK_THROWS_AS(decode_checkpoint("garbage"), DataError);
}

}
