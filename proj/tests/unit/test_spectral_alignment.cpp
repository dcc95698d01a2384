#include <doctest.h>

#include <numeric>

#include "csg/alignment.hpp"
#include "csg/error.hpp"
#include "csg/features.hpp"
#include "csg/kdtree.hpp"
#include "csg/synth.hpp"
#include "helpers.hpp"

using namespace csg;

namespace {

MatrixXd random_points(Rng& rng, int n, int d) {
  MatrixXd p(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) p(i, j) = rng.normal();
  }
  return p;
}

SpectralEmbedding subject_embedding(std::uint64_t seed, int n_vertices) {
  const SurfaceMesh m = generate_synthetic_surface(seed, n_vertices, 8, 0.3);
  return embed_graph(build_graph(m, AdjacencyMode::mesh_edges), 3);
}

}  // namespace

TEST_SUITE("spectral_alignment") {

TEST_CASE("points matched to themselves give the identity correspondence") {
  Rng rng(1);
  const MatrixXd p = random_points(rng, 50, 3);
  const auto idx = nearest_reference(p, p);
  for (int i = 0; i < 50; ++i) CHECK(idx[i] == i);
}

TEST_CASE("single reference point takes every match") {
  Rng rng(2);
  const MatrixXd p = random_points(rng, 20, 3);
  const auto idx = nearest_reference(p, random_points(rng, 1, 3));
  for (int i : idx) CHECK(i == 0);
}

TEST_CASE("nearest reference matches an exhaustive scan") {
  Rng rng(3);
  for (int d : {2, 3, 5}) {
    const MatrixXd p = random_points(rng, 100, d);
    const MatrixXd r = random_points(rng, 100, d);
    const auto idx = nearest_reference(p, r);
    for (int i = 0; i < 100; ++i) {
      int best = 0;
      double best_d = (p.row(i) - r.row(0)).squaredNorm();
      for (int j = 1; j < 100; ++j) {
        const double dj = (p.row(i) - r.row(j)).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      CHECK(idx[i] == best);
    }
  }
}

TEST_CASE("kd-tree equals brute force including ties") {
  Rng rng(4);
  // Integer lattice points create many exact ties.
  MatrixXd pts(400, 3);
  for (int i = 0; i < 400; ++i) {
    for (int j = 0; j < 3; ++j) pts(i, j) = static_cast<double>(rng.below(5));
  }
  const KdTree tree(pts);
  const RowMatrixXd rows = pts;
  for (int q = 0; q < 200; ++q) {
    Eigen::Vector3d query(rng.uniform(-1, 5), rng.uniform(-1, 5), static_cast<double>(rng.below(5)));
    const NeighborHit a = tree.nearest(query.data());
    const NeighborHit b = brute_force_nearest(rows, query.data());
    CHECK(a.index == b.index);
    CHECK(a.squared_distance == b.squared_distance);
  }
}

TEST_CASE("Procrustes of identical sets is the identity") {
  Rng rng(5);
  const MatrixXd p = random_points(rng, 30, 3);
  CHECK((procrustes_transform(p, p) - MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("Procrustes recovers a random orthogonal matrix") {
  Rng rng(6);
  for (int d : {2, 3, 4}) {
    const MatrixXd p = random_points(rng, 40, d);
    const MatrixXd q = test::random_orthogonal(rng, d);
    const MatrixXd r = procrustes_transform(p, p * q);
    CHECK((r - q).norm() < 1e-8);
    CHECK((r.transpose() * r - MatrixXd::Identity(d, d)).norm() < 1e-10);
  }
}

TEST_CASE("Procrustes recovers a reflection") {
  Rng rng(7);
  const MatrixXd p = random_points(rng, 40, 3);
  MatrixXd t = p;
  t.col(1) *= -1.0;
  const MatrixXd r = procrustes_transform(p, t);
  CHECK(r.determinant() == doctest::Approx(-1.0));
  CHECK((p * r - t).norm() < 1e-10);
}

TEST_CASE("rank-deficient cross-covariance is an error") {
  MatrixXd p = MatrixXd::Zero(10, 3);
  p.col(0).setLinSpaced(10, -1.0, 1.0);
  CHECK_THROWS_AS(procrustes_transform(p, p), NumericalError);
}

TEST_CASE("aligning an embedding to itself is the identity in one iteration") {
  const SpectralEmbedding e = subject_embedding(1, 642);
  const AlignedEmbedding a = icp_align(e, e);
  CHECK((a.result.rotation - MatrixXd::Identity(3, 3)).norm() <= 1e-8);
  CHECK(a.result.iterations == 1);
  CHECK(a.result.converged);
  CHECK(a.result.rms_distance == 0.0);
  CHECK(a.embedding.aligned);
}

TEST_CASE("ICP recovers an orthogonal transform and node permutation") {
  const SpectralEmbedding e = subject_embedding(2, 642);
  Rng rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const MatrixXd q = test::random_orthogonal(rng, 3);
    std::vector<int> perm(static_cast<std::size_t>(e.num_nodes()));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    SpectralEmbedding moved = e;
    for (int i = 0; i < e.num_nodes(); ++i) {
      moved.coordinates.row(i) = e.coordinates.row(perm[i]) * q;
      moved.eigenvectors.row(i) = e.eigenvectors.row(perm[i]) * q;
    }
    const AlignedEmbedding a = icp_align(moved, e);
    CHECK(a.result.rms_distance <= 1e-6);
    CHECK((q * a.result.rotation - MatrixXd::Identity(3, 3)).norm() <= 1e-6);
  }
}

TEST_CASE("ICP history is non-increasing and improves on different subjects") {
  const SpectralEmbedding ref = subject_embedding(10, 642);
  const SpectralEmbedding mov = subject_embedding(11, 642);
  const AlignedEmbedding a = icp_align(mov, ref);
  for (std::size_t i = 1; i < a.result.history.size(); ++i) CHECK(a.result.history[i] <= a.result.history[i - 1]);
  CHECK(a.result.rms_distance < a.result.initial_rms_distance);
  CHECK((a.result.rotation.transpose() * a.result.rotation - MatrixXd::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("aligned basis stays orthonormal and realignment is idempotent") {
  const SpectralEmbedding ref = subject_embedding(12, 642);
  const AlignedEmbedding a = icp_align(subject_embedding(13, 642), ref);
  const MatrixXd gram = a.embedding.eigenvectors.transpose() * a.embedding.eigenvectors;
  CHECK((gram - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-6);
  const AlignedEmbedding b = icp_align(a.embedding, ref);
  CHECK(std::abs(b.result.rms_distance - a.result.rms_distance) < 1e-7);
}

TEST_CASE("feature matrix columns in both modes") {
  const SurfaceMesh m = generate_synthetic_surface(14, 642, 8, 0.3);
  const BrainGraph g = build_graph(m, AdjacencyMode::mesh_edges);
  const SpectralEmbedding e = embed_graph(g, 3);
  CHECK_THROWS_AS(build_feature_matrix(e, g, FeatureMode::spectral), UsageError);
  const SpectralEmbedding aligned = icp_align(e, e).embedding;
  const MatrixXd s = build_feature_matrix(aligned, g, FeatureMode::spectral);
  const MatrixXd x = build_feature_matrix(aligned, g, FeatureMode::euclidean);
  CHECK(s.rows() == m.num_vertices());
  CHECK(s.cols() == 4);
  CHECK(x.cols() == 4);
  CHECK(s.col(3) == x.col(3));
  CHECK(s.col(3) == m.sulcal_depth);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(x.col(c).mean()) < 1e-12);
    CHECK(x.col(c).squaredNorm() / x.rows() == doctest::Approx(1.0));
  }
  CHECK(s.leftCols(3).squaredNorm() / s.rows() == doctest::Approx(1.0));
}

TEST_CASE("alignment JSON round-trips") {
  const auto dir = test::temp_dir("align_json");
  const SpectralEmbedding e = subject_embedding(15, 162);
  const AlignmentResult r = icp_align(e, subject_embedding(16, 162)).result;
  write_alignment_json(dir / "align.json", r);
  const AlignmentResult back = read_alignment_json(dir / "align.json");
  CHECK(back.rotation == r.rotation);
  CHECK(back.iterations == r.iterations);
  CHECK(back.converged == r.converged);
  CHECK(back.rms_distance == r.rms_distance);
}

}
