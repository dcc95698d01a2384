#pragma once

#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <filesystem>
#include <set>
#include <string>

#include "csg/graph.hpp"
#include "csg/rng.hpp"
#include "csg/synth.hpp"

namespace csg::test {

inline SurfaceMesh tetrahedron() {
  SurfaceMesh m;
  m.vertices.resize(4, 3);
  m.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  m.faces.resize(4, 3);
  m.faces << 0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3;
  m.sulcal_depth = VectorXd::Zero(4);
  return m;
}

inline SurfaceMesh sphere_mesh(int level) {
  const Icosphere ico = icosphere(level);
  SurfaceMesh m;
  m.vertices = ico.vertices;
  m.faces = ico.faces;
  m.sulcal_depth = VectorXd::Zero(ico.vertices.rows());
  return m;
}

/// Planar rows x cols grid with unit spacing, each quad split along the same diagonal.
inline SurfaceMesh grid_mesh(int rows, int cols) {
  SurfaceMesh m;
  m.vertices.resize(rows * cols, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m.vertices.row(r * cols + c) << c, r, 0.0;
  }
  m.faces.resize(2 * (rows - 1) * (cols - 1), 3);
  int f = 0;
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c, b = a + 1, d = a + cols, e = d + 1;
      m.faces.row(f++) << a, b, e;
      m.faces.row(f++) << a, e, d;
    }
  }
  m.sulcal_depth = VectorXd::Zero(rows * cols);
  return m;
}

/// Random connected weighted graph: a random spanning tree plus extra random edges.
inline BrainGraph random_graph(Rng& rng, int n, int extra_edges) {
  BrainGraph g;
  g.num_nodes = n;
  g.features = Eigen::Matrix<double, Eigen::Dynamic, 4>::Zero(n, 4);
  std::set<std::pair<int, int>> seen;
  for (int v = 1; v < n; ++v) {
    const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    seen.insert({u, v});
    g.edges.push_back({u, v, rng.uniform(0.1, 2.0)});
  }
  for (int e = 0; e < extra_edges; ++e) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) continue;
    g.edges.push_back({a, b, rng.uniform(0.1, 2.0)});
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const WeightedEdge& x, const WeightedEdge& y) { return std::pair{x.i, x.j} < std::pair{y.i, y.j}; });
  return g;
}

inline BrainGraph path_graph(int n, double weight = 1.0) {
  BrainGraph g;
  g.num_nodes = n;
  g.features = Eigen::Matrix<double, Eigen::Dynamic, 4>::Zero(n, 4);
  for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, weight});
  return g;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("csg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline MatrixXd random_orthogonal(Rng& rng, int d) {
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  return q;
}

}  // namespace csg::test
