#include "csg/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <string>

#include "csg/error.hpp"
#include "csg/rng.hpp"
#include "csg/stats.hpp"

namespace csg {

namespace {

using Vec3 = Eigen::Vector3d;

// Seed of the displacement component shared by every subject.
constexpr std::uint64_t kPopulationSeed = 0x5eed'cafe'f00dULL;
// Shape terms per unit of deform_amplitude. Semi-axis i is exp(amplitude * kLogAxes[i]); distinct
// lengths keep the low Laplacian eigenvalues apart. The skew maps a direction component t to
// t * (1 + amplitude * kSkew[i] * t), making each axis lopsided so that reflections of the
// spectral embedding are distinguishable. |amplitude * kSkew| < 0.5 keeps the map monotone.
constexpr double kLogAxes[3] = {1.25, 0.15, -0.95};
constexpr double kSkew[3] = {0.9, -0.75, 0.65};
constexpr double kAxisJitter = 0.04;

}  // namespace

Icosphere icosphere(int level) {
  if (level < 0) throw UsageError("icosphere level must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (const auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> refined;
    refined.reserve(faces.size() * 4);
    for (const auto& [a, b, c] : faces) {
      const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      refined.push_back({a, ab, ca});
      refined.push_back({b, bc, ab});
      refined.push_back({c, ca, bc});
      refined.push_back({ab, bc, ca});
    }
    faces = std::move(refined);
  }
  Icosphere out;
  out.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) out.vertices.row(static_cast<Eigen::Index>(i)) = verts[i];
  out.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) out.faces(static_cast<Eigen::Index>(f), c) = faces[f][c];
  }
  return out;
}

int icosphere_level_for(int min_vertices) {
  int level = 0;
  long count = 12;
  while (count < min_vertices) {
    ++level;
    count = 10L * (1L << (2 * level)) + 2;
  }
  return level;
}

namespace {

// Sum of plane waves restricted to the sphere; |field| <= 1 everywhere.
struct WaveField {
  std::vector<Vec3> directions;
  std::vector<double> frequencies;
  std::vector<double> phases;
  std::vector<double> amplitudes;

  static WaveField random(Rng& rng, int count, double min_freq, double max_freq) {
    WaveField f;
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
      Vec3 d(rng.normal(), rng.normal(), rng.normal());
      f.directions.push_back(d.normalized());
      f.frequencies.push_back(rng.uniform(min_freq, max_freq));
      f.phases.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
      const double a = rng.normal();
      f.amplitudes.push_back(a);
      total += std::abs(a);
    }
    for (auto& a : f.amplitudes) a /= total;
    return f;
  }

  double operator()(const Vec3& n) const {
    double value = 0.0;
    for (std::size_t i = 0; i < directions.size(); ++i) {
      value += amplitudes[i] * std::cos(frequencies[i] * directions[i].dot(n) + phases[i]);
    }
    return value;
  }
};

// Shared shape: elongated and asymmetric along every axis so that spectral embeddings of
// different subjects have a unique best orthogonal match. Bounded by 1 in magnitude.
double population_shape(const Vec3& n, const WaveField& waves) {
  const double x = n.x(), y = n.y(), z = n.z();
  const double poly = 0.30 * x * x * x + 0.22 * y * y * y + 0.18 * z * z * z + 0.10 * x * y - 0.08 * y * z;
  return poly + 0.12 * waves(n);
}

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle_rad) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() == 0.0) axis = Vec3::UnitZ();
  const double angle = rng.uniform(0.0, max_angle_rad);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d uniform_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

Eigen::Matrix<double, Eigen::Dynamic, 3> canonical_parcel_seeds(int n_parcels) {
  const Icosphere sphere = icosphere(4);
  const Eigen::Index n = sphere.vertices.rows();
  if (n_parcels < 1 || n_parcels > n) throw UsageError("invalid parcel count");
  Eigen::Matrix<double, Eigen::Dynamic, 3> seeds(n_parcels, 3);
  // Farthest-point sampling by great-circle distance, which is monotone in -dot.
  VectorXd closest = VectorXd::Constant(n, -2.0);  // max dot to any chosen seed
  Eigen::Index pick = 0;
  for (int s = 0; s < n_parcels; ++s) {
    seeds.row(s) = sphere.vertices.row(pick);
    closest = closest.cwiseMax(sphere.vertices * sphere.vertices.row(pick).transpose());
    closest.minCoeff(&pick);
  }
  return seeds;
}

SurfaceMesh generate_synthetic_surface(const SynthParams& params) {
  if (params.n_vertices < 12) throw UsageError("n_vertices must be at least 12");
  if (params.n_parcels < 2 || params.n_parcels > 64) throw UsageError("n_parcels must be in [2, 64]");
  if (!(params.deform_amplitude >= 0.0 && params.deform_amplitude <= 0.5)) {
    throw UsageError("deform_amplitude must be in [0, 0.5]");
  }
  if (!(params.pose_jitter_deg >= 0.0 && params.pose_jitter_deg <= 180.0)) {
    throw UsageError("pose_jitter_deg must be in [0, 180]");
  }

  const int level = icosphere_level_for(std::max(params.n_vertices, 4 * params.n_parcels));
  const Icosphere sphere = icosphere(level);
  const Eigen::Index n = sphere.vertices.rows();

  Rng rng(params.seed);
  const Eigen::Matrix3d tessellation_frame = uniform_rotation(rng);
  const WaveField subject_waves = WaveField::random(rng, 8, 1.5, 4.0);
  const Eigen::Matrix3d pose = random_rotation(rng, params.pose_jitter_deg * std::numbers::pi / 180.0);
  const double amp = params.deform_amplitude;
  Vec3 axes;
  for (int a = 0; a < 3; ++a) {
    axes[a] = std::exp(amp * kLogAxes[a]) * (1.0 + amp * kAxisJitter * std::clamp(rng.normal(), -2.0, 2.0));
  }
  Rng population_rng(kPopulationSeed);
  const WaveField population_waves = WaveField::random(population_rng, 6, 1.0, 3.0);

  // Canonical directions of this subject's vertices.
  const Eigen::Matrix<double, Eigen::Dynamic, 3> canonical = sphere.vertices * tessellation_frame.transpose();

  SurfaceMesh mesh;
  mesh.faces = sphere.faces;
  mesh.vertices.resize(n, 3);
  VectorXd displacement(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const Vec3 dir = canonical.row(v).transpose();
    const double field = 0.7 * population_shape(dir, population_waves) + 0.3 * subject_waves(dir);
    displacement[v] = amp * field;
    Vec3 p = dir;
    for (int a = 0; a < 3; ++a) p[a] = axes[a] * p[a] * (1.0 + amp * kSkew[a] * p[a]);
    mesh.vertices.row(v) = (pose * ((1.0 + displacement[v]) * p)).transpose();
  }
  mesh.sulcal_depth = z_score(displacement);

  // Parcel seeds: nearest free vertex to each canonical seed direction.
  const auto seeds = canonical_parcel_seeds(params.n_parcels);
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> seed_vertex(static_cast<std::size_t>(params.n_parcels));
  for (int s = 0; s < params.n_parcels; ++s) {
    const VectorXd dots = canonical * seeds.row(s).transpose();
    Eigen::Index best = -1;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (!taken[v] && (best < 0 || dots[v] > dots[best])) best = v;
    }
    taken[best] = 1;
    seed_vertex[s] = static_cast<int>(best);
  }

  // Geodesic Voronoi cells on the canonical sphere via multi-source Dijkstra.
  const auto nbrs = vertex_neighbors(static_cast<int>(n), unique_edges(mesh.faces));
  VectorXd dist = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  mesh.labels = VectorXi::Constant(n, kUnlabeled);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (int s = 0; s < params.n_parcels; ++s) {
    dist[seed_vertex[s]] = 0.0;
    mesh.labels[seed_vertex[s]] = s;
    queue.emplace(0.0, seed_vertex[s]);
  }
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (int w : nbrs[v]) {
      const double nd = d + (canonical.row(v) - canonical.row(w)).norm();
      if (nd < dist[w]) {
        dist[w] = nd;
        mesh.labels[w] = mesh.labels[v];
        queue.emplace(nd, w);
      }
    }
  }
  return mesh;
}

}  // namespace csg
