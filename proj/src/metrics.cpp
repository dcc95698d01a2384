#include "csg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csg/error.hpp"
#include "csg/kdtree.hpp"
#include "csg/stats.hpp"

namespace csg {

double dice_per_parcel(const VectorXi& pred, const VectorXi& ref, int parcel) {
  if (pred.size() != ref.size()) throw UsageError("prediction and reference differ in length");
  long p = 0, r = 0, both = 0;
  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    if (ref[i] == kUnlabeled) continue;
    const bool in_p = pred[i] == parcel;
    const bool in_r = ref[i] == parcel;
    p += in_p;
    r += in_r;
    both += in_p && in_r;
  }
  if (p + r == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + r);
}

double node_accuracy(const VectorXi& pred, const VectorXi& ref) {
  if (pred.size() != ref.size()) throw UsageError("prediction and reference differ in length");
  long labelled = 0, correct = 0;
  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    if (ref[i] == kUnlabeled) continue;
    ++labelled;
    correct += pred[i] == ref[i];
  }
  if (labelled == 0) throw UsageError("accuracy needs at least one labelled node");
  return static_cast<double>(correct) / static_cast<double>(labelled);
}

double mean_dice(const VectorXi& pred, const VectorXi& ref, int num_parcels) {
  double sum = 0.0;
  for (int c = 0; c < num_parcels; ++c) sum += dice_per_parcel(pred, ref, c);
  return sum / num_parcels;
}

SurfaceGeometry::SurfaceGeometry(const SurfaceMesh& mesh)
    : vertices_(mesh.vertices), neighbors_(vertex_neighbors(mesh.num_vertices(), unique_edges(mesh.faces))) {}

double SurfaceGeometry::diameter() const {
  if (!diameter_) {
    SurfaceMesh m;
    m.vertices = vertices_;
    diameter_ = mesh_diameter(m);
  }
  return *diameter_;
}

std::vector<int> parcel_boundary(const VectorXi& labels, int parcel, const std::vector<std::vector<int>>& neighbors) {
  std::vector<int> out;
  for (Eigen::Index v = 0; v < labels.size(); ++v) {
    if (labels[v] != parcel) continue;
    for (int w : neighbors[v]) {
      if (labels[w] != parcel) {
        out.push_back(static_cast<int>(v));
        break;
      }
    }
  }
  return out;
}

namespace {

RowMatrixXd gather(const Vertices& vertices, const std::vector<int>& ids) {
  RowMatrixXd out(static_cast<Eigen::Index>(ids.size()), 3);
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = vertices.row(ids[i]);
  return out;
}

double percentile_of(std::vector<double> values, double percentile) {
  if (values.empty()) return 0.0;
  if (percentile >= 100.0) return *std::max_element(values.begin(), values.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  const std::size_t idx = std::clamp<std::size_t>(rank, 1, values.size()) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(idx), values.end());
  return values[idx];
}

std::vector<int> members(const VectorXi& labels, int parcel) {
  std::vector<int> out;
  for (Eigen::Index v = 0; v < labels.size(); ++v) {
    if (labels[v] == parcel) out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace

std::vector<double> directed_distances(const Vertices& vertices, const std::vector<int>& from, const std::vector<int>& to) {
  std::vector<double> out(from.size());
  const RowMatrixXd targets = gather(vertices, to);
  const RowMatrixXd sources = gather(vertices, from);
  if (to.size() > 64) {
    const KdTree tree(targets);
    for (std::size_t i = 0; i < from.size(); ++i) {
      out[i] = std::sqrt(tree.nearest(sources.row(static_cast<Eigen::Index>(i)).data()).squared_distance);
    }
  } else {
    for (std::size_t i = 0; i < from.size(); ++i) {
      out[i] = std::sqrt(brute_force_nearest(targets, sources.row(static_cast<Eigen::Index>(i)).data()).squared_distance);
    }
  }
  return out;
}

double hausdorff_per_parcel(const VectorXi& pred, const VectorXi& ref, int parcel, const SurfaceGeometry& geometry,
                            const HausdorffOptions& options) {
  auto points = [&](const VectorXi& labels) {
    if (options.points == HausdorffPoints::all) return members(labels, parcel);
    auto b = parcel_boundary(labels, parcel, geometry.neighbors());
    // A parcel covering the whole surface has no boundary; fall back to its vertices.
    return b.empty() ? members(labels, parcel) : b;
  };
  const auto bp = points(pred);
  const auto br = points(ref);
  if (bp.empty() && br.empty()) return 0.0;
  if (bp.empty() || br.empty()) return geometry.diameter();
  const double forward = percentile_of(directed_distances(geometry.vertices(), bp, br), options.percentile);
  const double reverse = percentile_of(directed_distances(geometry.vertices(), br, bp), options.percentile);
  return std::max(forward, reverse);
}

double hausdorff_brute_force(const Vertices& vertices, const std::vector<int>& a, const std::vector<int>& b) {
  auto directed = [&](const std::vector<int>& from, const std::vector<int>& to) {
    double worst = 0.0;
    for (int i : from) {
      double best = std::numeric_limits<double>::infinity();
      for (int j : to) best = std::min(best, (vertices.row(i) - vertices.row(j)).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

double SubjectMetrics::mean_dice() const {
  return dice.empty() ? 0.0 : std::accumulate(dice.begin(), dice.end(), 0.0) / static_cast<double>(dice.size());
}

double SubjectMetrics::mean_hausdorff() const {
  return hausdorff.empty() ? 0.0
                           : std::accumulate(hausdorff.begin(), hausdorff.end(), 0.0) / static_cast<double>(hausdorff.size());
}

SubjectMetrics evaluate_subject(const VectorXi& pred, const VectorXi& ref, int num_parcels,
                                const SurfaceGeometry& geometry, const HausdorffOptions& options) {
  SubjectMetrics m;
  for (int c = 0; c < num_parcels; ++c) {
    m.dice.push_back(dice_per_parcel(pred, ref, c));
    m.hausdorff.push_back(hausdorff_per_parcel(pred, ref, c, geometry, options));
    m.ref_count.push_back(static_cast<int>((ref.array() == c).count()));
    m.pred_count.push_back(static_cast<int>((pred.array() == c).count()));
  }
  m.accuracy = node_accuracy(pred, ref);
  return m;
}

ParcelSummary summarize(const std::vector<SubjectMetrics>& subjects) {
  if (subjects.empty()) throw UsageError("nothing to summarize");
  const std::size_t parcels = subjects.front().dice.size();
  ParcelSummary s;
  s.parcel_dice.assign(parcels, 0.0);
  s.parcel_hausdorff.assign(parcels, 0.0);
  double accuracy = 0.0;
  for (const auto& m : subjects) {
    if (m.dice.size() != parcels) throw UsageError("subjects disagree on the parcel count");
    for (std::size_t c = 0; c < parcels; ++c) {
      s.parcel_dice[c] += m.dice[c];
      s.parcel_hausdorff[c] += m.hausdorff[c];
    }
    accuracy += m.accuracy;
  }
  const double n = static_cast<double>(subjects.size());
  for (std::size_t c = 0; c < parcels; ++c) {
    s.parcel_dice[c] /= n;
    s.parcel_hausdorff[c] /= n;
  }
  const Eigen::Map<const VectorXd> dice(s.parcel_dice.data(), static_cast<Eigen::Index>(parcels));
  const Eigen::Map<const VectorXd> haus(s.parcel_hausdorff.data(), static_cast<Eigen::Index>(parcels));
  s.mean_dice = sequential_mean(dice);
  s.std_dice = population_std(dice);
  s.min_dice = dice.minCoeff();
  s.max_dice = dice.maxCoeff();
  s.mean_hausdorff = sequential_mean(haus);
  s.accuracy = accuracy / n;
  return s;
}

}  // namespace csg
