#include "csg/alignment.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <string>

#include "csg/error.hpp"
#include "csg/text_io.hpp"

namespace csg {

NearestReference::NearestReference(const MatrixXd& reference) : reference_(reference) {
  if (reference.rows() > kIndexedSearchThreshold) tree_ = std::make_unique<KdTree>(reference);
}

NeighborHit NearestReference::query(const double* point) const {
  return tree_ ? tree_->nearest(point) : brute_force_nearest(reference_, point);
}

std::vector<NeighborHit> NearestReference::query_all(const MatrixXd& points) const {
  if (points.cols() != reference_.cols()) throw UsageError("dimension mismatch in nearest-reference query");
  const RowMatrixXd rows = points;
  std::vector<NeighborHit> hits(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) hits[i] = query(rows.row(i).data());
  return hits;
}

std::vector<int> nearest_reference(const MatrixXd& points, const MatrixXd& reference) {
  if (points.rows() == 0 || reference.rows() == 0) throw UsageError("nearest_reference needs non-empty sets");
  const auto hits = NearestReference(reference).query_all(points);
  std::vector<int> out(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) out[i] = hits[i].index;
  return out;
}

MatrixXd procrustes_transform(const MatrixXd& source, const MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw UsageError("Procrustes needs matched point sets of equal shape");
  }
  if (source.rows() < source.cols()) throw UsageError("Procrustes needs at least d matched pairs");
  const MatrixXd cross = source.transpose() * target;
  Eigen::JacobiSVD<MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  if (!(sv.size() > 0 && sv[sv.size() - 1] > 1e-12 * std::max(sv[0], 1e-300))) {
    throw NumericalError("degenerate Procrustes configuration: cross-covariance is rank deficient");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

SpectralEmbedding apply_transform(const SpectralEmbedding& embedding, const MatrixXd& rotation) {
  SpectralEmbedding out = embedding;
  out.coordinates = embedding.coordinates * rotation;
  if (embedding.eigenvectors.size() > 0) out.eigenvectors = embedding.eigenvectors * rotation;
  out.aligned = true;
  return out;
}

namespace {

struct IcpRun {
  MatrixXd rotation;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

double rms_of(const std::vector<NeighborHit>& hits) {
  double sum = 0.0;
  for (const auto& h : hits) sum += h.squared_distance;
  return std::sqrt(sum / static_cast<double>(hits.size()));
}

MatrixXd gather_rows(const RowMatrixXd& reference, const std::vector<NeighborHit>& hits) {
  MatrixXd out(static_cast<Eigen::Index>(hits.size()), reference.cols());
  for (std::size_t i = 0; i < hits.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = reference.row(hits[i].index);
  return out;
}

IcpRun run_icp(const MatrixXd& points, const NearestReference& nn, const MatrixXd& start, int max_iterations,
               double tolerance) {
  IcpRun run;
  run.rotation = start;
  auto hits = nn.query_all(points * run.rotation);
  run.rms = rms_of(hits);
  run.history.push_back(run.rms);
  for (int it = 1; it <= max_iterations; ++it) {
    run.iterations = it;
    const MatrixXd next = procrustes_transform(points, gather_rows(nn.reference(), hits));
    auto next_hits = nn.query_all(points * next);
    const double next_rms = rms_of(next_hits);
    if (next_rms > run.rms) {
      // Only rounding can raise the objective; the previous transform is the fixed point.
      run.converged = true;
      break;
    }
    const double gain = run.rms - next_rms;
    run.rotation = next;
    hits = std::move(next_hits);
    run.rms = next_rms;
    run.history.push_back(next_rms);
    if (gain < tolerance) {
      run.converged = true;
      break;
    }
  }
  return run;
}

std::vector<MatrixXd> candidate_starts(const MatrixXd& moving, const MatrixXd& reference) {
  const int d = static_cast<int>(moving.cols());
  std::vector<MatrixXd> starts;
  std::vector<VectorXd> signs;
  if (d <= 4) {
    for (int mask = 0; mask < (1 << d); ++mask) {
      VectorXd s(d);
      for (int c = 0; c < d; ++c) s[c] = (mask >> c) & 1 ? -1.0 : 1.0;
      signs.push_back(s);
    }
  } else {
    signs.push_back(VectorXd::Ones(d));
  }
  for (const auto& s : signs) starts.push_back(s.asDiagonal().toDenseMatrix());

  // Principal axes of the uncentered second moments, matched by rank.
  Eigen::SelfAdjointEigenSolver<MatrixXd> em(moving.transpose() * moving);
  Eigen::SelfAdjointEigenSolver<MatrixXd> er(reference.transpose() * reference);
  for (const auto& s : signs) starts.push_back(em.eigenvectors() * s.asDiagonal() * er.eigenvectors().transpose());
  return starts;
}

}  // namespace

AlignedEmbedding icp_align(const SpectralEmbedding& moving, const SpectralEmbedding& reference,
                           const IcpOptions& options) {
  if (moving.dim() != reference.dim()) {
    throw UsageError("cannot align a " + std::to_string(moving.dim()) + "-d embedding to a " +
                     std::to_string(reference.dim()) + "-d reference");
  }
  if (moving.num_nodes() == 0 || reference.num_nodes() == 0) throw UsageError("empty embedding");
  const int d = moving.dim();
  const MatrixXd& points = moving.coordinates;
  const NearestReference nn(reference.coordinates);

  AlignmentResult result;
  result.initial_rms_distance = rms_of(nn.query_all(points));

  MatrixXd start = MatrixXd::Identity(d, d);
  IcpRun best;
  bool have_best = false;
  if (options.multi_start) {
    const Eigen::Index n = points.rows();
    const Eigen::Index stride = std::max<Eigen::Index>(1, (n + options.screening_points - 1) / options.screening_points);
    const bool subsampled = stride > 1;
    MatrixXd sample(subsampled ? (n + stride - 1) / stride : n, d);
    for (Eigen::Index i = 0; i < sample.rows(); ++i) sample.row(i) = points.row(i * stride);
    const int screen_iters = subsampled ? options.screening_iterations : options.max_iterations;
    for (const auto& candidate : candidate_starts(points, reference.coordinates)) {
      IcpRun run = run_icp(sample, nn, candidate, screen_iters, options.tolerance);
      if (!have_best || run.rms < best.rms) {
        best = std::move(run);
        have_best = true;
      }
    }
    if (subsampled) {
      start = best.rotation;
      have_best = false;
    }
  }
  if (!have_best) best = run_icp(points, nn, start, options.max_iterations, options.tolerance);

  result.rotation = best.rotation;
  result.rms_distance = best.rms;
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.history = std::move(best.history);
  return {result, apply_transform(moving, result.rotation)};
}

void write_alignment_json(const std::filesystem::path& path, const AlignmentResult& result) {
  nlohmann::ordered_json j;
  const auto d = result.rotation.rows();
  j["d"] = d;
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) flat.push_back(result.rotation(r, c));
  }
  j["rotation"] = flat;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["rms_distance"] = result.rms_distance;
  j["initial_rms_distance"] = result.initial_rms_distance;
  write_text_file_atomic(path, j.dump(2) + "\n");
}

AlignmentResult read_alignment_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  AlignmentResult r;
  const int d = j.at("d").get<int>();
  const auto flat = j.at("rotation").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != d * d) throw DataError(path.string() + ": rotation is not d x d");
  r.rotation.resize(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) r.rotation(a, b) = flat[static_cast<std::size_t>(a * d + b)];
  }
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.rms_distance = j.at("rms_distance").get<double>();
  r.initial_rms_distance = j.value("initial_rms_distance", 0.0);
  return r;
}

}  // namespace csg
