#pragma once

#include <cmath>

#include "csg/types.hpp"

namespace csg {

// Plain left-to-right sum; vectorized reductions reorder by buffer alignment.
template <typename Derived>
double sequential_mean(const Eigen::MatrixBase<Derived>& values) {
  if (values.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) sum += values(i);
  return sum / static_cast<double>(values.size());
}

/// Population standard deviation, two-pass.
template <typename Derived>
double population_std(const Eigen::MatrixBase<Derived>& values) {
  if (values.size() == 0) return 0.0;
  const double mean = sequential_mean(values);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) ss += (values(i) - mean) * (values(i) - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

/// Zero mean, unit population variance; a constant channel maps to all zeros.
template <typename Derived>
VectorXd z_score(const Eigen::MatrixBase<Derived>& values) {
  const double mean = sequential_mean(values);
  const double sd = population_std(values);
  if (!(sd > 0.0)) return VectorXd::Zero(values.size());
  return ((values.array() - mean) / sd).matrix();
}

}  // namespace csg
