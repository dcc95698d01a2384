#pragma once

#include <vector>

#include "csg/mesh.hpp"

namespace csg {

/// Unary costs -log p (floored) plus an unweighted Potts term over mesh edges.
struct MrfProblem {
  MatrixXd unary;           // N x C, finite and >= 0
  std::vector<Edge> edges;  // each undirected edge once
  double lambda = 0.0;

  int num_nodes() const { return static_cast<int>(unary.rows()); }
  int num_labels() const { return static_cast<int>(unary.cols()); }
};

MrfProblem make_mrf_problem(const MatrixXd& probabilities, std::vector<Edge> edges, double lambda);

/// sum_i unary(i, l_i) + lambda * #{edges with differing labels}.
double mrf_energy(const VectorXi& labels, const MrfProblem& problem);

/// Per-node label of least unary cost (lowest index on ties).
VectorXi unary_argmin(const MrfProblem& problem);

struct ExpansionResult {
  VectorXi labels;
  double energy = 0.0;
  double initial_energy = 0.0;
  /// Energy after every accepted move, in order.
  std::vector<double> accepted_energies;
  int cycles = 0;
};

/// Alpha-expansion over labels in ascending order, each move an exact binary min-cut.
/// Stops after a full cycle without an accepted move. Throws NumericalError when a subproblem's
/// cut value and flow value disagree.
ExpansionResult alpha_expansion(const MrfProblem& problem, const VectorXi& init, int max_cycles = 100);

}  // namespace csg
