#include "csg/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csg/error.hpp"
#include "csg/gconv.hpp"
#include "csg/maxflow.hpp"

namespace csg {

MrfProblem make_mrf_problem(const MatrixXd& probabilities, std::vector<Edge> edges, double lambda) {
  if (!(lambda >= 0.0)) throw UsageError("Potts weight must be non-negative");
  MrfProblem problem;
  problem.unary = probabilities.unaryExpr([](double p) { return -std::log(std::max(p, kProbabilityFloor)); });
  problem.unary = problem.unary.cwiseMax(0.0);
  if (!problem.unary.allFinite()) throw DataError("probabilities contain non-finite values");
  problem.edges = std::move(edges);
  problem.lambda = lambda;
  return problem;
}

double mrf_energy(const VectorXi& labels, const MrfProblem& problem) {
  if (labels.size() != problem.num_nodes()) throw UsageError("labelling size does not match the MRF");
  double energy = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= problem.num_labels()) {
      throw UsageError("label " + std::to_string(labels[i]) + " out of range at node " + std::to_string(i));
    }
    energy += problem.unary(i, labels[i]);
  }
  long cut = 0;
  for (const auto& [a, b] : problem.edges) cut += labels[a] != labels[b];
  return energy + problem.lambda * static_cast<double>(cut);
}

VectorXi unary_argmin(const MrfProblem& problem) {
  VectorXi labels(problem.num_nodes());
  for (int i = 0; i < problem.num_nodes(); ++i) {
    Eigen::Index arg = 0;
    problem.unary.row(i).minCoeff(&arg);
    labels[i] = static_cast<int>(arg);
  }
  return labels;
}

namespace {

// Binary subproblem: x_i = 0 keeps the current label (source side), x_i = 1 switches to alpha.
VectorXi expansion_move(const MrfProblem& problem, const VectorXi& labels, int alpha) {
  const int n = problem.num_nodes();
  const double lambda = problem.lambda;
  std::vector<double> cost0(static_cast<std::size_t>(n)), cost1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cost0[i] = problem.unary(i, labels[i]);
    cost1[i] = problem.unary(i, alpha);
  }
  MaxFlow flow(n);
  for (const auto& [i, j] : problem.edges) {
    const double a = lambda * (labels[i] != labels[j]);
    const double b = lambda * (labels[i] != alpha);
    const double c = lambda * (alpha != labels[j]);
    // E(x_i, x_j) = a + (c - a) x_i + (0 - c) x_j + (b + c - a)(1 - x_i) x_j
    cost1[i] += c - a;
    cost1[j] -= c;
    const double coupling = b + c - a;
    if (coupling > 0.0) flow.add_edge(i, j, coupling);
  }
  for (int i = 0; i < n; ++i) {
    // Cutting source->i pays for x_i = 1; cutting i->sink pays for x_i = 0.
    if (cost1[i] > cost0[i]) {
      flow.add_terminal(i, cost1[i] - cost0[i], 0.0);
    } else if (cost0[i] > cost1[i]) {
      flow.add_terminal(i, 0.0, cost0[i] - cost1[i]);
    }
  }
  const double value = flow.solve();
  const double cut = flow.cut_value();
  if (std::abs(cut - value) > 1e-9 * (1.0 + std::abs(value))) {
    throw NumericalError("min-cut self-check failed: cut " + std::to_string(cut) + " vs flow " + std::to_string(value));
  }
  VectorXi next = labels;
  for (int i = 0; i < n; ++i) {
    if (!flow.on_source_side(i)) next[i] = alpha;
  }
  return next;
}

}  // namespace

ExpansionResult alpha_expansion(const MrfProblem& problem, const VectorXi& init, int max_cycles) {
  ExpansionResult result;
  result.labels = init;
  result.energy = mrf_energy(init, problem);
  result.initial_energy = result.energy;
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    result.cycles = cycle + 1;
    bool changed = false;
    for (int alpha = 0; alpha < problem.num_labels(); ++alpha) {
      VectorXi candidate = expansion_move(problem, result.labels, alpha);
      if (candidate == result.labels) continue;
      const double energy = mrf_energy(candidate, problem);
      // Accept strict improvements only; equal-energy moves could cycle.
      if (energy < result.energy - 1e-12 * (1.0 + std::abs(result.energy))) {
        result.labels = std::move(candidate);
        result.energy = energy;
        result.accepted_energies.push_back(energy);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return result;
}

}  // namespace csg
