#pragma once

#include <span>
#include <vector>

#include "coprop/potentials.hpp"

namespace coprop {

// Submodular binary labeling problem: nonnegative unaries plus symmetric
// nonnegative Potts weights, so s-t min-cut is exact.
struct CutProblem {
  std::vector<double> cost_f;  // paid when the part is labeled foreground
  std::vector<double> cost_b;
  struct Edge {
    int a = -1, b = -1;
    double weight = 0.0;  // paid when the endpoints disagree
  };
  std::vector<Edge> edges;
};

inline constexpr double kPinCost = 1e9;  // surrogate for a forbidden label

// cost_f = 1 - L, cost_b = L, edge weight = lambda_pairwise * intra weight.
// `pinned` (optional, entries -1/0/1) forces labels via kPinCost surrogates.
CutProblem build_cut_problem(std::span<const double> likelihoods,
                             std::span<const PairwisePotential> intra_potentials,
                             double lambda_pairwise, std::span<const int> pinned = {});

// Energy of a labeling, evaluated in canonical order (parts then edges).
double cut_energy(const CutProblem& problem, std::span<const int> labels);

struct MinCutResult {
  std::vector<int> labels;  // 1 = foreground
  double energy = 0.0;      // cut_energy of `labels`
  double flow = 0.0;        // max-flow value; equals energy up to roundoff
};

// Global minimizer of the cut energy; ties resolve toward background.
MinCutResult min_cut(const CutProblem& problem);

}  // namespace coprop
