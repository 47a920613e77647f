#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "coprop/common.hpp"

namespace coprop {

// Binary pairwise MRF over labels y in {-1,+1}. Label index 0 is y=-1
// (background), index 1 is y=+1 (foreground). Counting numbers weight the
// entropy terms of the variational program.
struct MrfNode {
  std::array<double, 2> theta{0.0, 0.0};
  double c = 1.0;
};

struct MrfEdge {
  int a = -1, b = -1;  // node indexes, a < b
  std::array<std::array<double, 2>, 2> theta{{{0.0, 0.0}, {0.0, 0.0}}};  // [y_a][y_b]
  double c = 1.0;
};

struct BinaryMrf {
  std::vector<MrfNode> nodes;
  std::vector<MrfEdge> edges;

  int add_node(double theta_bg, double theta_fg, double c = 1.0);
  // attractive potential weight * y_a * y_b
  void add_attractive_edge(int a, int b, double weight, double c = 1.0);
  void add_edge(int a, int b, const std::array<std::array<double, 2>, 2>& theta, double c = 1.0);
  std::vector<int> degrees() const;
  bool is_forest() const;
};

struct BeliefState {
  std::vector<std::array<double, 2>> singleton;               // per node
  std::vector<std::array<std::array<double, 2>, 2>> pairwise;  // per edge, [y_a][y_b]

  double fg(int node) const { return singleton[node][1]; }
};

// Linear terms plus c-weighted Shannon entropies (natural log, 0 log 0 = 0).
double variational_objective(const BinaryMrf& mrf, const BeliefState& beliefs);

// Largest violation of the edge->node marginalization constraints.
double marginalization_residual(const BinaryMrf& mrf, const BeliefState& beliefs);

enum class SolveMode {
  Concave,    // requires all c_i > 0 and c_ij > 0; objective ascends every sweep
  BetheTree,  // requires a forest with c_ij = 1, c_i = 1 - deg(i); beliefs are exact marginals
};

struct SolveOptions {
  SolveMode mode = SolveMode::Concave;
  double tolerance = 1e-8;  // max singleton change per sweep
  int max_sweeps = 2000;
  // initial foreground beliefs per node (concave mode warm start)
  std::optional<std::vector<double>> init_fg;
  // called after each sweep with (sweep, objective, residual)
  std::function<void(int, double, double)> trace;
};

struct SolveResult {
  BeliefState beliefs;
  bool converged = false;
  int sweeps = 0;
  double objective = 0.0;
};

// Deterministic solver for the variational program. Concave mode performs
// exact per-node block maximization in sweeps over sorted nodes, so the
// objective is non-decreasing and, with positive counting numbers, the unique
// optimum is reached. BetheTree mode runs sum-product message passing.
SolveResult cbp_solve(const BinaryMrf& mrf, const SolveOptions& options = {});

// Cross-image coupling edges; node addressing is (image index, node index).
struct CouplingEdge {
  int image_a = -1, node_a = -1;
  int image_b = -1, node_b = -1;
  double weight = 0.0;
};

struct CouplingGraph {
  std::vector<int> nodes_per_image;
  std::vector<CouplingEdge> edges;

  int total_nodes() const;
  int flat(int image, int node) const;
};

enum class CouplingBound { MaxWeightedDegree, SpectralRadius };

struct Certificate {
  bool ok = false;
  double lambda_max = 0.0;           // power-iteration estimate
  double max_weighted_degree = 0.0;  // simpler upper bound
  CouplingBound bound_kind = CouplingBound::MaxWeightedDegree;
  double bound_used = 0.0;
  double min_node_c = 0.0;
  double min_edge_c = 0.0;
};

// Spectral radius of the weighted coupling adjacency by shifted power
// iteration (50 iterations or relative change < 1e-10).
double coupling_lambda_max(const CouplingGraph& coupling);
double coupling_max_weighted_degree(const CouplingGraph& coupling);

// ok iff every c_i exceeds the selected bound and every c_ij is positive.
Certificate concavity_certificate(const CouplingGraph& coupling,
                                  const std::vector<BinaryMrf>& mrfs,
                                  CouplingBound bound = CouplingBound::MaxWeightedDegree);

struct ExtendedOptions {
  double tolerance = 1e-8;  // objective change between rounds
  int max_rounds = 100;
  SolveOptions inner;
  CouplingBound bound = CouplingBound::MaxWeightedDegree;
  double lift_epsilon = 0.01;
  bool auto_lift = true;           // raise c_i to max(1, (1+eps)*bound)
  bool enforce_certificate = true;  // throw when the certificate is violated
};

struct ExtendedResult {
  std::vector<BeliefState> beliefs;
  bool converged = false;
  int rounds = 0;
  double objective = 0.0;
  Certificate certificate;
  double lifted_c = 0.0;  // node counting-number floor actually used
};

// Extended program value: per-image variational objectives plus the quadratic
// same-label coupling reward sum_{E_b} w * sum_y b_i(y) b_j(y).
double extended_objective(const std::vector<BinaryMrf>& mrfs, const CouplingGraph& coupling,
                          const std::vector<BeliefState>& beliefs);

// Block coordinate ascent across images: each round re-solves every image with
// neighbour beliefs folded into its local potentials. Requires the certificate
// (after any auto-lift) unless enforcement is disabled.
ExtendedResult extended_solve(std::vector<BinaryMrf> mrfs, const CouplingGraph& coupling,
                              const ExtendedOptions& options = {},
                              const std::vector<BeliefState>* init = nullptr);

// Exhaustive Gibbs marginals over the union graph (<= 20 nodes). Coupling
// edges enter the energy as w * y_i * y_j.
std::vector<std::array<double, 2>> exact_marginals(const BinaryMrf& mrf);
std::vector<std::vector<std::array<double, 2>>> exact_marginals(
    const std::vector<BinaryMrf>& mrfs, const CouplingGraph& coupling);

}  // namespace coprop
