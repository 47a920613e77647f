#include "coprop/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace coprop {

CutProblem build_cut_problem(std::span<const double> likelihoods,
                             std::span<const PairwisePotential> intra_potentials,
                             double lambda_pairwise, std::span<const int> pinned) {
  CutProblem problem;
  problem.cost_f.resize(likelihoods.size());
  problem.cost_b.resize(likelihoods.size());
  for (std::size_t i = 0; i < likelihoods.size(); ++i) {
    const double l = likelihoods[i];
    if (l < 0.0 || l > 1.0) throw validation_error("likelihood outside [0,1]");
    problem.cost_f[i] = 1.0 - l;
    problem.cost_b[i] = l;
    if (!pinned.empty() && pinned[i] >= 0) {
      if (pinned[i] == 1)
        problem.cost_b[i] = kPinCost;
      else
        problem.cost_f[i] = kPinCost;
    }
  }
  for (const auto& pot : intra_potentials) {
    const double w = lambda_pairwise * pot.weight;
    if (w < 0.0) throw validation_error("negative pairwise cut weight");
    if (w > 0.0) problem.edges.push_back({pot.part_i, pot.part_j, w});
  }
  return problem;
}

double cut_energy(const CutProblem& problem, std::span<const int> labels) {
  double energy = 0.0;
  for (std::size_t i = 0; i < problem.cost_f.size(); ++i)
    energy += labels[i] ? problem.cost_f[i] : problem.cost_b[i];
  for (const auto& e : problem.edges)
    if (labels[e.a] != labels[e.b]) energy += e.weight;
  return energy;
}

namespace {

// Dinic's algorithm on an adjacency-list residual graph.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : head_(nodes, -1), level_(nodes), iter_(nodes) {}

  void add_edge(int from, int to, double cap_fwd, double cap_bwd) {
    arcs_.push_back({to, head_[from], cap_fwd});
    head_[from] = int(arcs_.size()) - 1;
    arcs_.push_back({from, head_[to], cap_bwd});
    head_[to] = int(arcs_.size()) - 1;
  }

  double run(int s, int t) {
    double total = 0.0;
    while (bfs(s, t)) {
      iter_ = head_;
      while (true) {
        const double pushed = dfs(s, t, std::numeric_limits<double>::infinity());
        if (pushed <= 0.0) break;
        total += pushed;
      }
    }
    return total;
  }

  // nodes reachable from s in the residual graph (the minimal source side)
  std::vector<char> source_side(int s) const {
    std::vector<char> seen(head_.size(), 0);
    std::deque<int> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int a = head_[u]; a != -1; a = arcs_[a].next)
        if (arcs_[a].cap > kEps && !seen[arcs_[a].to]) {
          seen[arcs_[a].to] = 1;
          queue.push_back(arcs_[a].to);
        }
    }
    return seen;
  }

 private:
  static constexpr double kEps = 1e-11;

  struct Arc {
    int to;
    int next;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::deque<int> queue{s};
    level_[s] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int a = head_[u]; a != -1; a = arcs_[a].next)
        if (arcs_[a].cap > kEps && level_[arcs_[a].to] < 0) {
          level_[arcs_[a].to] = level_[u] + 1;
          queue.push_back(arcs_[a].to);
        }
    }
    return level_[t] >= 0;
  }

  double dfs(int u, int t, double limit) {
    if (u == t) return limit;
    for (int& a = iter_[u]; a != -1; a = arcs_[a].next) {
      Arc& arc = arcs_[a];
      if (arc.cap <= kEps || level_[arc.to] != level_[u] + 1) continue;
      const double pushed = dfs(arc.to, t, std::min(limit, arc.cap));
      if (pushed > 0.0) {
        arc.cap -= pushed;
        arcs_[a ^ 1].cap += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<Arc> arcs_;
  std::vector<int> head_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

}  // namespace

MinCutResult min_cut(const CutProblem& problem) {
  const int n = int(problem.cost_f.size());
  const int s = n, t = n + 1;
  MaxFlow flow(n + 2);
  for (int i = 0; i < n; ++i) {
    // source side = foreground: the cut pays cost_f via i->t, cost_b via s->i
    flow.add_edge(s, i, problem.cost_b[i], 0.0);
    flow.add_edge(i, t, problem.cost_f[i], 0.0);
  }
  for (const auto& e : problem.edges) flow.add_edge(e.a, e.b, e.weight, e.weight);

  MinCutResult result;
  result.flow = flow.run(s, t);
  const auto side = flow.source_side(s);
  result.labels.resize(n);
  for (int i = 0; i < n; ++i) result.labels[i] = side[i] ? 1 : 0;
  result.energy = cut_energy(problem, result.labels);
  return result;
}

}  // namespace coprop
