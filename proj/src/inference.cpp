#include "coprop/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace coprop {

namespace {

constexpr double kQMin = 1e-12;  // beliefs are kept strictly interior

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double entropy2(double q) { return -xlogx(q) - xlogx(1.0 - q); }

// Optimal joint b(+,+) of one edge for fixed marginals qa, qb: the unique
// root of the edge subproblem's derivative inside the Frechet interval.
double edge_coupling(const MrfEdge& e, double qa, double qb) {
  const double lo = std::max(0.0, qa + qb - 1.0);
  const double hi = std::min(qa, qb);
  if (hi - lo <= 1e-300) return 0.5 * (lo + hi);
  const double t = (e.theta[1][1] + e.theta[0][0] - e.theta[1][0] - e.theta[0][1]) / e.c;
  double p;
  if (std::abs(t) > 500.0) {
    p = t > 0 ? hi : lo;  // optimum is within one ulp of the interval end
  } else {
    const double km1 = std::expm1(t);
    const double kappa = km1 + 1.0;
    const double b = km1 * (qa + qb) + 1.0;
    const double disc = std::max(b * b - 4.0 * kappa * km1 * qa * qb, 0.0);
    p = 2.0 * kappa * qa * qb / (b + std::sqrt(disc));
  }
  const double margin = (hi - lo) * 1e-12;
  p = std::clamp(p, lo + margin, hi - margin);
  // Newton polish on phi(p) = t + log((qa-p)(qb-p)) - log(p(1-qa-qb+p))
  for (int it = 0; it < 2; ++it) {
    const double c00 = 1.0 - qa - qb + p, c10 = qa - p, c01 = qb - p;
    const double phi = t + std::log(c10) + std::log(c01) - std::log(p) - std::log(c00);
    const double dphi = -1.0 / c10 - 1.0 / c01 - 1.0 / p - 1.0 / c00;
    p = std::clamp(p - phi / dphi, lo + margin, hi - margin);
  }
  return p;
}

// Derivative of the edge subproblem's optimal value with respect to the
// marginal of `endpoint` (0 = node a, 1 = node b), by Danskin's theorem.
double edge_marginal_grad(const MrfEdge& e, int endpoint, double qa, double qb) {
  const double p = edge_coupling(e, qa, qb);
  const double c00 = 1.0 - qa - qb + p;
  if (endpoint == 0) return e.theta[1][0] - e.theta[0][0] + e.c * std::log(c00 / (qa - p));
  return e.theta[0][1] - e.theta[0][0] + e.c * std::log(c00 / (qb - p));
}

std::array<std::array<double, 2>, 2> joint_from(double qa, double qb, double p) {
  return {{{1.0 - qa - qb + p, qb - p}, {qa - p, p}}};
}

double edge_value(const MrfEdge& e, double qa, double qb) {
  const double p = edge_coupling(e, qa, qb);
  const auto joint = joint_from(qa, qb, p);
  double v = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) v += joint[a][b] * e.theta[a][b] - e.c * xlogx(joint[a][b]);
  return v;
}

}  // namespace

int BinaryMrf::add_node(double theta_bg, double theta_fg, double c) {
  nodes.push_back({{theta_bg, theta_fg}, c});
  return int(nodes.size()) - 1;
}

void BinaryMrf::add_attractive_edge(int a, int b, double weight, double c) {
  add_edge(a, b, {{{weight, -weight}, {-weight, weight}}}, c);
}

void BinaryMrf::add_edge(int a, int b, const std::array<std::array<double, 2>, 2>& theta,
                         double c) {
  if (a == b || a < 0 || b < 0 || a >= int(nodes.size()) || b >= int(nodes.size()))
    throw validation_error("invalid MRF edge endpoints");
  MrfEdge e;
  if (a < b) {
    e.a = a;
    e.b = b;
    e.theta = theta;
  } else {
    e.a = b;
    e.b = a;
    e.theta = {{{theta[0][0], theta[1][0]}, {theta[0][1], theta[1][1]}}};
  }
  e.c = c;
  edges.push_back(e);
}

std::vector<int> BinaryMrf::degrees() const {
  std::vector<int> deg(nodes.size(), 0);
  for (const auto& e : edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

bool BinaryMrf::is_forest() const {
  std::vector<int> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& e : edges) {
    int ra = find(e.a), rb = find(e.b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

double variational_objective(const BinaryMrf& mrf, const BeliefState& beliefs) {
  double obj = 0.0;
  for (int i = 0; i < int(mrf.nodes.size()); ++i) {
    const auto& b = beliefs.singleton[i];
    obj += b[0] * mrf.nodes[i].theta[0] + b[1] * mrf.nodes[i].theta[1];
    obj -= mrf.nodes[i].c * (xlogx(b[0]) + xlogx(b[1]));
  }
  for (int k = 0; k < int(mrf.edges.size()); ++k) {
    const auto& e = mrf.edges[k];
    const auto& b = beliefs.pairwise[k];
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < 2; ++y) obj += b[a][y] * e.theta[a][y] - e.c * xlogx(b[a][y]);
  }
  return obj;
}

double marginalization_residual(const BinaryMrf& mrf, const BeliefState& beliefs) {
  double worst = 0.0;
  for (int k = 0; k < int(mrf.edges.size()); ++k) {
    const auto& e = mrf.edges[k];
    const auto& b = beliefs.pairwise[k];
    for (int y = 0; y < 2; ++y) {
      worst = std::max(worst, std::abs(b[y][0] + b[y][1] - beliefs.singleton[e.a][y]));
      worst = std::max(worst, std::abs(b[0][y] + b[1][y] - beliefs.singleton[e.b][y]));
    }
  }
  return worst;
}

namespace {

struct Incidence {
  int edge = -1;
  int endpoint = -1;  // 0 when the node is edge.a
};

// Exact maximizer of the node block: the root of the (strictly decreasing)
// derivative of the reduced objective in the node's foreground mass.
double node_update(const BinaryMrf& mrf, const std::vector<Incidence>& incident,
                   const std::vector<double>& q, int i) {
  auto grad = [&](double qi) {
    double g = mrf.nodes[i].theta[1] - mrf.nodes[i].theta[0] +
               mrf.nodes[i].c * (std::log(1.0 - qi) - std::log(qi));
    for (const auto& inc : incident) {
      const auto& e = mrf.edges[inc.edge];
      const double qo = q[inc.endpoint == 0 ? e.b : e.a];
      g += inc.endpoint == 0 ? edge_marginal_grad(e, 0, qi, qo)
                             : edge_marginal_grad(e, 1, qo, qi);
    }
    return g;
  };
  double lo = kQMin, hi = 1.0 - kQMin;
  if (grad(lo) <= 0.0) return lo;
  if (grad(hi) >= 0.0) return hi;
  for (int it = 0; it < 70; ++it) {
    const double mid = 0.5 * (lo + hi);
    (grad(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

BeliefState beliefs_from_q(const BinaryMrf& mrf, const std::vector<double>& q) {
  BeliefState out;
  out.singleton.resize(mrf.nodes.size());
  for (int i = 0; i < int(mrf.nodes.size()); ++i) out.singleton[i] = {1.0 - q[i], q[i]};
  out.pairwise.resize(mrf.edges.size());
  for (int k = 0; k < int(mrf.edges.size()); ++k) {
    const auto& e = mrf.edges[k];
    out.pairwise[k] = joint_from(q[e.a], q[e.b], edge_coupling(e, q[e.a], q[e.b]));
  }
  return out;
}

double reduced_objective(const BinaryMrf& mrf, const std::vector<double>& q) {
  double obj = 0.0;
  for (int i = 0; i < int(mrf.nodes.size()); ++i)
    obj += q[i] * mrf.nodes[i].theta[1] + (1.0 - q[i]) * mrf.nodes[i].theta[0] +
           mrf.nodes[i].c * entropy2(q[i]);
  for (const auto& e : mrf.edges) obj += edge_value(e, q[e.a], q[e.b]);
  return obj;
}

SolveResult solve_concave(const BinaryMrf& mrf, const SolveOptions& options) {
  for (const auto& n : mrf.nodes)
    if (!(n.c > 0.0)) throw validation_error("concave mode requires positive node counting numbers");
  for (const auto& e : mrf.edges)
    if (!(e.c > 0.0)) throw validation_error("concave mode requires positive edge counting numbers");

  const int n = int(mrf.nodes.size());
  std::vector<std::vector<Incidence>> incident(n);
  for (int k = 0; k < int(mrf.edges.size()); ++k) {
    incident[mrf.edges[k].a].push_back({k, 0});
    incident[mrf.edges[k].b].push_back({k, 1});
  }

  std::vector<double> q(n, 0.5);
  if (options.init_fg) {
    if (int(options.init_fg->size()) != n)
      throw validation_error("initial beliefs have wrong size");
    for (int i = 0; i < n; ++i) q[i] = std::clamp((*options.init_fg)[i], kQMin, 1.0 - kQMin);
  }

  SolveResult result;
  double prev_obj = reduced_objective(mrf, q);
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      const double next = node_update(mrf, incident[i], q, i);
      residual = std::max(residual, std::abs(next - q[i]));
      q[i] = next;
    }
    const double obj = reduced_objective(mrf, q);
    if (obj < prev_obj - 1e-9 * (1.0 + std::abs(prev_obj)))
      throw std::logic_error("variational objective decreased in concave mode");
    prev_obj = obj;
    if (options.trace) options.trace(sweep, obj, residual);
    result.sweeps = sweep;
    if (residual < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.beliefs = beliefs_from_q(mrf, q);
  result.objective = prev_obj;
  return result;
}

SolveResult solve_bethe_tree(const BinaryMrf& mrf, const SolveOptions& options) {
  if (!mrf.is_forest()) throw validation_error("Bethe mode requires a forest");
  const auto deg = mrf.degrees();
  for (int i = 0; i < int(mrf.nodes.size()); ++i)
    if (std::abs(mrf.nodes[i].c - (1.0 - deg[i])) > 1e-12)
      throw validation_error("Bethe mode requires c_i = 1 - |N(i)|");
  for (const auto& e : mrf.edges)
    if (std::abs(e.c - 1.0) > 1e-12) throw validation_error("Bethe mode requires c_ij = 1");

  const int n = int(mrf.nodes.size());
  const int m = int(mrf.edges.size());
  // message[2k] flows a->b of edge k, message[2k+1] flows b->a
  std::vector<std::array<double, 2>> message(2 * m, {0.5, 0.5});
  std::vector<std::vector<std::pair<int, int>>> in_messages(n);  // (message idx, edge idx)
  for (int k = 0; k < m; ++k) {
    in_messages[mrf.edges[k].b].push_back({2 * k, k});
    in_messages[mrf.edges[k].a].push_back({2 * k + 1, k});
  }

  auto pre_message = [&](int node, int skip_edge, int y) {
    double v = std::exp(mrf.nodes[node].theta[y]);
    for (auto [mi, ek] : in_messages[node])
      if (ek != skip_edge) v *= message[mi][y];
    return v;
  };

  SolveResult result;
  double residual = 1.0;
  for (int sweep = 1; sweep <= std::max(options.max_sweeps, 2 * (n + 1)); ++sweep) {
    residual = 0.0;
    for (int k = 0; k < m; ++k) {
      const auto& e = mrf.edges[k];
      for (int dir = 0; dir < 2; ++dir) {
        const int from = dir == 0 ? e.a : e.b;
        std::array<double, 2> next{0.0, 0.0};
        for (int y_to = 0; y_to < 2; ++y_to)
          for (int y_from = 0; y_from < 2; ++y_from) {
            const double th = dir == 0 ? e.theta[y_from][y_to] : e.theta[y_to][y_from];
            next[y_to] += std::exp(th) * pre_message(from, k, y_from);
          }
        const double z = next[0] + next[1];
        next[0] /= z;
        next[1] /= z;
        auto& slot = message[2 * k + dir];
        residual = std::max({residual, std::abs(next[0] - slot[0]), std::abs(next[1] - slot[1])});
        slot = next;
      }
    }
    result.sweeps = sweep;
    if (residual < 1e-15) {
      result.converged = true;
      break;
    }
  }

  result.beliefs.singleton.resize(n);
  for (int i = 0; i < n; ++i) {
    std::array<double, 2> b{pre_message(i, -1, 0), pre_message(i, -1, 1)};
    const double z = b[0] + b[1];
    result.beliefs.singleton[i] = {b[0] / z, b[1] / z};
  }
  result.beliefs.pairwise.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto& e = mrf.edges[k];
    auto& joint = result.beliefs.pairwise[k];
    double z = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        joint[a][b] = std::exp(e.theta[a][b]) * pre_message(e.a, k, a) * pre_message(e.b, k, b);
        z += joint[a][b];
      }
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) joint[a][b] /= z;
  }
  result.objective = variational_objective(mrf, result.beliefs);
  if (options.trace) options.trace(result.sweeps, result.objective, residual);
  return result;
}

}  // namespace

SolveResult cbp_solve(const BinaryMrf& mrf, const SolveOptions& options) {
  if (mrf.nodes.empty()) return {.beliefs = {}, .converged = true, .sweeps = 0, .objective = 0.0};
  return options.mode == SolveMode::Concave ? solve_concave(mrf, options)
                                            : solve_bethe_tree(mrf, options);
}

int CouplingGraph::total_nodes() const {
  int total = 0;
  for (int c : nodes_per_image) total += c;
  return total;
}

int CouplingGraph::flat(int image, int node) const {
  int base = 0;
  for (int i = 0; i < image; ++i) base += nodes_per_image[i];
  return base + node;
}

namespace {

void validate_coupling(const CouplingGraph& coupling) {
  const int images = int(coupling.nodes_per_image.size());
  for (const auto& e : coupling.edges) {
    if (e.image_a == e.image_b) throw validation_error("coupling edge within one image");
    if (e.image_a < 0 || e.image_a >= images || e.image_b < 0 || e.image_b >= images ||
        e.node_a < 0 || e.node_a >= coupling.nodes_per_image[e.image_a] || e.node_b < 0 ||
        e.node_b >= coupling.nodes_per_image[e.image_b])
      throw validation_error("coupling edge endpoint out of range");
    if (e.weight < 0.0) throw validation_error("negative coupling weight");
  }
}

}  // namespace

double coupling_lambda_max(const CouplingGraph& coupling) {
  validate_coupling(coupling);
  const int n = coupling.total_nodes();
  if (n == 0 || coupling.edges.empty()) return 0.0;
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : coupling.edges) {
    const int u = coupling.flat(e.image_a, e.node_a);
    const int v = coupling.flat(e.image_b, e.node_b);
    adj[u].push_back({v, e.weight});
    adj[v].push_back({u, e.weight});
  }
  // Power iteration on A + I; the shift makes the top eigenvalue strictly
  // dominant even for bipartite couplings.
  std::vector<double> x(n, 1.0), ax(n);
  double estimate = 0.0;
  for (int it = 0; it < 50; ++it) {
    for (int i = 0; i < n; ++i) {
      ax[i] = 0.0;
      for (auto [j, w] : adj[i]) ax[i] += w * x[j];
    }
    double xax = 0.0, xx = 0.0;
    for (int i = 0; i < n; ++i) {
      xax += x[i] * ax[i];
      xx += x[i] * x[i];
    }
    const double next = xax / xx;
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += ax[i];  // (A + I) x
      norm += x[i] * x[i];
    }
    norm = std::sqrt(norm);
    for (auto& v : x) v /= norm;
    if (it > 0 && std::abs(next - estimate) < 1e-10 * std::max(1.0, std::abs(next))) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

double coupling_max_weighted_degree(const CouplingGraph& coupling) {
  validate_coupling(coupling);
  const int n = coupling.total_nodes();
  std::vector<double> deg(n, 0.0);
  for (const auto& e : coupling.edges) {
    deg[coupling.flat(e.image_a, e.node_a)] += e.weight;
    deg[coupling.flat(e.image_b, e.node_b)] += e.weight;
  }
  double worst = 0.0;
  for (double d : deg) worst = std::max(worst, d);
  return worst;
}

Certificate concavity_certificate(const CouplingGraph& coupling,
                                  const std::vector<BinaryMrf>& mrfs, CouplingBound bound) {
  Certificate cert;
  cert.lambda_max = coupling_lambda_max(coupling);
  cert.max_weighted_degree = coupling_max_weighted_degree(coupling);
  cert.bound_kind = bound;
  cert.bound_used =
      bound == CouplingBound::SpectralRadius ? cert.lambda_max : cert.max_weighted_degree;
  cert.min_node_c = std::numeric_limits<double>::infinity();
  cert.min_edge_c = std::numeric_limits<double>::infinity();
  for (const auto& mrf : mrfs) {
    for (const auto& n : mrf.nodes) cert.min_node_c = std::min(cert.min_node_c, n.c);
    for (const auto& e : mrf.edges) cert.min_edge_c = std::min(cert.min_edge_c, e.c);
  }
  if (!std::isfinite(cert.min_node_c)) cert.min_node_c = 0.0;  // no nodes at all
  if (!std::isfinite(cert.min_edge_c)) cert.min_edge_c = 1.0;  // no edges is fine
  cert.ok = cert.min_node_c > cert.bound_used && cert.min_edge_c > 0.0;
  return cert;
}

double extended_objective(const std::vector<BinaryMrf>& mrfs, const CouplingGraph& coupling,
                          const std::vector<BeliefState>& beliefs) {
  double obj = 0.0;
  for (int i = 0; i < int(mrfs.size()); ++i) obj += variational_objective(mrfs[i], beliefs[i]);
  for (const auto& e : coupling.edges) {
    const auto& ba = beliefs[e.image_a].singleton[e.node_a];
    const auto& bb = beliefs[e.image_b].singleton[e.node_b];
    obj += e.weight * (ba[0] * bb[0] + ba[1] * bb[1]);
  }
  return obj;
}

ExtendedResult extended_solve(std::vector<BinaryMrf> mrfs, const CouplingGraph& coupling,
                              const ExtendedOptions& options,
                              const std::vector<BeliefState>* init) {
  if (coupling.nodes_per_image.size() != mrfs.size())
    throw validation_error("coupling graph does not match the image list");
  for (int i = 0; i < int(mrfs.size()); ++i)
    if (coupling.nodes_per_image[i] != int(mrfs[i].nodes.size()))
      throw validation_error("coupling node counts do not match the MRFs");

  ExtendedResult result;
  const double bound = options.bound == CouplingBound::SpectralRadius
                           ? coupling_lambda_max(coupling)
                           : coupling_max_weighted_degree(coupling);
  result.lifted_c = std::max(1.0, (1.0 + options.lift_epsilon) * bound);
  if (options.auto_lift)
    for (auto& mrf : mrfs)
      for (auto& node : mrf.nodes) node.c = std::max(node.c, result.lifted_c);
  result.certificate = concavity_certificate(coupling, mrfs, options.bound);
  if (options.enforce_certificate && !result.certificate.ok)
    throw validation_error("concavity certificate violated for the extended program");

  const int m = int(mrfs.size());
  result.beliefs.resize(m);
  for (int i = 0; i < m; ++i) {
    // initial singletons are taken as given; pairwise beliefs are canonicalized
    // to the edge-optimal couplings so the starting point is feasible and the
    // first block update cannot lower the true program value
    std::vector<double> q(mrfs[i].nodes.size(), 0.5);
    if (init) {
      if ((*init)[i].singleton.size() != mrfs[i].nodes.size())
        throw validation_error("initial beliefs do not match the MRFs");
      for (int v = 0; v < int(q.size()); ++v)
        q[v] = std::clamp((*init)[i].singleton[v][1], kQMin, 1.0 - kQMin);
    }
    result.beliefs[i] = beliefs_from_q(mrfs[i], q);
  }

  // coupling neighbours per image
  std::vector<std::vector<const CouplingEdge*>> touching(m);
  for (const auto& e : coupling.edges) {
    touching[e.image_a].push_back(&e);
    touching[e.image_b].push_back(&e);
  }

  double prev_obj = extended_objective(mrfs, coupling, result.beliefs);
  for (int round = 1; round <= options.max_rounds; ++round) {
    for (int i = 0; i < m; ++i) {
      BinaryMrf effective = mrfs[i];
      for (const auto* e : touching[i]) {
        const bool self_a = e->image_a == i;
        const int self_node = self_a ? e->node_a : e->node_b;
        const auto& other =
            result.beliefs[self_a ? e->image_b : e->image_a].singleton[self_a ? e->node_b : e->node_a];
        effective.nodes[self_node].theta[0] += e->weight * other[0];
        effective.nodes[self_node].theta[1] += e->weight * other[1];
      }
      SolveOptions inner = options.inner;
      inner.mode = SolveMode::Concave;
      std::vector<double> warm(mrfs[i].nodes.size());
      for (int v = 0; v < int(warm.size()); ++v) warm[v] = result.beliefs[i].singleton[v][1];
      inner.init_fg = warm;
      result.beliefs[i] = cbp_solve(effective, inner).beliefs;
    }
    const double obj = extended_objective(mrfs, coupling, result.beliefs);
    if (result.certificate.ok && obj < prev_obj - 1e-7 * (1.0 + std::abs(prev_obj)))
      throw std::logic_error("extended objective decreased under a valid certificate");
    result.rounds = round;
    const bool settled = std::abs(obj - prev_obj) < options.tolerance;
    prev_obj = obj;
    if (settled) {
      result.converged = true;
      break;
    }
  }
  result.objective = prev_obj;
  return result;
}

std::vector<std::array<double, 2>> exact_marginals(const BinaryMrf& mrf) {
  return exact_marginals(std::vector<BinaryMrf>{mrf}, CouplingGraph{{int(mrf.nodes.size())}, {}})[0];
}

std::vector<std::vector<std::array<double, 2>>> exact_marginals(
    const std::vector<BinaryMrf>& mrfs, const CouplingGraph& coupling) {
  validate_coupling(coupling);
  struct FlatEdge {
    int a, b;
    std::array<std::array<double, 2>, 2> theta;
  };
  std::vector<std::array<double, 2>> theta;
  std::vector<FlatEdge> edges;
  std::vector<int> offset(mrfs.size(), 0);
  for (int i = 0; i < int(mrfs.size()); ++i) {
    offset[i] = int(theta.size());
    for (const auto& n : mrfs[i].nodes) theta.push_back(n.theta);
    for (const auto& e : mrfs[i].edges)
      edges.push_back({offset[i] + e.a, offset[i] + e.b, e.theta});
  }
  for (const auto& e : coupling.edges) {
    const double w = e.weight;
    edges.push_back({offset[e.image_a] + e.node_a, offset[e.image_b] + e.node_b,
                     {{{w, -w}, {-w, w}}}});
  }
  const int n = int(theta.size());
  if (n > 20) throw validation_error("exact_marginals: instance too large");

  std::vector<double> energy(std::size_t(1) << n);
  double max_energy = -std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < energy.size(); ++mask) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += theta[i][(mask >> i) & 1];
    for (const auto& e : edges) s += e.theta[(mask >> e.a) & 1][(mask >> e.b) & 1];
    energy[mask] = s;
    max_energy = std::max(max_energy, s);
  }
  std::vector<std::array<double, 2>> marg(n, {0.0, 0.0});
  double z = 0.0;
  for (std::size_t mask = 0; mask < energy.size(); ++mask) {
    const double w = std::exp(energy[mask] - max_energy);
    z += w;
    for (int i = 0; i < n; ++i) marg[i][(mask >> i) & 1] += w;
  }
  for (auto& m : marg) {
    m[0] /= z;
    m[1] /= z;
  }
  std::vector<std::vector<std::array<double, 2>>> out;
  for (int i = 0; i < int(mrfs.size()); ++i)
    out.push_back({marg.begin() + offset[i],
                   marg.begin() + offset[i] + int(mrfs[i].nodes.size())});
  return out;
}

}  // namespace coprop
