// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "coprop/harness.hpp"
#include "coprop/io.hpp"
#include "coprop/potentials.hpp"
#include "coprop/synthetic.hpp"

using namespace coprop;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!pass) ++failures;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string mask_bytes(const MaskGrid& mask) {
  std::ostringstream out;
  out << "P_MASK " << mask.width() << ' ' << mask.height() << '\n';
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out << mask.at(x, y) << (x + 1 < mask.width() ? ' ' : '\n');
  return out.str();
}

SynthSpec benchmark_spec(double dropout) {
  SynthSpec spec;
  spec.image_count = 10;
  spec.width = 48;
  spec.height = 48;
  spec.part_size = 8;
  spec.appearance_noise = 0.1;
  spec.dropout = dropout;
  return spec;
}

void criterion_1_tree_exactness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20260801);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + int(rng.next_below(11));
    auto mrf = oracle::random_tree_mrf(rng, n);
    SolveOptions opts;
    opts.mode = SolveMode::BetheTree;
    auto solved = cbp_solve(mrf, opts);
    auto exact = exact_marginals(mrf);
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(solved.beliefs.fg(i) - exact[i][1]));
  }
  const double secs = elapsed_seconds(start);
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "tree exactness over 200 trees: max |b - p| = %.3g (< 1e-6), %.2fs (< 10s)", worst,
                secs);
  report(1, worst < 1e-6 && secs < 10.0, detail);
}

void criterion_2_concave_optimality() {
  Rng rng(20260802);
  double worst_gap = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng.next_below(9));
    auto mrf = oracle::random_loopy_mrf(rng, n);
    double last = -std::numeric_limits<double>::infinity();
    SolveOptions opts;
    opts.trace = [&](int, double obj, double) {
      monotone &= obj >= last - 1e-9 * (1.0 + std::abs(last));
      last = obj;
    };
    auto solved = cbp_solve(mrf, opts);
    const double ref =
        oracle::projected_gradient_max(mrf, std::vector<double>(mrf.nodes.size(), 0.5));
    worst_gap = std::max(worst_gap, std::abs(solved.objective - ref));
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "concave optimality over 100 MRFs: max |obj - oracle| = %.3g (< 1e-6), "
                "objective monotone: %s",
                worst_gap, monotone ? "yes" : "no");
  report(2, worst_gap < 1e-6 && monotone, detail);
}

void criterion_3_extended_claim() {
  Rng rng(20260803);
  double worst_spread = 0.0;
  bool all_certified = true;
  int uncertified_anomalies = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BinaryMrf> mrfs;
    const int n = 2 + int(rng.next_below(3));
    for (int k = 0; k < 2; ++k) mrfs.push_back(oracle::random_loopy_mrf(rng, n, 0.6));
    CouplingGraph coupling{{n, n}, {}};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (rng.bernoulli(0.5)) coupling.edges.push_back({0, i, 1, j, rng.uniform(0.2, 1.5)});

    std::vector<std::vector<BeliefState>> inits(5, std::vector<BeliefState>(2));
    for (auto& init : inits)
      for (auto& b : init) {
        b.singleton.resize(n);
        for (auto& s : b.singleton) {
          const double q = rng.uniform(0.02, 0.98);
          s = {1.0 - q, q};
        }
        b.pairwise.assign(mrfs[0].edges.size(), {{{0.25, 0.25}, {0.25, 0.25}}});
      }

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& init : inits) {
      auto ext = extended_solve(mrfs, coupling, {}, &init);
      all_certified &= ext.certificate.ok;
      lo = std::min(lo, ext.objective);
      hi = std::max(hi, ext.objective);
    }
    worst_spread = std::max(worst_spread, hi - lo);

    // informational probe: the same instances without the lift
    if (!coupling.edges.empty()) {
      ExtendedOptions raw;
      raw.auto_lift = false;
      raw.enforce_certificate = false;
      double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
      for (const auto& init : inits) {
        auto ext = extended_solve(mrfs, coupling, raw, &init);
        rlo = std::min(rlo, ext.objective);
        rhi = std::max(rhi, ext.objective);
      }
      if (rhi - rlo > 1e-5) ++uncertified_anomalies;
    }
  }
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "certified block ascent over 50 instances x 5 inits: objective spread = %.3g "
                "(< 1e-5); unlifted runs showed init-dependence on %d instances (informational)",
                worst_spread, uncertified_anomalies);
  report(3, worst_spread < 1e-5 && all_certified, detail);
}

void criterion_4_certificate() {
  CouplingGraph path{{1, 1, 1}, {{0, 0, 1, 0, 1.0}, {1, 0, 2, 0, 1.0}}};
  CouplingGraph star{{1, 1, 1, 1, 1},
                     {{0, 0, 1, 0, 1.0}, {0, 0, 2, 0, 1.0}, {0, 0, 3, 0, 1.0}, {0, 0, 4, 0, 1.0}}};
  CouplingGraph cycle{{1, 1, 1, 1},
                      {{0, 0, 1, 0, 1.0}, {1, 0, 2, 0, 1.0}, {2, 0, 3, 0, 1.0}, {3, 0, 0, 0, 1.0}}};
  auto dense = [](const CouplingGraph& g) {
    const int n = g.total_nodes();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (const auto& e : g.edges) {
      a[g.flat(e.image_a, e.node_a)][g.flat(e.image_b, e.node_b)] = e.weight;
      a[g.flat(e.image_b, e.node_b)][g.flat(e.image_a, e.node_a)] = e.weight;
    }
    return a;
  };
  double worst = 0.0;
  for (const auto* g : {&path, &star, &cycle})
    worst = std::max(worst,
                     std::abs(coupling_lambda_max(*g) - oracle::jacobi_lambda_max(dense(*g))));
  const bool closed_forms = std::abs(coupling_lambda_max(path) - std::sqrt(2.0)) < 1e-8 &&
                            std::abs(coupling_lambda_max(star) - 2.0) < 1e-8 &&
                            std::abs(coupling_lambda_max(cycle) - 2.0) < 1e-8;
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "lambda_max of path(3)/star(5)/cycle(4) vs direct eigendecomposition: "
                "max error %.3g (< 1e-8)",
                worst);
  report(4, worst < 1e-8 && closed_forms, detail);
}

void criterion_5_min_cut() {
  Rng rng(20260805);
  bool exact = true;
  double worst_duality = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng.next_below(15));
    CutProblem problem;
    problem.cost_f.resize(n);
    problem.cost_b.resize(n);
    for (int i = 0; i < n; ++i) {
      problem.cost_f[i] = rng.next_double();
      problem.cost_b[i] = rng.next_double();
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(0.35)) problem.edges.push_back({i, j, rng.uniform(0.0, 0.8)});
    auto result = min_cut(problem);
    auto [labels, energy] = oracle::enumerate_min_energy(problem);
    exact &= result.energy == energy;
    worst_duality = std::max(worst_duality, std::abs(result.flow - result.energy));
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "min-cut over 100 instances (<= 16 parts): energies exact vs enumeration: %s; "
                "max |flow - energy| = %.3g",
                exact ? "yes" : "no", worst_duality);
  report(5, exact && worst_duality < 1e-9, detail);
}

void criterion_6_potential_formulas() {
  CompatibilityParams params;
  bool ok = true;
  auto approx = [&](double got, double want) { ok &= std::abs(got - want) < 1e-12; };

  // correspondence fraction
  Part source, target;
  for (int i = 0; i < 100; ++i) source.pixels.push_back({i % 10, i / 10});
  for (int i = 0; i < 100; ++i) target.pixels.push_back({50 + i % 10, 50 + i / 10});
  std::vector<PixelPair> pairs;
  for (int i = 0; i < 50; ++i) pairs.push_back({{i % 10, i / 10}, {50 + i % 10, 50 + i / 10}, 0.9});
  approx(p_corr(source, target, pairs), 0.5);
  approx(p_corr(source, target, {}), 0.0);

  // compatibility
  approx(p_comp(0.3, 0.8, true, params), 0.38);
  approx(p_comp(0.3, 0.8, false, params), 0.3);
  approx(p_comp(0.0, 0.0, true, params), 0.0);

  // intra falloff
  approx(intra_weight(0.2, params), 1.0);
  approx(intra_weight(0.45, params), std::exp(-1.0));
  approx(intra_weight(1.0, params), std::exp(-3.2));

  // inter coupling weight
  approx(0.5 + 0.25, 0.75);
  Part a20, b20;
  for (int i = 0; i < 20; ++i) a20.pixels.push_back({i % 4, i / 4});
  for (int i = 0; i < 20; ++i) b20.pixels.push_back({i % 4, i / 4});
  std::vector<PixelPair> fwd;
  for (int i = 0; i < 10; ++i) fwd.push_back({{i % 4, i / 4}, {i % 4, i / 4}, 0.9});
  std::vector<PixelPair> bwd;
  for (int i = 0; i < 5; ++i) bwd.push_back({{i % 4, i / 4}, {i % 4, i / 4}, 0.9});
  approx(p_corr(a20, b20, fwd) + p_corr(b20, a20, bwd), 0.5 + 0.25);

  // appearance similarity
  std::vector<double> ha(kHistSize, 0.0), hb(kHistSize, 0.0);
  ha[3] = 1.0;
  hb[3] = 1.0;
  approx(bhattacharyya(ha, hb), 1.0);
  hb[3] = 0.0;
  hb[4] = 1.0;
  approx(bhattacharyya(ha, hb), 0.0);
  std::vector<double> hu(kHistSize, 0.0);
  hu[3] = 0.5;
  hu[4] = 0.5;
  approx(bhattacharyya(hu, hb), std::sqrt(0.5));

  report(6, ok, "compatibility / fraction / falloff / coupling formulas exact to 1e-12");
}

void criterion_7_and_9_end_to_end() {
  const auto spec = benchmark_spec(0.3);
  const auto start = std::chrono::steady_clock::now();
  auto synth = generate_synthetic_collection(spec, 2026);
  PropagationParams params;
  auto first = run_stage(synth.graph, Stage::FullPipeline, params, 99);
  const double secs = elapsed_seconds(start);
  const double p = first.report.average.precision;
  const double j = first.report.average.jaccard;
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "full pipeline on the 10-image benchmark (noise 0.1, dropout 0.3): "
                "P = %.2f (>= 95), J = %.2f (>= 90), %.1fs (< 60s)",
                p, j, secs);
  report(7, p >= 95.0 && j >= 90.0 && secs < 60.0, detail);

  // criterion 9: identical bytes on a second run with the same seed
  auto second = run_stage(synth.graph, Stage::FullPipeline, params, 99);
  bool identical = report_to_json(first.report) == report_to_json(second.report) &&
                   report_to_text(first.report) == report_to_text(second.report) &&
                   first.masks.size() == second.masks.size();
  if (identical)
    for (const auto& [image, mask] : first.masks)
      identical &= mask_bytes(mask) == mask_bytes(second.masks.at(image));
  report(9, identical, "repeated run with the same seed: masks and reports byte-identical");
}

void criterion_8_stage_ordering() {
  auto synth = generate_synthetic_collection(benchmark_spec(0.7), 2026);
  PropagationParams params;
  const double corr_only =
      run_stage(synth.graph, Stage::CorrOnly, params, 99).report.average.jaccard;
  const double corr_cut =
      run_stage(synth.graph, Stage::CorrPlusCut, params, 99).report.average.jaccard;
  const double single =
      run_stage(synth.graph, Stage::SingleInference, params, 99).report.average.jaccard;
  const double joint =
      run_stage(synth.graph, Stage::JointInference, params, 99).report.average.jaccard;
  const bool ok = corr_only <= corr_cut + 1e-9 && single <= joint + 1e-9 &&
                  joint > corr_cut + 10.0;
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "dropout-0.7 stage J: corr %.2f <= corr+cut %.2f; single %.2f <= joint %.2f; "
                "joint - corr+cut = %.2f (> 10)",
                corr_only, corr_cut, single, joint, joint - corr_cut);
  report(8, ok, detail);
}

}  // namespace

int main() {
  criterion_1_tree_exactness();
  criterion_2_concave_optimality();
  criterion_3_extended_claim();
  criterion_4_certificate();
  criterion_5_min_cut();
  criterion_6_potential_formulas();
  criterion_7_and_9_end_to_end();
  criterion_8_stage_ordering();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
