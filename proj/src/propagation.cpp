#include "coprop/propagation.hpp"

#include <algorithm>
#include <cmath>

namespace coprop {

LikelihoodStore::LikelihoodStore(const CollectionGraph& graph)
    : template_image_(graph.template_image), template_labels_(graph.template_labels) {
  cells_.resize(graph.images.size());
  for (std::size_t i = 0; i < graph.images.size(); ++i)
    cells_[i].resize(graph.images[i].part_count());
}

void LikelihoodStore::fuse(int image, int part, double estimate, double weight, int hop) {
  if (image == template_image_) return;  // template likelihoods stay pinned
  auto& cell = cells_[image][part];
  cell.weighted_sum += weight * estimate;
  cell.weight_sum += weight;
  cell.hops.push_back(hop);
}

double LikelihoodStore::fused(int image, int part) const {
  if (image == template_image_) return double(template_labels_[part]);
  const auto& cell = cells_[image][part];
  return cell.weight_sum > 0.0 ? cell.weighted_sum / cell.weight_sum : 0.5;
}

std::vector<double> LikelihoodStore::fused_image(int image) const {
  std::vector<double> out(cells_[image].size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = fused(image, int(p));
  return out;
}

double LikelihoodStore::weight_sum(int image, int part) const {
  return cells_[image][part].weight_sum;
}

bool LikelihoodStore::has_estimates(int image) const {
  if (image == template_image_) return true;
  for (const auto& cell : cells_[image])
    if (cell.weight_sum > 0.0) return true;
  return false;
}

const std::vector<int>& LikelihoodStore::hops(int image, int part) const {
  return cells_[image][part].hops;
}

PropagationSchedule::PropagationSchedule(const CollectionGraph& graph, Rng rng_in)
    : rng(rng_in), current_seed(graph.template_image) {
  if (graph.template_image < 0) throw validation_error("collection has no template image");
  visited.insert(graph.template_image);
}

std::vector<int> commit_segmentation(int image, const LikelihoodStore& store,
                                     const CollectionGraph& graph,
                                     const PropagationParams& params) {
  if (image == graph.template_image) return graph.template_labels;
  const auto likelihoods = store.fused_image(image);
  const auto intra = intra_pairwise(graph.images[image], params.compat);
  return min_cut(build_cut_problem(likelihoods, intra, params.lambda_pairwise)).labels;
}

namespace {

BinaryMrf target_mrf(const CollectionGraph& graph, int target, const LocalPotentials& local,
                     const CompatibilityParams& compat) {
  BinaryMrf mrf;
  for (int p = 0; p < graph.images[target].part_count(); ++p)
    mrf.add_node(local.theta_b[p], local.theta_f[p], 1.0);
  for (const auto& pot : intra_pairwise(graph.images[target], compat))
    mrf.add_attractive_edge(pot.part_i, pot.part_j, pot.weight, 1.0);
  return mrf;
}

int draw_from(const std::set<int>& pool, Rng& rng) {
  std::vector<int> items(pool.begin(), pool.end());
  return items[rng.next_below(items.size())];
}

}  // namespace

IterationOutcome iteration_step(PropagationSchedule& schedule, LikelihoodStore& store,
                                const CollectionGraph& graph, const PropagationParams& params) {
  ++schedule.iteration;
  IterationOutcome outcome;
  outcome.seed = schedule.current_seed;
  const int seed = schedule.current_seed;

  auto committed = schedule.committed.find(seed);
  if (committed == schedule.committed.end())
    committed =
        schedule.committed.emplace(seed, commit_segmentation(seed, store, graph, params)).first;
  const std::vector<int>& seed_labels = committed->second;

  outcome.targets = graph.images_adjacent_to(seed);
  if (!outcome.targets.empty()) {
    // Single-target inference per neighbour.
    std::vector<BinaryMrf> mrfs;
    std::vector<BeliefState> singles;
    for (int target : outcome.targets) {
      const auto local = local_potentials(graph, seed, seed_labels, target, params.compat);
      BinaryMrf mrf = target_mrf(graph, target, local, params.compat);
      SolveOptions opts = params.solver;
      opts.mode = SolveMode::Concave;
      auto result = cbp_solve(mrf, opts);
      outcome.all_solves_converged &= result.converged;
      singles.push_back(std::move(result.beliefs));
      mrfs.push_back(std::move(mrf));
    }

    // Joint refinement over the neighbourhood's coupling edges.
    CouplingGraph coupling;
    for (int target : outcome.targets)
      coupling.nodes_per_image.push_back(graph.images[target].part_count());
    std::map<int, int> slot;
    for (int k = 0; k < int(outcome.targets.size()); ++k) slot[outcome.targets[k]] = k;
    for (const auto& e : graph.inter_edges) {
      auto a = slot.find(e.image_a), b = slot.find(e.image_b);
      if (a != slot.end() && b != slot.end())
        coupling.edges.push_back({a->second, e.part_a, b->second, e.part_b, e.weight});
    }
    ExtendedOptions joint = params.joint;
    joint.inner.mode = SolveMode::Concave;
    auto refined = extended_solve(mrfs, coupling, joint, &singles);
    outcome.all_solves_converged &= refined.converged;

    // Fuse refined estimates at this iteration's amortization weight.
    const int hop = schedule.iteration;
    const double weight = std::pow(params.decay, hop);
    for (int k = 0; k < int(outcome.targets.size()); ++k) {
      const int target = outcome.targets[k];
      for (int p = 0; p < graph.images[target].part_count(); ++p)
        store.fuse(target, p, refined.beliefs[k].fg(p), weight, hop);
      schedule.visited.insert(target);
    }
  }
  schedule.seeded.insert(seed);

  // Next seed: a random neighbour; when every neighbour has already been a
  // seed and coverage is incomplete, jump to the visited frontier instead.
  std::set<int> neighbors(outcome.targets.begin(), outcome.targets.end());
  std::set<int> unvisited;
  for (int i = 0; i < int(graph.images.size()); ++i)
    if (!schedule.visited.count(i)) unvisited.insert(i);
  std::set<int> frontier;  // visited images with an unvisited neighbour
  for (int i : schedule.visited)
    for (int nb : graph.images_adjacent_to(i))
      if (unvisited.count(nb)) {
        frontier.insert(i);
        break;
      }

  bool all_neighbors_seeded = true;
  for (int nb : neighbors) all_neighbors_seeded &= schedule.seeded.count(nb) > 0;
  if (!unvisited.empty() && !frontier.empty() && (neighbors.empty() || all_neighbors_seeded))
    schedule.current_seed = draw_from(frontier, schedule.rng);
  else if (!neighbors.empty())
    schedule.current_seed = draw_from(neighbors, schedule.rng);
  // else: isolated seed and nothing to reach; caller terminates on coverage
  return outcome;
}

PipelineResult run_pipeline(const CollectionGraph& graph, const PropagationParams& params,
                            std::uint64_t rng_seed) {
  if (graph.template_image < 0) throw validation_error("collection has no template image");
  if (params.runs < 1) throw validation_error("run_pipeline needs at least one run");
  PipelineResult result;
  result.unreachable = graph.unreachable_from_template();
  const std::set<int> unreachable(result.unreachable.begin(), result.unreachable.end());
  const int n = int(graph.images.size());
  const std::size_t reachable_count = graph.images.size() - unreachable.size();

  std::vector<std::vector<double>> sum(n);
  for (int i = 0; i < n; ++i) sum[i].assign(graph.images[i].part_count(), 0.0);

  Rng master(rng_seed);
  for (int run = 0; run < params.runs; ++run) {
    PropagationSchedule schedule(graph, master.fork(run));
    LikelihoodStore store(graph);
    // each frontier jump visits new images next iteration; the cap only guards
    // against pathological random walks
    const int max_iterations = 64 + 32 * n;
    while (schedule.visited.size() < reachable_count && schedule.iteration < max_iterations) {
      auto outcome = iteration_step(schedule, store, graph, params);
      result.converged &= outcome.all_solves_converged;
      if (params.checkpoint) params.checkpoint(run, schedule.iteration, store);
    }
    if (schedule.visited.size() < reachable_count)
      throw std::logic_error("propagation failed to cover the reachable collection");
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < graph.images[i].part_count(); ++p) sum[i][p] += store.fused(i, p);
  }

  result.likelihoods.resize(n);
  result.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    result.likelihoods[i].resize(graph.images[i].part_count());
    for (int p = 0; p < graph.images[i].part_count(); ++p)
      result.likelihoods[i][p] = unreachable.count(i) ? 0.5 : sum[i][p] / params.runs;
    if (i == graph.template_image) {
      result.labels[i] = graph.template_labels;
    } else if (unreachable.count(i)) {
      result.labels[i].assign(graph.images[i].part_count(), 0);
    } else {
      const auto intra = intra_pairwise(graph.images[i], params.compat);
      result.labels[i] =
          min_cut(build_cut_problem(result.likelihoods[i], intra, params.lambda_pairwise)).labels;
    }
    result.masks.push_back(labels_to_mask(graph.images[i], result.labels[i]));
  }
  return result;
}

}  // namespace coprop
