#pragma once

#include <functional>
#include <map>
#include <set>

#include "coprop/inference.hpp"
#include "coprop/segmentation.hpp"
#include "coprop/synthetic.hpp"

namespace coprop {

struct PropagationParams {
  CompatibilityParams compat;
  double decay = 0.5;            // fusion weight is decay^hop
  int runs = 5;
  double lambda_pairwise = 0.1;  // graph-cut smoothing scale
  SolveOptions solver;           // single-image inference settings
  ExtendedOptions joint;         // multi-target refinement settings
  // optional sinks: (run, iteration) after each fusion
  std::function<void(int, int, const class LikelihoodStore&)> checkpoint;
};

// Amortized per-part foreground likelihood. Template entries are pinned to the
// template labels and never change.
class LikelihoodStore {
 public:
  explicit LikelihoodStore(const CollectionGraph& graph);

  void fuse(int image, int part, double estimate, double weight, int hop);
  double fused(int image, int part) const;  // weighted mean; 0.5 before any estimate
  std::vector<double> fused_image(int image) const;
  double weight_sum(int image, int part) const;
  bool has_estimates(int image) const;
  const std::vector<int>& hops(int image, int part) const;
  int image_count() const { return int(cells_.size()); }
  int part_count(int image) const { return int(cells_[image].size()); }

 private:
  struct Cell {
    double weighted_sum = 0.0;
    double weight_sum = 0.0;
    std::vector<int> hops;
  };
  std::vector<std::vector<Cell>> cells_;
  int template_image_;
  std::vector<int> template_labels_;
};

struct PropagationSchedule {
  explicit PropagationSchedule(const CollectionGraph& graph, Rng rng);

  Rng rng;
  int current_seed = -1;
  std::set<int> visited;  // propagated-to at least once (template included)
  std::set<int> seeded;   // has acted as a seed
  int iteration = 0;
  std::map<int, std::vector<int>> committed;  // cached seed segmentations
};

// Labels from fused likelihoods via graph-cut (the template returns its pinned
// labels directly).
std::vector<int> commit_segmentation(int image, const LikelihoodStore& store,
                                     const CollectionGraph& graph,
                                     const PropagationParams& params);

struct IterationOutcome {
  int seed = -1;
  std::vector<int> targets;
  bool all_solves_converged = true;
};

// One propagation iteration: single-target inference from the seed to every
// G^i neighbour, joint refinement across that neighbourhood, fusion at weight
// decay^iteration, then the next-seed draw (random neighbour, falling back to
// the visited frontier when every neighbour has already been a seed).
IterationOutcome iteration_step(PropagationSchedule& schedule, LikelihoodStore& store,
                                const CollectionGraph& graph, const PropagationParams& params);

struct PipelineResult {
  std::vector<std::vector<double>> likelihoods;  // averaged over runs
  std::vector<std::vector<int>> labels;
  std::vector<MaskGrid> masks;
  std::vector<int> unreachable;
  bool converged = true;
};

// `runs` independent propagation passes, each until every reachable image has
// been propagated to; run r uses a seed derived from rng_seed. Final
// likelihoods average the per-run fused estimates; one graph-cut per image
// produces the masks. Unreachable images get likelihood 0.5 and all-background.
PipelineResult run_pipeline(const CollectionGraph& graph, const PropagationParams& params,
                            std::uint64_t rng_seed);

}  // namespace coprop
