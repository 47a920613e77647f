#pragma once

#include <optional>
#include <span>

#include "coprop/collection.hpp"

namespace coprop {

struct CompatibilityParams {
  double delta = 0.1;       // enrichment coefficient, applied to foreground sources only
  int top_k = 3;            // appearance nearest neighbours admitted by p_sim
  double tau = 4.0;         // merge-level falloff of intra potentials
  double lambda_min = 0.2;  // finest merge level examined
  int histogram_bins = 16;  // per channel
};

// Circle in the target image where a source part's counterpart is expected.
struct EstimatedRegion {
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
};

struct LocalPotentials {
  std::vector<double> theta_f;  // per target base part
  std::vector<double> theta_b;
};

enum class PairwiseKind { Intra, Inter };

// Attractive pairwise potential: value on labels is weight * y_i * y_j.
struct PairwisePotential {
  int part_i = -1, part_j = -1;  // Intra: base-part indexes; Inter: flat node ids
  double weight = 0.0;
  PairwiseKind kind = PairwiseKind::Intra;
};

// Fraction of the source part's pixels whose match lands inside the target
// part; `pairs` must be confidence-thresholded and flow source->target.
double p_corr(const Part& source, const Part& target, std::span<const PixelPair> pairs);

// sum_u sqrt(a_u * b_u) over all bins; both histograms normalized.
double bhattacharyya(std::span<const double> a, std::span<const double> b);

// Similarity-transform guess of where `source` lands in the target: anchors are
// thresholded foreground correspondence pairs. Empty when fewer than two
// distinct anchors exist or the chosen source anchors coincide.
std::optional<EstimatedRegion> estimate_region(const Part& source,
                                               std::span<const PixelPair> fg_pairs);

bool region_intersects(const EstimatedRegion& region, const Part& part);

// Target part indexes ranked by Bhattacharyya against the source, descending;
// ties broken toward the lower part index.
std::vector<int> rank_by_bhattacharyya(const Part& source, const std::vector<Part>& target_parts);

// Appearance similarity gated by top-k rank and the estimated region.
double p_sim(int target_part, const Part& source, const std::vector<Part>& target_parts,
             const std::optional<EstimatedRegion>& region, const CompatibilityParams& params);

double p_comp(double pcorr, double psim, bool source_is_foreground,
              const CompatibilityParams& params);

double intra_weight(double lambda_merge, const CompatibilityParams& params);

// Merge-level falloff weights over an image's intra edges.
std::vector<PairwisePotential> intra_pairwise(const ImageRecord& image,
                                              const CompatibilityParams& params);

// Flat node ids: base parts numbered image-major across the collection.
int flat_node_count(const CollectionGraph& graph);
int flat_node_id(const CollectionGraph& graph, int image, int part);

// Cross-image potentials mirroring the graph's inter edges (same formula).
std::vector<PairwisePotential> inter_pairwise(const CollectionGraph& graph);

// Cached seed->target context: the multi-scale seed bag, per-source regions,
// top-k ranks and matched-pixel counts. The heavy path behind local_potentials.
class SeedTargetModel {
 public:
  SeedTargetModel(const CollectionGraph& graph, int seed_image,
                  const std::vector<int>& seed_base_labels, int target_image,
                  const CompatibilityParams& params);

  const std::vector<SeedPart>& bag() const { return bag_; }
  const std::optional<EstimatedRegion>& region(int bag_index) const { return regions_[bag_index]; }
  double p_corr_value(int bag_index, int target_part) const;
  double p_sim_value(int bag_index, int target_part) const;
  double p_comp_value(int bag_index, int target_part) const;
  LocalPotentials local_potentials() const;

 private:
  const CollectionGraph& graph_;
  int seed_image_, target_image_;
  CompatibilityParams params_;
  std::vector<SeedPart> bag_;
  std::vector<std::optional<EstimatedRegion>> regions_;   // per bag part (foreground only)
  std::vector<std::vector<int>> topk_;                    // per bag part (foreground only)
  std::vector<std::vector<double>> corr_fraction_;        // [bag][target part]
};

// Per target base part: theta_f / theta_b as maxima of p_comp over the seed's
// foreground / background part bags (empty set gives 0).
LocalPotentials local_potentials(const CollectionGraph& graph, int seed_image,
                                 const std::vector<int>& seed_base_labels, int target_image,
                                 const CompatibilityParams& params);

}  // namespace coprop
