#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coprop/grid.hpp"

namespace coprop {

inline constexpr int kHistBinsPerChannel = 16;
inline constexpr int kHistSize = kHistBinsPerChannel * kHistBinsPerChannel * kHistBinsPerChannel;

// Atomic image region at one hierarchy level.
struct Part {
  int label = 0;                  // label value in the level's grid
  std::vector<Coord> pixels;
  std::vector<double> histogram;  // kHistSize entries, sums to 1
  double level = 0.0;             // threshold at which this part exists
  double cx = 0.0, cy = 0.0;      // pixel centroid
  std::vector<int> base_members;  // base-part indexes covered (empty at base level)

  int size() const { return int(pixels.size()); }
};

struct LevelParts {
  double level = 0.0;
  LabelGrid part_index;  // pixel -> index into `parts`
  std::vector<Part> parts;
};

struct ImageRecord {
  std::string id;
  int width = 0, height = 0;
  std::vector<LevelParts> levels;  // ascending level; exactly one equals the working level
  int base_level = 0;              // index into `levels`
  // merge level per unordered spatially adjacent base-part pair, keyed (min,max)
  std::map<std::pair<int, int>, double> merge_level;
  std::vector<std::pair<int, int>> intra_edges;  // 4-adjacent base pairs, a<b, sorted
  std::optional<MaskGrid> truth_mask;

  const LevelParts& base() const { return levels[base_level]; }
  int part_count() const { return int(levels[base_level].parts.size()); }
  double merge_level_of(int a, int b) const;  // 1.0 when the pair never merges
};

// One pixel match of an asymmetric correspondence map.
struct PixelPair {
  Coord src;
  Coord dst;
  double confidence = 0.0;
};

// Directional pixel correspondences between two images (A->B kept apart from B->A).
struct Correspondence {
  int source_image = -1;
  int target_image = -1;
  std::vector<PixelPair> pairs;
};

struct InterEdge {
  int image_a = -1, part_a = -1;
  int image_b = -1, part_b = -1;
  double frac_a_into_b = 0.0;  // fraction of part_a's pixels matched into part_b (A->B map)
  double frac_b_into_a = 0.0;  // fraction of part_b's pixels matched into part_a (B->A map)
  double weight = 0.0;         // sum of the two fractions
};

// Parts-level graph plus its image-level projection.
struct CollectionGraph {
  double working_level = 0.15;
  double confidence_threshold = 0.5;
  std::vector<ImageRecord> images;
  std::vector<Correspondence> correspondences;  // confidence-thresholded pairs only
  std::vector<InterEdge> inter_edges;
  std::vector<std::vector<double>> image_adjacency;  // symmetric weights, 0 = no edge

  int template_image = -1;
  std::vector<int> template_labels;  // per base part of the template image, 1=F 0=B

  int image_index(const std::string& id) const;
  std::vector<int> images_adjacent_to(int image) const;
  const Correspondence* corr_between(int src_image, int dst_image) const;
  // images with no path to the template in the image-level graph
  std::vector<int> unreachable_from_template() const;
};

// Multi-scale seed part with its inherited label (all base members agree).
struct SeedPart {
  int level = 0;  // index into ImageRecord::levels
  int part = 0;
  int label = 0;  // 1=F, 0=B
};

// Bag of candidate parts of the seed image at all levels. Base parts carry
// `base_labels` directly; a coarser part joins only when its members agree.
std::vector<SeedPart> seed_bag(const ImageRecord& image, const std::vector<int>& base_labels);

// Builds part lists for one level from a label grid. Parts smaller than
// `min_part_pixels` are absorbed into their largest 4-adjacent neighbour. When
// given, `label_remap` receives original label -> final part index.
LevelParts build_level_parts(LabelGrid grid, double level, int min_part_pixels = 4,
                             std::map<int, int>* label_remap = nullptr);

// Histograms from a raw RGB byte grid (3 bytes per pixel, row-major).
void histograms_from_rgb(ImageRecord& image, const std::vector<unsigned char>& rgb);

// Fills centroids, intra edges, coarse-part membership; validates partitioning,
// nesting across levels and merge-table bounds. Throws validation_error.
void finalize_image(ImageRecord& image, double working_level);

// Constructs the dual graph from finalized images and raw correspondences.
// Pixel pairs at or below `confidence_threshold` are discarded; inter edges with
// zero weight are omitted; image adjacency is the projection of inter edges.
CollectionGraph build_parts_graph(std::vector<ImageRecord> images,
                                  const std::vector<Correspondence>& correspondences,
                                  double confidence_threshold,
                                  double working_level = 0.15);

// Rasterizes a pixel mask onto base parts: majority vote, ties to background.
std::vector<int> rasterize_mask(const ImageRecord& image, const MaskGrid& mask);

// Pixel mask from per-base-part labels.
MaskGrid labels_to_mask(const ImageRecord& image, const std::vector<int>& labels);

// Structural invariants (partition cover, histogram normalization, merge-level
// symmetry and bounds, adjacency projection). Throws validation_error.
void validate_collection(const CollectionGraph& graph);

}  // namespace coprop
