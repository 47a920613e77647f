#pragma once

#include <cstdint>

#include "coprop/collection.hpp"

namespace coprop {

// Parameters of the synthetic fixture: images tiled into uniform square parts,
// a planted foreground shape shared across images (shifted per image), shared
// palettes perturbed by appearance noise, and identity correspondences thinned
// by part-level dropout plus injected false matches.
struct SynthSpec {
  int image_count = 5;
  int width = 48, height = 48;
  int part_size = 8;  // tile edge in pixels; grid dims are rounded down to whole tiles

  enum class Shape { Rect, Disc };
  Shape shape = Shape::Rect;
  double fg_fraction = 0.25;  // approximate fraction of the grid covered by foreground

  double appearance_noise = 0.0;  // mixes random mass into the part palettes
  double dropout = 0.0;           // P(drop all matches of one source part for one image pair)
  double false_rate = 0.0;        // injected false pairs per kept true pair
  int max_shift_tiles = 1;        // per-image object offset range, in tiles

  enum class Topology { Complete, Chain, Ring };
  Topology topology = Topology::Complete;

  double working_level = 0.15;
  double coarse_level = 0.65;
  double confidence_threshold = 0.5;
  int template_index = 0;
};

struct SyntheticCollection {
  CollectionGraph graph;
  std::vector<std::vector<int>> truth;  // per image, per base part, 1=F
};

// Deterministic given rng_seed. Truth masks are attached to every image record;
// the template image's labels are pinned from its own truth.
SyntheticCollection generate_synthetic_collection(const SynthSpec& spec, std::uint64_t rng_seed);

}  // namespace coprop
