#include "coprop/collection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <unordered_map>

namespace coprop {

namespace {

constexpr double kLevelTol = 1e-9;

std::pair<int, int> ordered(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

double ImageRecord::merge_level_of(int a, int b) const {
  auto it = merge_level.find(ordered(a, b));
  return it == merge_level.end() ? 1.0 : it->second;
}

int CollectionGraph::image_index(const std::string& id) const {
  for (int i = 0; i < int(images.size()); ++i)
    if (images[i].id == id) return i;
  return -1;
}

std::vector<int> CollectionGraph::images_adjacent_to(int image) const {
  std::vector<int> out;
  for (int j = 0; j < int(images.size()); ++j)
    if (j != image && image_adjacency[image][j] > 0.0) out.push_back(j);
  return out;
}

const Correspondence* CollectionGraph::corr_between(int src_image, int dst_image) const {
  for (const auto& c : correspondences)
    if (c.source_image == src_image && c.target_image == dst_image) return &c;
  return nullptr;
}

std::vector<int> CollectionGraph::unreachable_from_template() const {
  std::vector<int> out;
  if (template_image < 0) return out;
  std::vector<char> seen(images.size(), 0);
  std::deque<int> queue{template_image};
  seen[template_image] = 1;
  while (!queue.empty()) {
    int cur = queue.front();
    queue.pop_front();
    for (int nb : images_adjacent_to(cur))
      if (!seen[nb]) {
        seen[nb] = 1;
        queue.push_back(nb);
      }
  }
  for (int i = 0; i < int(images.size()); ++i)
    if (!seen[i]) out.push_back(i);
  return out;
}

LevelParts build_level_parts(LabelGrid grid, double level, int min_part_pixels,
                             std::map<int, int>* label_remap) {
  const int w = grid.width(), h = grid.height();

  // Absorb undersized parts into their largest 4-adjacent neighbour.
  std::map<int, int> alias;  // original label -> surviving label
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) alias.emplace(grid.at(x, y), grid.at(x, y));
  while (true) {
    std::map<int, int> sizes;
    std::map<int, std::set<int>> neighbors;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int l = grid.at(x, y);
        ++sizes[l];
        if (x + 1 < w && grid.at(x + 1, y) != l) {
          neighbors[l].insert(grid.at(x + 1, y));
          neighbors[grid.at(x + 1, y)].insert(l);
        }
        if (y + 1 < h && grid.at(x, y + 1) != l) {
          neighbors[l].insert(grid.at(x, y + 1));
          neighbors[grid.at(x, y + 1)].insert(l);
        }
      }
    int victim = -1;
    for (const auto& [l, n] : sizes)
      if (n < min_part_pixels && !neighbors[l].empty() && (victim == -1 || n < sizes[victim])) victim = l;
    if (victim == -1) break;
    int host = -1;
    for (int nb : neighbors[victim])
      if (host == -1 || sizes[nb] > sizes[host] || (sizes[nb] == sizes[host] && nb < host)) host = nb;
    for (auto& v : grid.values())
      if (v == victim) v = host;
    for (auto& [orig, cur] : alias)
      if (cur == victim) cur = host;
  }

  // Dense part indexes, ordered by surviving label value.
  std::set<int> labels(grid.values().begin(), grid.values().end());
  std::map<int, int> index_of;
  LevelParts out;
  out.level = level;
  for (int l : labels) {
    index_of[l] = int(out.parts.size());
    Part p;
    p.label = l;
    p.level = level;
    out.parts.push_back(std::move(p));
  }
  out.part_index = LabelGrid(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int idx = index_of[grid.at(x, y)];
      out.part_index.at(x, y) = idx;
      out.parts[idx].pixels.push_back({x, y});
    }
  if (label_remap) {
    label_remap->clear();
    for (const auto& [orig, cur] : alias) (*label_remap)[orig] = index_of[cur];
  }
  return out;
}

void histograms_from_rgb(ImageRecord& image, const std::vector<unsigned char>& rgb) {
  const std::size_t expect = std::size_t(image.width) * image.height * 3;
  if (rgb.size() != expect) throw validation_error("RGB grid size mismatch for image " + image.id);
  for (auto& level : image.levels) {
    for (auto& part : level.parts) {
      part.histogram.assign(kHistSize, 0.0);
      for (Coord c : part.pixels) {
        std::size_t base = (std::size_t(c.y) * image.width + c.x) * 3;
        int r = rgb[base] >> 4, g = rgb[base + 1] >> 4, b = rgb[base + 2] >> 4;
        part.histogram[(r * kHistBinsPerChannel + g) * kHistBinsPerChannel + b] += 1.0;
      }
      for (auto& v : part.histogram) v /= double(part.pixels.size());
    }
  }
}

void finalize_image(ImageRecord& image, double working_level) {
  if (image.levels.empty()) throw validation_error("image " + image.id + " has no part levels");
  std::sort(image.levels.begin(), image.levels.end(),
            [](const LevelParts& a, const LevelParts& b) { return a.level < b.level; });
  image.base_level = -1;
  for (int i = 0; i < int(image.levels.size()); ++i) {
    if (std::abs(image.levels[i].level - working_level) < kLevelTol) image.base_level = i;
    if (image.levels[i].part_index.width() != image.width ||
        image.levels[i].part_index.height() != image.height)
      throw validation_error("label grid dimensions mismatch for image " + image.id);
    for (const auto& p : image.levels[i].parts)
      if (p.pixels.empty()) throw validation_error("empty part in image " + image.id);
  }
  if (image.base_level < 0)
    throw validation_error("image " + image.id + " provides no parts at the working level");

  for (auto& level : image.levels)
    for (auto& part : level.parts) {
      double sx = 0, sy = 0;
      for (Coord c : part.pixels) {
        sx += c.x;
        sy += c.y;
      }
      part.cx = sx / part.pixels.size();
      part.cy = sy / part.pixels.size();
    }

  // Nesting: every part of a finer level lies inside one part of the next level.
  for (int li = 0; li + 1 < int(image.levels.size()); ++li) {
    const auto& fine = image.levels[li];
    const auto& coarse = image.levels[li + 1];
    for (const auto& part : fine.parts) {
      int owner = coarse.part_index.at(part.pixels.front());
      for (Coord c : part.pixels)
        if (coarse.part_index.at(c) != owner)
          throw validation_error("label grid inconsistent with hierarchy in image " + image.id);
    }
  }
  // Base membership of every non-base part.
  const auto& base = image.levels[image.base_level];
  for (int li = 0; li < int(image.levels.size()); ++li) {
    if (li == image.base_level) continue;
    auto& level = image.levels[li];
    for (auto& part : level.parts) {
      std::set<int> members;
      for (Coord c : part.pixels) members.insert(base.part_index.at(c));
      part.base_members.assign(members.begin(), members.end());
    }
  }

  // Intra edges from 4-adjacency of base supports.
  std::set<std::pair<int, int>> edges;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      int a = base.part_index.at(x, y);
      if (x + 1 < image.width && base.part_index.at(x + 1, y) != a)
        edges.insert(ordered(a, base.part_index.at(x + 1, y)));
      if (y + 1 < image.height && base.part_index.at(x, y + 1) != a)
        edges.insert(ordered(a, base.part_index.at(x, y + 1)));
    }
  image.intra_edges.assign(edges.begin(), edges.end());

  // Merge table: canonical keys, default 1.0 for pairs that never merge.
  std::map<std::pair<int, int>, double> merged;
  for (const auto& [key, lambda] : image.merge_level) {
    auto canon = ordered(key.first, key.second);
    auto it = merged.find(canon);
    if (it == merged.end())
      merged[canon] = lambda;
    else
      it->second = std::min(it->second, lambda);
  }
  for (const auto& e : image.intra_edges)
    if (!merged.count(e)) merged[e] = 1.0;
  for (const auto& [key, lambda] : merged)
    if (lambda < working_level - kLevelTol || lambda > 1.0 + kLevelTol)
      throw validation_error("merge level out of [working_level, 1] in image " + image.id);
  image.merge_level = std::move(merged);
}

std::vector<SeedPart> seed_bag(const ImageRecord& image, const std::vector<int>& base_labels) {
  std::vector<SeedPart> bag;
  for (int li = 0; li < int(image.levels.size()); ++li) {
    const auto& level = image.levels[li];
    for (int pi = 0; pi < int(level.parts.size()); ++pi) {
      if (li == image.base_level) {
        bag.push_back({li, pi, base_labels[pi]});
        continue;
      }
      const auto& members = level.parts[pi].base_members;
      bool all_f = true, all_b = true;
      for (int m : members) {
        all_f &= base_labels[m] == 1;
        all_b &= base_labels[m] == 0;
      }
      if (all_f)
        bag.push_back({li, pi, 1});
      else if (all_b)
        bag.push_back({li, pi, 0});
    }
  }
  return bag;
}

CollectionGraph build_parts_graph(std::vector<ImageRecord> images,
                                  const std::vector<Correspondence>& correspondences,
                                  double confidence_threshold, double working_level) {
  CollectionGraph graph;
  graph.working_level = working_level;
  graph.confidence_threshold = confidence_threshold;
  graph.images = std::move(images);
  const int n = int(graph.images.size());
  graph.image_adjacency.assign(n, std::vector<double>(n, 0.0));

  // Threshold and merge pair lists per ordered image pair.
  std::map<std::pair<int, int>, std::vector<PixelPair>> kept;
  for (const auto& corr : correspondences) {
    if (corr.source_image < 0 || corr.source_image >= n || corr.target_image < 0 ||
        corr.target_image >= n)
      throw validation_error("correspondence references unknown image");
    if (corr.source_image == corr.target_image)
      throw validation_error("correspondence links an image to itself");
    const auto& src = graph.images[corr.source_image];
    const auto& dst = graph.images[corr.target_image];
    auto& bucket = kept[{corr.source_image, corr.target_image}];
    for (const auto& pp : corr.pairs) {
      if (pp.confidence < 0.0 || pp.confidence > 1.0)
        throw validation_error("correspondence confidence outside [0,1]");
      if (!src.levels[src.base_level].part_index.in_bounds(pp.src) ||
          !dst.levels[dst.base_level].part_index.in_bounds(pp.dst))
        throw validation_error("correspondence coordinate out of grid bounds");
      if (pp.confidence > confidence_threshold) bucket.push_back(pp);
    }
  }
  for (auto& [key, pairs] : kept) {
    Correspondence c;
    c.source_image = key.first;
    c.target_image = key.second;
    c.pairs = std::move(pairs);
    graph.correspondences.push_back(std::move(c));
  }

  // Distinct source pixels matched per (source part, target part).
  // Edge key: (low image, its part, high image, its part).
  struct Fracs {
    double a_into_b = 0.0;
    double b_into_a = 0.0;
  };
  std::map<std::tuple<int, int, int, int>, Fracs> edges;
  for (const auto& corr : graph.correspondences) {
    const auto& src = graph.images[corr.source_image].base();
    const auto& dst = graph.images[corr.target_image].base();
    std::set<std::tuple<int, int, std::int64_t>> seen;  // (src part, dst part, src pixel)
    std::map<std::pair<int, int>, int> counts;
    const int w = graph.images[corr.source_image].width;
    for (const auto& pp : corr.pairs) {
      int sp = src.part_index.at(pp.src);
      int dp = dst.part_index.at(pp.dst);
      if (seen.insert({sp, dp, std::int64_t(pp.src.y) * w + pp.src.x}).second) ++counts[{sp, dp}];
    }
    bool forward = corr.source_image < corr.target_image;
    for (const auto& [key, count] : counts) {
      double frac = double(count) / src.parts[key.first].size();
      auto edge_key = forward ? std::make_tuple(corr.source_image, key.first, corr.target_image,
                                                key.second)
                              : std::make_tuple(corr.target_image, key.second, corr.source_image,
                                                key.first);
      auto& f = edges[edge_key];
      (forward ? f.a_into_b : f.b_into_a) += frac;
    }
  }
  for (const auto& [key, fracs] : edges) {
    InterEdge e;
    std::tie(e.image_a, e.part_a, e.image_b, e.part_b) = key;
    e.frac_a_into_b = fracs.a_into_b;
    e.frac_b_into_a = fracs.b_into_a;
    e.weight = fracs.a_into_b + fracs.b_into_a;
    if (e.weight <= 0.0) continue;
    graph.image_adjacency[e.image_a][e.image_b] += e.weight;
    graph.image_adjacency[e.image_b][e.image_a] += e.weight;
    graph.inter_edges.push_back(e);
  }
  return graph;
}

std::vector<int> rasterize_mask(const ImageRecord& image, const MaskGrid& mask) {
  if (mask.width() != image.width || mask.height() != image.height)
    throw validation_error("mask dimensions mismatch for image " + image.id);
  std::vector<int> labels(image.part_count(), 0);
  const auto& base = image.base();
  for (int pi = 0; pi < int(base.parts.size()); ++pi) {
    int fg = 0;
    for (Coord c : base.parts[pi].pixels) fg += mask.at(c) != 0;
    labels[pi] = 2 * fg > base.parts[pi].size() ? 1 : 0;
  }
  return labels;
}

MaskGrid labels_to_mask(const ImageRecord& image, const std::vector<int>& labels) {
  MaskGrid mask(image.width, image.height, 0);
  const auto& base = image.base();
  for (int pi = 0; pi < int(base.parts.size()); ++pi)
    if (labels[pi])
      for (Coord c : base.parts[pi].pixels) mask.at(c) = 1;
  return mask;
}

void validate_collection(const CollectionGraph& graph) {
  for (const auto& image : graph.images) {
    for (const auto& level : image.levels) {
      std::size_t covered = 0;
      for (int pi = 0; pi < int(level.parts.size()); ++pi) {
        const auto& part = level.parts[pi];
        if (part.pixels.empty()) throw validation_error("empty part");
        covered += part.pixels.size();
        for (Coord c : part.pixels)
          if (level.part_index.at(c) != pi) throw validation_error("part support inconsistent");
        if (int(part.histogram.size()) != kHistSize)
          throw validation_error("part histogram missing");
        double sum = 0.0;
        for (double v : part.histogram) {
          if (v < 0.0) throw validation_error("negative histogram entry");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw validation_error("histogram not normalized");
      }
      if (covered != std::size_t(image.width) * image.height)
        throw validation_error("parts do not cover the grid");
    }
    for (const auto& [key, lambda] : image.merge_level)
      if (lambda < graph.working_level - kLevelTol || lambda > 1.0 + kLevelTol)
        throw validation_error("merge level out of bounds");
  }
  const int n = int(graph.images.size());
  std::vector<std::vector<double>> proj(n, std::vector<double>(n, 0.0));
  for (const auto& e : graph.inter_edges) {
    if (e.image_a == e.image_b) throw validation_error("inter edge within one image");
    if (std::abs(e.weight - (e.frac_a_into_b + e.frac_b_into_a)) > 1e-12)
      throw validation_error("inter edge weight inconsistent");
    proj[e.image_a][e.image_b] += e.weight;
    proj[e.image_b][e.image_a] += e.weight;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(proj[i][j] - graph.image_adjacency[i][j]) > 1e-9)
        throw validation_error("image adjacency does not match inter edges");
  if (graph.template_image >= 0 &&
      int(graph.template_labels.size()) != graph.images[graph.template_image].part_count())
    throw validation_error("template labels do not cover the template image");
}

}  // namespace coprop
