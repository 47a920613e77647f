#include "coprop/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <unordered_set>

namespace coprop {

namespace {

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

}  // namespace

double p_corr(const Part& source, const Part& target, std::span<const PixelPair> pairs) {
  std::unordered_set<std::int64_t> src_pixels, matched;
  src_pixels.reserve(source.pixels.size());
  for (Coord c : source.pixels) src_pixels.insert(std::int64_t(c.y) << 32 | std::uint32_t(c.x));
  std::unordered_set<std::int64_t> tgt_pixels;
  tgt_pixels.reserve(target.pixels.size());
  for (Coord c : target.pixels) tgt_pixels.insert(std::int64_t(c.y) << 32 | std::uint32_t(c.x));
  for (const auto& pp : pairs) {
    const std::int64_t s = std::int64_t(pp.src.y) << 32 | std::uint32_t(pp.src.x);
    if (src_pixels.count(s) && tgt_pixels.count(std::int64_t(pp.dst.y) << 32 | std::uint32_t(pp.dst.x)))
      matched.insert(s);
  }
  return double(matched.size()) / double(source.pixels.size());
}

double bhattacharyya(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u) sum += std::sqrt(a[u] * b[u]);
  return sum;
}

std::optional<EstimatedRegion> estimate_region(const Part& source,
                                               std::span<const PixelPair> fg_pairs) {
  if (fg_pairs.size() < 2) return std::nullopt;
  auto src_dist = [&](const PixelPair& pp) { return dist(pp.src.x, pp.src.y, source.cx, source.cy); };
  auto lex_less = [](Coord a, Coord b) { return a.y != b.y ? a.y < b.y : a.x < b.x; };
  // ties resolve to opposite lexicographic ends so the two picks stay distinct
  const PixelPair* closest = &fg_pairs[0];
  const PixelPair* farthest = &fg_pairs[0];
  for (const auto& pp : fg_pairs) {
    const double d = src_dist(pp);
    if (d < src_dist(*closest) || (d == src_dist(*closest) && lex_less(pp.src, closest->src)))
      closest = &pp;
    if (d > src_dist(*farthest) || (d == src_dist(*farthest) && lex_less(farthest->src, pp.src)))
      farthest = &pp;
  }
  const double src_sep = dist(closest->src.x, closest->src.y, farthest->src.x, farthest->src.y);
  if (src_sep <= 0.0) return std::nullopt;
  const double scale =
      dist(closest->dst.x, closest->dst.y, farthest->dst.x, farthest->dst.y) / src_sep;

  EstimatedRegion region;
  region.cx = closest->dst.x + scale * (source.cx - closest->src.x);
  region.cy = closest->dst.y + scale * (source.cy - closest->src.y);
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& pp : fg_pairs)
    nearest = std::min(nearest, dist(region.cx, region.cy, pp.dst.x, pp.dst.y));
  region.radius = std::max(1.0, nearest);
  return region;
}

bool region_intersects(const EstimatedRegion& region, const Part& part) {
  const double r2 = region.radius * region.radius;
  for (Coord c : part.pixels) {
    const double dx = c.x - region.cx, dy = c.y - region.cy;
    if (dx * dx + dy * dy <= r2) return true;
  }
  return false;
}

std::vector<int> rank_by_bhattacharyya(const Part& source, const std::vector<Part>& target_parts) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(target_parts.size());
  for (int i = 0; i < int(target_parts.size()); ++i)
    scored.push_back({bhattacharyya(source.histogram, target_parts[i].histogram), i});
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> order;
  order.reserve(scored.size());
  for (const auto& [score, i] : scored) order.push_back(i);
  return order;
}

double p_sim(int target_part, const Part& source, const std::vector<Part>& target_parts,
             const std::optional<EstimatedRegion>& region, const CompatibilityParams& params) {
  if (!region) return 0.0;
  const auto order = rank_by_bhattacharyya(source, target_parts);
  bool in_topk = false;
  for (int r = 0; r < std::min<int>(params.top_k, int(order.size())); ++r)
    in_topk |= order[r] == target_part;
  if (!in_topk) return 0.0;
  if (!region_intersects(*region, target_parts[target_part])) return 0.0;
  return bhattacharyya(source.histogram, target_parts[target_part].histogram);
}

double p_comp(double pcorr, double psim, bool source_is_foreground,
              const CompatibilityParams& params) {
  return pcorr + (source_is_foreground ? params.delta * psim : 0.0);
}

double intra_weight(double lambda_merge, const CompatibilityParams& params) {
  return std::exp(-params.tau * (lambda_merge - params.lambda_min));
}

std::vector<PairwisePotential> intra_pairwise(const ImageRecord& image,
                                              const CompatibilityParams& params) {
  std::vector<PairwisePotential> out;
  out.reserve(image.intra_edges.size());
  for (const auto& [a, b] : image.intra_edges)
    out.push_back({a, b, intra_weight(image.merge_level_of(a, b), params), PairwiseKind::Intra});
  return out;
}

int flat_node_count(const CollectionGraph& graph) {
  int total = 0;
  for (const auto& image : graph.images) total += image.part_count();
  return total;
}

int flat_node_id(const CollectionGraph& graph, int image, int part) {
  int base = 0;
  for (int i = 0; i < image; ++i) base += graph.images[i].part_count();
  return base + part;
}

std::vector<PairwisePotential> inter_pairwise(const CollectionGraph& graph) {
  std::vector<PairwisePotential> out;
  out.reserve(graph.inter_edges.size());
  for (const auto& e : graph.inter_edges)
    out.push_back({flat_node_id(graph, e.image_a, e.part_a),
                   flat_node_id(graph, e.image_b, e.part_b), e.weight, PairwiseKind::Inter});
  return out;
}

SeedTargetModel::SeedTargetModel(const CollectionGraph& graph, int seed_image,
                                 const std::vector<int>& seed_base_labels, int target_image,
                                 const CompatibilityParams& params)
    : graph_(graph), seed_image_(seed_image), target_image_(target_image), params_(params) {
  const auto& seed = graph.images[seed_image];
  const auto& target = graph.images[target_image];
  bag_ = seed_bag(seed, seed_base_labels);

  const Correspondence* corr = graph.corr_between(seed_image, target_image);
  static const std::vector<PixelPair> kNoPairs;
  const auto& pairs = corr ? corr->pairs : kNoPairs;

  // Matched distinct source pixels per (bag part, target base part).
  corr_fraction_.assign(bag_.size(), std::vector<double>(target.part_count(), 0.0));
  std::vector<std::vector<int>> bag_of(seed.levels.size());  // (level, part) -> bag index
  for (int li = 0; li < int(seed.levels.size()); ++li)
    bag_of[li].assign(seed.levels[li].parts.size(), -1);
  for (int bi = 0; bi < int(bag_.size()); ++bi) bag_of[bag_[bi].level][bag_[bi].part] = bi;

  std::set<std::tuple<int, int, std::int64_t>> seen;
  for (const auto& pp : pairs) {
    const int tgt_part = target.base().part_index.at(pp.dst);
    for (int li = 0; li < int(seed.levels.size()); ++li) {
      const int bi = bag_of[li][seed.levels[li].part_index.at(pp.src)];
      if (bi < 0) continue;
      if (seen.insert({bi, tgt_part, std::int64_t(pp.src.y) * seed.width + pp.src.x}).second)
        corr_fraction_[bi][tgt_part] += 1.0;
    }
  }
  for (int bi = 0; bi < int(bag_.size()); ++bi) {
    const double size = seed.levels[bag_[bi].level].parts[bag_[bi].part].size();
    for (auto& v : corr_fraction_[bi]) v /= size;
  }

  // Foreground anchors: thresholded pairs whose source pixel lies in a
  // foreground base part of the seed.
  std::vector<PixelPair> fg_anchors;
  for (const auto& pp : pairs)
    if (seed_base_labels[seed.base().part_index.at(pp.src)] == 1) fg_anchors.push_back(pp);

  regions_.resize(bag_.size());
  topk_.resize(bag_.size());
  for (int bi = 0; bi < int(bag_.size()); ++bi) {
    if (bag_[bi].label != 1) continue;  // enrichment only for foreground sources
    const auto& part = seed.levels[bag_[bi].level].parts[bag_[bi].part];
    regions_[bi] = estimate_region(part, fg_anchors);
    auto order = rank_by_bhattacharyya(part, target.base().parts);
    order.resize(std::min<std::size_t>(order.size(), params.top_k));
    topk_[bi] = std::move(order);
  }
}

double SeedTargetModel::p_corr_value(int bag_index, int target_part) const {
  return corr_fraction_[bag_index][target_part];
}

double SeedTargetModel::p_sim_value(int bag_index, int target_part) const {
  if (bag_[bag_index].label != 1 || !regions_[bag_index]) return 0.0;
  const auto& topk = topk_[bag_index];
  if (std::find(topk.begin(), topk.end(), target_part) == topk.end()) return 0.0;
  const auto& target = graph_.images[target_image_].base().parts[target_part];
  if (!region_intersects(*regions_[bag_index], target)) return 0.0;
  const auto& seed = graph_.images[seed_image_];
  return bhattacharyya(seed.levels[bag_[bag_index].level].parts[bag_[bag_index].part].histogram,
                       target.histogram);
}

double SeedTargetModel::p_comp_value(int bag_index, int target_part) const {
  return p_comp(p_corr_value(bag_index, target_part), p_sim_value(bag_index, target_part),
                bag_[bag_index].label == 1, params_);
}

LocalPotentials SeedTargetModel::local_potentials() const {
  const int n = graph_.images[target_image_].part_count();
  LocalPotentials out;
  out.theta_f.assign(n, 0.0);
  out.theta_b.assign(n, 0.0);
  for (int bi = 0; bi < int(bag_.size()); ++bi) {
    auto& theta = bag_[bi].label == 1 ? out.theta_f : out.theta_b;
    if (bag_[bi].label == 1) {
      for (int i = 0; i < n; ++i) theta[i] = std::max(theta[i], p_comp_value(bi, i));
    } else {
      // background sources contribute p_corr only; skip the p_sim machinery
      for (int i = 0; i < n; ++i) theta[i] = std::max(theta[i], corr_fraction_[bi][i]);
    }
  }
  return out;
}

LocalPotentials local_potentials(const CollectionGraph& graph, int seed_image,
                                 const std::vector<int>& seed_base_labels, int target_image,
                                 const CompatibilityParams& params) {
  return SeedTargetModel(graph, seed_image, seed_base_labels, target_image, params)
      .local_potentials();
}

}  // namespace coprop
