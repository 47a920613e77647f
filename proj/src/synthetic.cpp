#include "coprop/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace coprop {

namespace {

// Fixed sparse palettes: 4x4x4 bin blocks in non-overlapping colour regions.
std::vector<double> palette(int r0, int g0, int b0) {
  std::vector<double> h(kHistSize, 0.0);
  for (int r = r0; r < r0 + 4; ++r)
    for (int g = g0; g < g0 + 4; ++g)
      for (int b = b0; b < b0 + 4; ++b)
        h[(r * kHistBinsPerChannel + g) * kHistBinsPerChannel + b] = 1.0 / 64.0;
  return h;
}

std::vector<double> noisy_histogram(const std::vector<double>& base, double noise, Rng& rng) {
  std::vector<double> h(kHistSize, 0.0);
  double total = 0.0;
  for (int u = 0; u < kHistSize; ++u) {
    h[u] = (1.0 - noise) * base[u];
    total += h[u];
  }
  if (noise > 0.0) {
    for (int k = 0; k < 32; ++k) {
      int u = int(rng.next_below(kHistSize));
      double m = rng.next_double();
      h[u] += noise * m / 16.0;  // expected extra mass  = noise
      total += noise * m / 16.0;
    }
  }
  for (auto& v : h) v /= total;
  return h;
}

}  // namespace

SyntheticCollection generate_synthetic_collection(const SynthSpec& spec, std::uint64_t rng_seed) {
  if (spec.image_count < 1 || spec.part_size < 2 || spec.width < 2 * spec.part_size ||
      spec.height < 2 * spec.part_size)
    throw validation_error("synthetic spec: grid must hold at least 2x2 parts");
  Rng rng(rng_seed);

  const int ps = spec.part_size;
  const int tiles_x = spec.width / ps;
  const int tiles_y = spec.height / ps;
  const int width = tiles_x * ps;
  const int height = tiles_y * ps;

  // Planted shape in tile units.
  int fw = std::max(1, int(std::lround(tiles_x * std::sqrt(spec.fg_fraction))));
  int fh = std::max(1, int(std::lround(tiles_y * std::sqrt(spec.fg_fraction))));
  if (fw > tiles_x || fh > tiles_y)
    throw validation_error("synthetic spec: foreground larger than grid");

  // Per-image object origin, base position plus a bounded shift.
  std::vector<std::pair<int, int>> origin(spec.image_count);
  const int base_ox = (tiles_x - fw) / 2, base_oy = (tiles_y - fh) / 2;
  for (int k = 0; k < spec.image_count; ++k) {
    int sx = spec.max_shift_tiles > 0
                 ? int(rng.next_below(2 * spec.max_shift_tiles + 1)) - spec.max_shift_tiles
                 : 0;
    int sy = spec.max_shift_tiles > 0
                 ? int(rng.next_below(2 * spec.max_shift_tiles + 1)) - spec.max_shift_tiles
                 : 0;
    origin[k] = {std::clamp(base_ox + sx, 0, tiles_x - fw), std::clamp(base_oy + sy, 0, tiles_y - fh)};
  }

  auto tile_is_fg = [&](int image, int tx, int ty) {
    auto [ox, oy] = origin[image];
    bool in_rect = tx >= ox && tx < ox + fw && ty >= oy && ty < oy + fh;
    if (spec.shape == SynthSpec::Shape::Rect || !in_rect) return in_rect;
    double cx = ox + fw / 2.0 - 0.5, cy = oy + fh / 2.0 - 0.5;
    double r = std::max(0.75, std::sqrt(double(fw) * fh) / 2.0);
    double dx = tx - cx, dy = ty - cy;
    return dx * dx + dy * dy <= r * r + 1e-9;
  };

  const auto fg_palette = palette(12, 2, 2);
  const auto bg_palette = palette(2, 8, 10);

  SyntheticCollection out;
  std::vector<std::vector<char>> is_fg(spec.image_count);
  for (int k = 0; k < spec.image_count; ++k) {
    ImageRecord image;
    image.id = "img" + std::to_string(k);
    image.width = width;
    image.height = height;

    // Base level: one part per tile.
    LabelGrid base_grid(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) base_grid.at(x, y) = (y / ps) * tiles_x + (x / ps);
    image.levels.push_back(build_level_parts(base_grid, spec.working_level, 4));

    // Coarse level: the object as one part, background split into quadrants.
    LabelGrid coarse_grid(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        int tx = x / ps, ty = y / ps;
        if (tile_is_fg(k, tx, ty))
          coarse_grid.at(x, y) = 0;
        else
          coarse_grid.at(x, y) = 1 + (tx >= tiles_x / 2) + 2 * (ty >= tiles_y / 2);
      }
    image.levels.push_back(build_level_parts(coarse_grid, spec.coarse_level, 4));

    // Tile labels and merge levels; pairs inside one coarse region merge early.
    is_fg[k].resize(tiles_x * tiles_y);
    for (int t = 0; t < tiles_x * tiles_y; ++t)
      is_fg[k][t] = tile_is_fg(k, t % tiles_x, t / tiles_x);
    auto coarse_of = [&](int t) {
      int x = (t % tiles_x) * ps, y = (t / tiles_x) * ps;
      return coarse_grid.at(x, y);
    };
    for (int ty = 0; ty < tiles_y; ++ty)
      for (int tx = 0; tx < tiles_x; ++tx) {
        int t = ty * tiles_x + tx;
        for (int nb : {t + 1, t + tiles_x}) {
          if ((nb == t + 1 && tx + 1 >= tiles_x) || (nb == t + tiles_x && ty + 1 >= tiles_y))
            continue;
          double lambda = coarse_of(t) == coarse_of(nb)
                              ? rng.uniform(std::max(spec.working_level, 0.3), 0.6)
                              : rng.uniform(0.8, 1.0);
          image.merge_level[{t, nb}] = lambda;
        }
      }

    finalize_image(image, spec.working_level);

    // Histograms for base tiles, coarse parts average their members.
    const auto& base = image.levels[image.base_level];
    for (int pi = 0; pi < int(base.parts.size()); ++pi) {
      auto& part = image.levels[image.base_level].parts[pi];
      part.histogram =
          noisy_histogram(is_fg[k][pi] ? fg_palette : bg_palette, spec.appearance_noise, rng);
    }
    for (int li = 0; li < int(image.levels.size()); ++li) {
      if (li == image.base_level) continue;
      for (auto& part : image.levels[li].parts) {
        part.histogram.assign(kHistSize, 0.0);
        double total = 0.0;
        for (int m : part.base_members) {
          const auto& mp = base.parts[m];
          for (int u = 0; u < kHistSize; ++u) part.histogram[u] += mp.size() * mp.histogram[u];
          total += mp.size();
        }
        for (auto& v : part.histogram) v /= total;
      }
    }

    image.truth_mask = MaskGrid(width, height, 0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        image.truth_mask->at(x, y) = is_fg[k][base_grid.at(x, y)] ? 1 : 0;

    out.truth.push_back(std::vector<int>(is_fg[k].begin(), is_fg[k].end()));
    out.graph.images.push_back(std::move(image));  // temporary home; rebuilt below
  }

  // Ordered image pairs by topology.
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < spec.image_count; ++a)
    for (int b = 0; b < spec.image_count; ++b) {
      if (a == b) continue;
      bool linked = false;
      switch (spec.topology) {
        case SynthSpec::Topology::Complete: linked = true; break;
        case SynthSpec::Topology::Chain: linked = std::abs(a - b) == 1; break;
        case SynthSpec::Topology::Ring:
          linked = std::abs(a - b) == 1 || std::abs(a - b) == spec.image_count - 1;
          break;
      }
      if (linked) pairs.push_back({a, b});
    }

  // Identity correspondences with the object re-based between shifted origins.
  std::vector<Correspondence> corrs;
  for (auto [a, b] : pairs) {
    Correspondence corr;
    corr.source_image = a;
    corr.target_image = b;
    const int dx = (origin[b].first - origin[a].first) * ps;
    const int dy = (origin[b].second - origin[a].second) * ps;
    const auto& base = out.graph.images[a].base();
    for (int pi = 0; pi < int(base.parts.size()); ++pi) {
      bool dropped = rng.bernoulli(spec.dropout);
      for (Coord p : base.parts[pi].pixels) {
        int ta = (p.y / ps) * tiles_x + (p.x / ps);
        Coord q;
        if (is_fg[a][ta]) {
          q = {p.x + dx, p.y + dy};
        } else {
          int tb = (p.y / ps) * tiles_x + (p.x / ps);
          if (is_fg[b][tb]) continue;  // occluded by the other image's object
          q = p;
        }
        double conf = rng.uniform(0.6, 1.0);
        if (!dropped) corr.pairs.push_back({p, q, conf});
      }
    }
    std::size_t n_false = std::size_t(std::lround(spec.false_rate * double(corr.pairs.size())));
    for (std::size_t i = 0; i < n_false; ++i) {
      Coord p{int(rng.next_below(width)), int(rng.next_below(height))};
      Coord q{int(rng.next_below(width)), int(rng.next_below(height))};
      corr.pairs.push_back({p, q, rng.uniform(0.6, 1.0)});
    }
    corrs.push_back(std::move(corr));
  }

  auto images = std::move(out.graph.images);
  out.graph = build_parts_graph(std::move(images), corrs, spec.confidence_threshold,
                                spec.working_level);
  if (spec.template_index < 0 || spec.template_index >= spec.image_count)
    throw validation_error("synthetic spec: template index out of range");
  out.graph.template_image = spec.template_index;
  out.graph.template_labels = out.truth[spec.template_index];
  validate_collection(out.graph);
  return out;
}

}  // namespace coprop
