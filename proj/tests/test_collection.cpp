#include <filesystem>
#include <set>

#include "doctest.h"
#include "coprop/io.hpp"
#include "coprop/synthetic.hpp"

using namespace coprop;

namespace {

LabelGrid tiled_grid(int width, int height, int tile) {
  LabelGrid grid(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) grid.at(x, y) = (y / tile) * (width / tile) + (x / tile);
  return grid;
}

std::vector<double> flat_hist() {
  std::vector<double> h(kHistSize, 0.0);
  h[0] = 1.0;
  return h;
}

ImageRecord simple_image(const std::string& id, int width, int height, int tile,
                         double working_level = 0.15) {
  ImageRecord image;
  image.id = id;
  image.width = width;
  image.height = height;
  image.levels.push_back(build_level_parts(tiled_grid(width, height, tile), working_level));
  finalize_image(image, working_level);
  for (auto& part : image.levels[0].parts) part.histogram = flat_hist();
  return image;
}

// 8x5 image split into two 20-pixel parts at x = 4
ImageRecord two_part_image(const std::string& id) {
  ImageRecord image;
  image.id = id;
  image.width = 8;
  image.height = 5;
  LabelGrid grid(8, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 8; ++x) grid.at(x, y) = x < 4 ? 0 : 1;
  image.levels.push_back(build_level_parts(grid, 0.15));
  finalize_image(image, 0.15);
  for (auto& part : image.levels[0].parts) part.histogram = flat_hist();
  return image;
}

}  // namespace

TEST_CASE("tiny parts are absorbed into their largest neighbour") {
  LabelGrid grid(6, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 6; ++x) grid.at(x, y) = x < 3 ? 0 : 1;
  grid.at(5, 1) = 7;  // 1-pixel part
  std::map<int, int> remap;
  auto level = build_level_parts(grid, 0.15, 4, &remap);
  CHECK(level.parts.size() == 2);
  CHECK(remap.at(7) == remap.at(1));  // absorbed into its only neighbour
  CHECK(level.parts[remap.at(1)].pixels.size() == 6);
}

TEST_CASE("2x2 tiling yields the four rook-adjacent intra edges") {
  auto image = simple_image("a", 4, 4, 2);
  REQUIRE(image.part_count() == 4);
  const std::vector<std::pair<int, int>> want{{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  CHECK(image.intra_edges == want);
}

TEST_CASE("merge table: canonical keys, default for never-merging pairs, bounds") {
  ImageRecord image;
  image.id = "a";
  image.width = 4;
  image.height = 4;
  image.levels.push_back(build_level_parts(tiled_grid(4, 4, 2), 0.15));
  image.merge_level[{1, 0}] = 0.4;  // reversed key
  finalize_image(image, 0.15);
  CHECK(image.merge_level_of(0, 1) == 0.4);
  CHECK(image.merge_level_of(1, 0) == 0.4);
  CHECK(image.merge_level_of(0, 2) == 1.0);  // absent pair

  ImageRecord bad;
  bad.id = "b";
  bad.width = 4;
  bad.height = 4;
  bad.levels.push_back(build_level_parts(tiled_grid(4, 4, 2), 0.15));
  bad.merge_level[{0, 1}] = 0.05;  // below the working level
  CHECK_THROWS_AS(finalize_image(bad, 0.15), validation_error);
}

TEST_CASE("level nesting is validated") {
  ImageRecord image;
  image.id = "a";
  image.width = 4;
  image.height = 4;
  image.levels.push_back(build_level_parts(tiled_grid(4, 4, 2), 0.15));
  LabelGrid coarse(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) coarse.at(x, y) = x < 1 ? 0 : 1;  // splits base parts
  image.levels.push_back(build_level_parts(coarse, 0.6));
  CHECK_THROWS_AS(finalize_image(image, 0.15), validation_error);
}

TEST_CASE("inter edge weight follows the matched-pixel fractions") {
  // two images of 2x1 parts; 10 of the 20 pixels of part 0 in image a map into
  // part 0 of image b, no reverse matches
  auto a = two_part_image("a");
  auto b = two_part_image("b");
  Correspondence corr;
  corr.source_image = 0;
  corr.target_image = 1;
  for (int i = 0; i < 10; ++i) corr.pairs.push_back({{i % 4, i / 4}, {i % 4, i / 4}, 0.9});
  auto graph = build_parts_graph({a, b}, {corr}, 0.5);
  REQUIRE(graph.inter_edges.size() == 1);
  CHECK(graph.inter_edges[0].weight == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(graph.inter_edges[0].frac_a_into_b == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(graph.inter_edges[0].frac_b_into_a == 0.0);
  CHECK(graph.image_adjacency[0][1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a three-image chain projects to chain adjacency with full reachability") {
  auto a = two_part_image("a");
  auto b = two_part_image("b");
  auto c = two_part_image("c");
  auto link = [](int src, int dst) {
    Correspondence corr;
    corr.source_image = src;
    corr.target_image = dst;
    for (int i = 0; i < 8; ++i) corr.pairs.push_back({{i, 0}, {i, 0}, 0.9});
    return corr;
  };
  auto graph = build_parts_graph({a, b, c}, {link(0, 1), link(1, 0), link(1, 2), link(2, 1)}, 0.5);
  graph.template_image = 0;
  graph.template_labels = {1, 0};
  CHECK(graph.image_adjacency[0][1] > 0.0);
  CHECK(graph.image_adjacency[1][2] > 0.0);
  CHECK(graph.image_adjacency[0][2] == 0.0);
  CHECK(graph.images_adjacent_to(1) == std::vector<int>{0, 2});
  CHECK(graph.unreachable_from_template().empty());
}

TEST_CASE("confidences at or below the threshold build no edges") {
  auto a = two_part_image("a");
  auto b = two_part_image("b");
  Correspondence corr;
  corr.source_image = 0;
  corr.target_image = 1;
  for (int i = 0; i < 20; ++i) corr.pairs.push_back({{i % 8, i / 8}, {i % 8, i / 8}, 0.4});
  auto graph = build_parts_graph({a, b}, {corr}, 0.5);
  CHECK(graph.inter_edges.empty());
  CHECK(graph.image_adjacency[0][1] == 0.0);
  CHECK(graph.images_adjacent_to(0).empty());
}

TEST_CASE("correspondence validation errors") {
  auto a = two_part_image("a");
  auto b = two_part_image("b");
  Correspondence unknown;
  unknown.source_image = 0;
  unknown.target_image = 5;
  CHECK_THROWS_AS(build_parts_graph({a, b}, {unknown}, 0.5), validation_error);

  Correspondence out_of_bounds;
  out_of_bounds.source_image = 0;
  out_of_bounds.target_image = 1;
  out_of_bounds.pairs.push_back({{0, 0}, {100, 0}, 0.9});
  CHECK_THROWS_AS(build_parts_graph({a, b}, {out_of_bounds}, 0.5), validation_error);

  Correspondence self;
  self.source_image = 0;
  self.target_image = 0;
  CHECK_THROWS_AS(build_parts_graph({a, b}, {self}, 0.5), validation_error);
}

TEST_CASE("image adjacency equals a brute-force reconstruction") {
  SynthSpec spec;
  spec.image_count = 5;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  spec.dropout = 0.5;
  spec.topology = SynthSpec::Topology::Complete;
  auto synth = generate_synthetic_collection(spec, 101);
  const auto& g = synth.graph;

  // scan every thresholded pixel pair and accumulate fractions independently
  const int n = int(g.images.size());
  std::vector<std::vector<double>> weight(n, std::vector<double>(n, 0.0));
  for (const auto& corr : g.correspondences) {
    const auto& src = g.images[corr.source_image].base();
    const auto& dst = g.images[corr.target_image].base();
    std::set<std::tuple<int, int, int, int>> seen;  // (sp, dp, px, py)
    std::map<std::pair<int, int>, int> counts;
    for (const auto& pp : corr.pairs)
      if (seen.insert({src.part_index.at(pp.src), dst.part_index.at(pp.dst), pp.src.x, pp.src.y})
              .second)
        ++counts[{src.part_index.at(pp.src), dst.part_index.at(pp.dst)}];
    for (const auto& [key, count] : counts) {
      const double frac = double(count) / src.parts[key.first].size();
      weight[corr.source_image][corr.target_image] += frac;
      weight[corr.target_image][corr.source_image] += frac;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(g.image_adjacency[i][j] == doctest::Approx(weight[i][j]).epsilon(1e-9));
}

TEST_CASE("directionality: swapping the files swaps the fractions, not the sum") {
  auto a = two_part_image("a");
  auto b = two_part_image("b");
  Correspondence fwd;
  fwd.source_image = 0;
  fwd.target_image = 1;
  for (int i = 0; i < 10; ++i) fwd.pairs.push_back({{i % 4, i / 4}, {i % 4, i / 4}, 0.9});
  Correspondence bwd;
  bwd.source_image = 1;
  bwd.target_image = 0;
  for (int i = 0; i < 5; ++i) bwd.pairs.push_back({{i % 4, i / 4}, {i % 4, i / 4}, 0.9});

  auto g1 = build_parts_graph({a, b}, {fwd, bwd}, 0.5);
  Correspondence fwd_swapped = fwd;
  fwd_swapped.source_image = 1;
  fwd_swapped.target_image = 0;
  Correspondence bwd_swapped = bwd;
  bwd_swapped.source_image = 0;
  bwd_swapped.target_image = 1;
  auto g2 = build_parts_graph({a, b}, {fwd_swapped, bwd_swapped}, 0.5);

  REQUIRE(g1.inter_edges.size() == 1);
  REQUIRE(g2.inter_edges.size() == 1);
  CHECK(g1.inter_edges[0].frac_a_into_b == doctest::Approx(g2.inter_edges[0].frac_b_into_a));
  CHECK(g1.inter_edges[0].frac_b_into_a == doctest::Approx(g2.inter_edges[0].frac_a_into_b));
  CHECK(g1.inter_edges[0].weight == doctest::Approx(g2.inter_edges[0].weight).epsilon(1e-12));
}

TEST_CASE("generator guarantees") {
  SynthSpec spec;
  spec.image_count = 4;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;

  SUBCASE("no noise: every foreground part reaches a template foreground part") {
    auto synth = generate_synthetic_collection(spec, 3);
    const auto& g = synth.graph;
    for (int img = 1; img < 4; ++img)
      for (int p = 0; p < g.images[img].part_count(); ++p) {
        if (!synth.truth[img][p]) continue;
        bool linked = false;
        for (const auto& e : g.inter_edges) {
          const bool here = (e.image_a == img && e.part_a == p && e.image_b == 0 &&
                             synth.truth[0][e.part_b]) ||
                            (e.image_b == img && e.part_b == p && e.image_a == 0 &&
                             synth.truth[0][e.part_a]);
          linked |= here;
        }
        CHECK(linked);
      }
  }

  SUBCASE("full dropout leaves no inter edges") {
    spec.dropout = 1.0;
    auto synth = generate_synthetic_collection(spec, 3);
    CHECK(synth.graph.inter_edges.empty());
  }

  SUBCASE("fixed seed reproduces the collection bit for bit") {
    spec.appearance_noise = 0.15;
    spec.dropout = 0.25;
    spec.false_rate = 0.05;
    auto s1 = generate_synthetic_collection(spec, 42);
    auto s2 = generate_synthetic_collection(spec, 42);
    CHECK(s1.truth == s2.truth);
    REQUIRE(s1.graph.inter_edges.size() == s2.graph.inter_edges.size());
    for (std::size_t k = 0; k < s1.graph.inter_edges.size(); ++k)
      CHECK(s1.graph.inter_edges[k].weight == s2.graph.inter_edges[k].weight);
    for (int i = 0; i < 4; ++i)
      for (int li = 0; li < int(s1.graph.images[i].levels.size()); ++li)
        for (std::size_t p = 0; p < s1.graph.images[i].levels[li].parts.size(); ++p) {
          CHECK(s1.graph.images[i].levels[li].parts[p].pixels ==
                s2.graph.images[i].levels[li].parts[p].pixels);
          CHECK(s1.graph.images[i].levels[li].parts[p].histogram ==
                s2.graph.images[i].levels[li].parts[p].histogram);
        }
  }

  SUBCASE("infeasible foreground is rejected") {
    spec.fg_fraction = 9.0;
    CHECK_THROWS_AS(generate_synthetic_collection(spec, 3), validation_error);
  }
}

TEST_CASE("save then load round-trips pixel sets and edge weights") {
  SynthSpec spec;
  spec.image_count = 3;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  spec.appearance_noise = 0.1;
  spec.dropout = 0.2;
  auto synth = generate_synthetic_collection(spec, 11);
  const auto dir = std::filesystem::temp_directory_path() / "coprop_roundtrip";
  std::filesystem::remove_all(dir);
  io::save_collection(synth.graph, dir.string());
  auto loaded = io::load_collection((dir / "manifest.json").string());
  CHECK(loaded.warnings.empty());

  const auto& a = synth.graph;
  const auto& b = loaded.graph;
  REQUIRE(a.images.size() == b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    REQUIRE(a.images[i].levels.size() == b.images[i].levels.size());
    for (std::size_t li = 0; li < a.images[i].levels.size(); ++li) {
      REQUIRE(a.images[i].levels[li].parts.size() == b.images[i].levels[li].parts.size());
      for (std::size_t p = 0; p < a.images[i].levels[li].parts.size(); ++p)
        CHECK(a.images[i].levels[li].parts[p].pixels == b.images[i].levels[li].parts[p].pixels);
    }
    CHECK(a.images[i].merge_level == b.images[i].merge_level);
  }
  REQUIRE(a.inter_edges.size() == b.inter_edges.size());
  for (std::size_t k = 0; k < a.inter_edges.size(); ++k) {
    CHECK(a.inter_edges[k].weight == b.inter_edges[k].weight);
    CHECK(a.inter_edges[k].part_a == b.inter_edges[k].part_a);
    CHECK(a.inter_edges[k].part_b == b.inter_edges[k].part_b);
  }
  CHECK(a.template_labels == b.template_labels);
  std::filesystem::remove_all(dir);
}

TEST_CASE("histograms are normalized after every ingestion path") {
  SynthSpec spec;
  spec.image_count = 2;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  spec.appearance_noise = 0.3;
  auto synth = generate_synthetic_collection(spec, 13);
  validate_collection(synth.graph);  // includes normalization checks

  // RGB path
  ImageRecord image = simple_image("rgb", 8, 8, 4);
  std::vector<unsigned char> rgb(8 * 8 * 3);
  Rng rng(17);
  for (auto& v : rgb) v = (unsigned char)rng.next_below(256);
  histograms_from_rgb(image, rgb);
  for (const auto& part : image.levels[0].parts) {
    double sum = 0.0;
    for (double v : part.histogram) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("mask rasterization uses a strict pixel majority") {
  auto image = simple_image("a", 4, 4, 2);
  MaskGrid mask(4, 4, 0);
  // part 0 covers (0..1)x(0..1): mark 3 of 4 -> foreground
  mask.at(0, 0) = mask.at(1, 0) = mask.at(0, 1) = 1;
  // part 1 covers (2..3)x(0..1): mark 2 of 4 -> tie -> background
  mask.at(2, 0) = mask.at(3, 0) = 1;
  auto labels = rasterize_mask(image, mask);
  CHECK(labels == std::vector<int>{1, 0, 0, 0});
  auto back = labels_to_mask(image, labels);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) CHECK(back.at(x, y) == 1);
  CHECK(back.at(2, 0) == 0);

  MaskGrid wrong(3, 3, 0);
  CHECK_THROWS_AS(rasterize_mask(image, wrong), validation_error);
}

TEST_CASE("seed bag includes only label-pure multi-level parts") {
  SynthSpec spec;
  spec.image_count = 2;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  auto synth = generate_synthetic_collection(spec, 19);
  const auto& image = synth.graph.images[0];
  const auto& labels = synth.truth[0];
  auto bag = seed_bag(image, labels);
  // base parts all present
  int base_count = 0;
  for (const auto& sp : bag)
    if (sp.level == image.base_level) {
      ++base_count;
      CHECK(sp.label == labels[sp.part]);
    } else {
      const auto& members = image.levels[sp.level].parts[sp.part].base_members;
      for (int m : members) CHECK(labels[m] == sp.label);
    }
  CHECK(base_count == image.part_count());
}

TEST_CASE("loader reports unreachable images as a warning") {
  SynthSpec spec;
  spec.image_count = 3;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  spec.dropout = 1.0;  // no edges at all
  auto synth = generate_synthetic_collection(spec, 23);
  const auto dir = std::filesystem::temp_directory_path() / "coprop_unreachable";
  std::filesystem::remove_all(dir);
  io::save_collection(synth.graph, dir.string());
  auto loaded = io::load_collection((dir / "manifest.json").string());
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("img1") != std::string::npos);
  CHECK(loaded.warnings[0].find("img2") != std::string::npos);
  CHECK(loaded.graph.unreachable_from_template() == std::vector<int>{1, 2});
  std::filesystem::remove_all(dir);
}

TEST_CASE("loader errors: missing files and dimension mismatches") {
  CHECK_THROWS_AS(io::load_collection("/nonexistent/manifest.json"), validation_error);

  SynthSpec spec;
  spec.image_count = 2;
  spec.width = 32;
  spec.height = 32;
  spec.part_size = 8;
  auto synth = generate_synthetic_collection(spec, 29);
  const auto dir = std::filesystem::temp_directory_path() / "coprop_badmask";
  std::filesystem::remove_all(dir);
  io::save_collection(synth.graph, dir.string());
  // corrupt the template mask dimensions
  io::write_mask((dir / "img0_template.mask").string(), MaskGrid(5, 5, 0));
  CHECK_THROWS_AS(io::load_collection((dir / "manifest.json").string()), validation_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("grid and correspondence files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "coprop_files";
  std::filesystem::create_directories(dir);
  LabelGrid grid(3, 2);
  for (int i = 0; i < 6; ++i) grid.values()[i] = i * 7 - 3;
  io::write_label_grid((dir / "g.labels").string(), grid);
  CHECK(io::read_label_grid((dir / "g.labels").string()) == grid);

  io::CorrFile corr{"a", "b", {{{1, 2}, {3, 4}, 0.675}, {{0, 0}, {5, 5}, 1.0}}};
  io::write_correspondences((dir / "c.corr").string(), corr);
  auto back = io::read_correspondences((dir / "c.corr").string());
  CHECK(back.source_id == "a");
  CHECK(back.target_id == "b");
  REQUIRE(back.pairs.size() == 2);
  CHECK(back.pairs[0].confidence == 0.675);
  CHECK(back.pairs[1].dst == Coord{5, 5});

  int w = 0, h = 0;
  std::vector<unsigned char> rgb{10, 20, 30, 40, 50, 60};
  io::write_rgb((dir / "i.rgb").string(), 2, 1, rgb);
  CHECK(io::read_rgb((dir / "i.rgb").string(), w, h) == rgb);
  CHECK(w == 2);
  CHECK(h == 1);
  std::filesystem::remove_all(dir);
}
