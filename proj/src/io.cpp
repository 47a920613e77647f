#include "coprop/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace coprop::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // trim to the shortest representation that still round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

namespace {

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw validation_error("cannot open file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw validation_error("cannot write file: " + path);
  return out;
}

void expect_magic(std::istream& in, const char* magic, const std::string& path) {
  std::string word;
  if (!(in >> word) || word != magic)
    throw validation_error("bad header in " + path + " (expected " + magic + ")");
}

template <typename T>
PixelGrid<T> read_grid(const std::string& path, const char* magic) {
  auto in = open_in(path);
  expect_magic(in, magic, path);
  int w = 0, h = 0;
  if (!(in >> w >> h) || w <= 0 || h <= 0)
    throw validation_error("bad dimensions in " + path);
  PixelGrid<T> grid(w, h);
  for (auto& v : grid.values())
    if (!(in >> v)) throw validation_error("truncated grid in " + path);
  return grid;
}

template <typename T>
void write_grid(const std::string& path, const char* magic, const PixelGrid<T>& grid) {
  auto out = open_out(path);
  out << magic << ' ' << grid.width() << ' ' << grid.height() << '\n';
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) out << grid.at(x, y) << (x + 1 < grid.width() ? ' ' : '\n');
  }
}

}  // namespace

LabelGrid read_label_grid(const std::string& path) { return read_grid<int>(path, "P_LABELS"); }
void write_label_grid(const std::string& path, const LabelGrid& grid) {
  write_grid(path, "P_LABELS", grid);
}

MaskGrid read_mask(const std::string& path) {
  auto mask = read_grid<int>(path, "P_MASK");
  for (int v : mask.values())
    if (v != 0 && v != 1) throw validation_error("mask entry not in {0,1} in " + path);
  return mask;
}
void write_mask(const std::string& path, const MaskGrid& mask) { write_grid(path, "P_MASK", mask); }

std::vector<unsigned char> read_rgb(const std::string& path, int& width, int& height) {
  auto in = open_in(path, true);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  if (!(hs >> magic >> width >> height) || magic != "P_RGB" || width <= 0 || height <= 0)
    throw validation_error("bad header in " + path);
  std::vector<unsigned char> rgb(std::size_t(width) * height * 3);
  in.read(reinterpret_cast<char*>(rgb.data()), std::streamsize(rgb.size()));
  if (in.gcount() != std::streamsize(rgb.size()))
    throw validation_error("truncated RGB grid in " + path);
  return rgb;
}

void write_rgb(const std::string& path, int width, int height,
               const std::vector<unsigned char>& rgb) {
  auto out = open_out(path, true);
  out << "P_RGB " << width << ' ' << height << '\n';
  out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
}

std::vector<MergeRow> read_merge_table(const std::string& path) {
  auto in = open_in(path);
  std::vector<MergeRow> rows;
  MergeRow row;
  while (in >> row.part_a >> row.part_b >> row.lambda) rows.push_back(row);
  if (!in.eof()) throw validation_error("malformed merge table: " + path);
  return rows;
}

void write_merge_table(const std::string& path, const std::vector<MergeRow>& rows) {
  auto out = open_out(path);
  for (const auto& row : rows)
    out << row.part_a << ' ' << row.part_b << ' ' << fmt_double(row.lambda) << '\n';
}

std::vector<HistRow> read_histogram_table(const std::string& path) {
  auto in = open_in(path);
  std::vector<HistRow> rows;
  int part_id;
  while (in >> part_id) {
    HistRow row;
    row.part_id = part_id;
    row.values.resize(kHistSize);
    for (auto& v : row.values)
      if (!(in >> v)) throw validation_error("truncated histogram row in " + path);
    rows.push_back(std::move(row));
  }
  if (!in.eof()) throw validation_error("malformed histogram table: " + path);
  return rows;
}

void write_histogram_table(const std::string& path, const std::vector<HistRow>& rows) {
  auto out = open_out(path);
  for (const auto& row : rows) {
    out << row.part_id;
    for (double v : row.values) out << ' ' << fmt_double(v);
    out << '\n';
  }
}

CorrFile read_correspondences(const std::string& path) {
  auto in = open_in(path);
  expect_magic(in, "CORR", path);
  CorrFile file;
  if (!(in >> file.source_id >> file.target_id))
    throw validation_error("bad correspondence header in " + path);
  PixelPair pp;
  while (in >> pp.src.x >> pp.src.y >> pp.dst.x >> pp.dst.y >> pp.confidence)
    file.pairs.push_back(pp);
  if (!in.eof()) throw validation_error("malformed correspondence file: " + path);
  return file;
}

void write_correspondences(const std::string& path, const CorrFile& file) {
  auto out = open_out(path);
  out << "CORR " << file.source_id << ' ' << file.target_id << '\n';
  for (const auto& pp : file.pairs)
    out << pp.src.x << ' ' << pp.src.y << ' ' << pp.dst.x << ' ' << pp.dst.y << ' '
        << fmt_double(pp.confidence) << '\n';
}

namespace {

// Per level: original grid label -> (part index, original pixel count).
struct LevelRemap {
  std::map<int, int> part_of_label;
  std::map<int, int> count_of_label;
};

void apply_histogram_table(ImageRecord& image, const std::vector<LevelRemap>& remaps,
                           const std::vector<HistRow>& rows, const std::string& path) {
  struct Acc {
    std::vector<double> sum;
    double weight = 0.0;
  };
  std::vector<std::vector<Acc>> acc(image.levels.size());
  for (int li = 0; li < int(image.levels.size()); ++li)
    acc[li].resize(image.levels[li].parts.size());
  for (const auto& row : rows) {
    int hit_level = -1;
    for (int li = 0; li < int(image.levels.size()); ++li) {
      if (!remaps[li].part_of_label.count(row.part_id)) continue;
      if (hit_level >= 0)
        throw validation_error("ambiguous part id " + std::to_string(row.part_id) + " in " + path +
                               " (labels must be unique across levels)");
      hit_level = li;
    }
    if (hit_level < 0)
      throw validation_error("histogram row for unknown part " + std::to_string(row.part_id) +
                             " in " + path);
    double sum = 0.0;
    for (double v : row.values) {
      if (v < 0.0) throw validation_error("negative histogram value in " + path);
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw validation_error("unnormalized histogram row in " + path);
    int part = remaps[hit_level].part_of_label.at(row.part_id);
    double w = remaps[hit_level].count_of_label.at(row.part_id);
    auto& a = acc[hit_level][part];
    if (a.sum.empty()) a.sum.assign(kHistSize, 0.0);
    for (int u = 0; u < kHistSize; ++u) a.sum[u] += w * row.values[u];
    a.weight += w;
  }
  for (int li = 0; li < int(image.levels.size()); ++li)
    for (int pi = 0; pi < int(image.levels[li].parts.size()); ++pi) {
      auto& a = acc[li][pi];
      if (a.weight <= 0.0)
        throw validation_error("histogram table misses part " + std::to_string(pi) + " of image " +
                               image.id);
      auto& hist = image.levels[li].parts[pi].histogram;
      hist.resize(kHistSize);
      double total = 0.0;
      for (double v : a.sum) total += v;
      for (int u = 0; u < kHistSize; ++u) hist[u] = a.sum[u] / total;
    }
}

}  // namespace

LoadResult load_collection(const std::string& manifest_path,
                           std::optional<double> confidence_override) {
  auto in = open_in(manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw validation_error("malformed manifest " + manifest_path + ": " + e.what());
  }
  const fs::path root = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& rel) { return (root / rel).string(); };

  try {
    double working_level = manifest.value("working_level", 0.15);
    double threshold = confidence_override.value_or(manifest.value("confidence_threshold", 0.5));
    if (!manifest.contains("images") || !manifest.contains("template"))
      throw validation_error("manifest must list images and a template");

    std::vector<ImageRecord> images;
    std::vector<std::vector<LevelRemap>> remaps;
    std::map<std::string, std::optional<MaskGrid>> truth_masks;
    for (const auto& entry : manifest.at("images")) {
      ImageRecord image;
      image.id = entry.at("id").get<std::string>();
      image.width = entry.at("width").get<int>();
      image.height = entry.at("height").get<int>();
      std::vector<LevelRemap> image_remaps;
      for (const auto& lv : entry.at("labels")) {
        double level = lv.at("level").get<double>();
        LabelGrid grid = read_label_grid(resolve(lv.at("path").get<std::string>()));
        if (grid.width() != image.width || grid.height() != image.height)
          throw validation_error("label grid dimensions mismatch for image " + image.id);
        LevelRemap remap;
        for (int v : grid.values()) ++remap.count_of_label[v];
        LevelParts parts = build_level_parts(grid, level, 4, &remap.part_of_label);
        image.levels.push_back(std::move(parts));
        image_remaps.push_back(std::move(remap));
      }
      // keep remaps aligned with the level sort inside finalize_image
      std::vector<int> order(image.levels.size());
      for (int i = 0; i < int(order.size()); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return image.levels[a].level < image.levels[b].level;
      });
      std::vector<LevelRemap> sorted_remaps;
      for (int i : order) sorted_remaps.push_back(std::move(image_remaps[i]));

      if (entry.contains("merge_table")) {
        auto rows = read_merge_table(resolve(entry.at("merge_table").get<std::string>()));
        // base level index after sorting
        int base = -1;
        for (int i = 0; i < int(order.size()); ++i)
          if (std::abs(image.levels[order[i]].level - working_level) < 1e-9) base = i;
        if (base < 0)
          throw validation_error("image " + image.id + " provides no parts at the working level");
        const auto& remap = sorted_remaps[base];
        for (const auto& row : rows) {
          if (!remap.part_of_label.count(row.part_a) || !remap.part_of_label.count(row.part_b))
            throw validation_error("merge table references unknown part in image " + image.id);
          int a = remap.part_of_label.at(row.part_a);
          int b = remap.part_of_label.at(row.part_b);
          if (a == b) continue;  // endpoints absorbed into one part
          auto key = std::make_pair(std::min(a, b), std::max(a, b));
          auto [it, fresh] = image.merge_level.try_emplace(key, row.lambda);
          if (!fresh) it->second = std::min(it->second, row.lambda);
        }
      }

      if (entry.contains("truth_mask"))
        truth_masks[image.id] = read_mask(resolve(entry.at("truth_mask").get<std::string>()));

      finalize_image(image, working_level);

      if (entry.contains("histograms")) {
        auto rows = read_histogram_table(resolve(entry.at("histograms").get<std::string>()));
        apply_histogram_table(image, sorted_remaps, rows,
                              entry.at("histograms").get<std::string>());
      } else if (entry.contains("rgb")) {
        int w = 0, h = 0;
        auto rgb = read_rgb(resolve(entry.at("rgb").get<std::string>()), w, h);
        if (w != image.width || h != image.height)
          throw validation_error("RGB grid dimensions mismatch for image " + image.id);
        histograms_from_rgb(image, rgb);
      } else {
        throw validation_error("image " + image.id + " provides neither histograms nor rgb");
      }
      images.push_back(std::move(image));
      remaps.push_back(std::move(sorted_remaps));
    }

    auto index_of = [&](const std::string& id) {
      for (int i = 0; i < int(images.size()); ++i)
        if (images[i].id == id) return i;
      throw validation_error("unknown image id: " + id);
    };

    std::vector<Correspondence> corrs;
    if (manifest.contains("correspondences"))
      for (const auto& rel : manifest.at("correspondences")) {
        CorrFile file = read_correspondences(resolve(rel.get<std::string>()));
        Correspondence c;
        c.source_image = index_of(file.source_id);
        c.target_image = index_of(file.target_id);
        c.pairs = std::move(file.pairs);
        corrs.push_back(std::move(c));
      }

    LoadResult result;
    result.graph = build_parts_graph(std::move(images), corrs, threshold, working_level);
    for (auto& [id, mask] : truth_masks)
      result.graph.images[result.graph.image_index(id)].truth_mask = std::move(mask);

    const auto& tmpl = manifest.at("template");
    int tmpl_image = result.graph.image_index(tmpl.at("image").get<std::string>());
    if (tmpl_image < 0)
      throw validation_error("unknown template image id: " +
                             tmpl.at("image").get<std::string>());
    MaskGrid tmpl_mask = read_mask(resolve(tmpl.at("mask").get<std::string>()));
    if (tmpl_mask.width() != result.graph.images[tmpl_image].width ||
        tmpl_mask.height() != result.graph.images[tmpl_image].height)
      throw validation_error("template mask dimensions mismatch");
    result.graph.template_image = tmpl_image;
    result.graph.template_labels = rasterize_mask(result.graph.images[tmpl_image], tmpl_mask);

    validate_collection(result.graph);
    auto unreachable = result.graph.unreachable_from_template();
    if (!unreachable.empty()) {
      std::string msg = "images unreachable from the template:";
      for (int i : unreachable) msg += " " + result.graph.images[i].id;
      result.warnings.push_back(msg);
    }
    return result;
  } catch (const json::exception& e) {
    throw validation_error("malformed manifest " + manifest_path + ": " + e.what());
  }
}

void save_collection(const CollectionGraph& graph, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["working_level"] = graph.working_level;
  manifest["confidence_threshold"] = graph.confidence_threshold;
  manifest["images"] = json::array();

  // Written labels are part indexes offset by 100000 per level so that ids stay
  // unique across levels within one image.
  constexpr int kLevelStride = 100000;
  for (const auto& image : graph.images) {
    json entry;
    entry["id"] = image.id;
    entry["width"] = image.width;
    entry["height"] = image.height;
    entry["labels"] = json::array();
    std::vector<HistRow> hist_rows;
    for (int li = 0; li < int(image.levels.size()); ++li) {
      const auto& level = image.levels[li];
      LabelGrid grid(image.width, image.height);
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
          grid.at(x, y) = level.part_index.at(x, y) + li * kLevelStride;
      std::string name = image.id + "_L" + std::to_string(li) + ".labels";
      write_label_grid((fs::path(dir) / name).string(), grid);
      entry["labels"].push_back({{"level", level.level}, {"path", name}});
      for (int pi = 0; pi < int(level.parts.size()); ++pi)
        hist_rows.push_back({pi + li * kLevelStride, level.parts[pi].histogram});
    }
    std::vector<MergeRow> merge_rows;
    for (const auto& [key, lambda] : image.merge_level)
      merge_rows.push_back({key.first + image.base_level * kLevelStride,
                            key.second + image.base_level * kLevelStride, lambda});
    std::string merge_name = image.id + ".merge";
    write_merge_table((fs::path(dir) / merge_name).string(), merge_rows);
    entry["merge_table"] = merge_name;
    std::string hist_name = image.id + ".hist";
    write_histogram_table((fs::path(dir) / hist_name).string(), hist_rows);
    entry["histograms"] = hist_name;
    if (image.truth_mask) {
      std::string truth_name = image.id + "_truth.mask";
      write_mask((fs::path(dir) / truth_name).string(), *image.truth_mask);
      entry["truth_mask"] = truth_name;
    }
    manifest["images"].push_back(entry);
  }

  manifest["correspondences"] = json::array();
  for (const auto& corr : graph.correspondences) {
    CorrFile file;
    file.source_id = graph.images[corr.source_image].id;
    file.target_id = graph.images[corr.target_image].id;
    file.pairs = corr.pairs;
    std::string name = file.source_id + "_" + file.target_id + ".corr";
    write_correspondences((fs::path(dir) / name).string(), file);
    manifest["correspondences"].push_back(name);
  }

  if (graph.template_image >= 0) {
    const auto& tmpl = graph.images[graph.template_image];
    MaskGrid mask = labels_to_mask(tmpl, graph.template_labels);
    std::string name = tmpl.id + "_template.mask";
    write_mask((fs::path(dir) / name).string(), mask);
    manifest["template"] = {{"image", tmpl.id}, {"mask", name}};
  }

  auto out = open_out((fs::path(dir) / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace coprop::io
