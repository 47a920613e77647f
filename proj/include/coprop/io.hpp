#pragma once

#include <string>
#include <vector>

#include "coprop/collection.hpp"

namespace coprop::io {

// Shortest decimal that round-trips the double exactly.
std::string fmt_double(double v);

// `P_LABELS width height` followed by width*height integers, row-major.
LabelGrid read_label_grid(const std::string& path);
void write_label_grid(const std::string& path, const LabelGrid& grid);

// `P_MASK width height` followed by width*height entries in {0,1}.
MaskGrid read_mask(const std::string& path);
void write_mask(const std::string& path, const MaskGrid& mask);

// `P_RGB width height` followed by 3 raw bytes per pixel, row-major.
std::vector<unsigned char> read_rgb(const std::string& path, int& width, int& height);
void write_rgb(const std::string& path, int width, int height,
               const std::vector<unsigned char>& rgb);

struct MergeRow {
  int part_a = 0, part_b = 0;
  double lambda = 1.0;
};
std::vector<MergeRow> read_merge_table(const std::string& path);
void write_merge_table(const std::string& path, const std::vector<MergeRow>& rows);

struct HistRow {
  int part_id = 0;
  std::vector<double> values;  // kHistSize entries
};
std::vector<HistRow> read_histogram_table(const std::string& path);
void write_histogram_table(const std::string& path, const std::vector<HistRow>& rows);

// `CORR src_image dst_image` followed by rows `sx sy dx dy confidence`.
struct CorrFile {
  std::string source_id, target_id;
  std::vector<PixelPair> pairs;
};
CorrFile read_correspondences(const std::string& path);
void write_correspondences(const std::string& path, const CorrFile& file);

struct LoadResult {
  CollectionGraph graph;
  std::vector<std::string> warnings;
};

// Reads a JSON manifest plus every file it references, builds and validates the
// collection graph. Throws validation_error on malformed input; images the
// template cannot reach are reported as warnings. `confidence_override`
// replaces the manifest's correspondence threshold.
LoadResult load_collection(const std::string& manifest_path,
                           std::optional<double> confidence_override = std::nullopt);

// Writes label grids, merge tables, histogram tables, correspondences, masks
// and a manifest.json under `dir` such that load_collection reproduces the graph.
void save_collection(const CollectionGraph& graph, const std::string& dir);

}  // namespace coprop::io
