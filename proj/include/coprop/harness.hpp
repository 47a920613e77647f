#pragma once

#include <map>
#include <string>

#include "coprop/propagation.hpp"

namespace coprop {

struct MaskMetrics {
  double precision = 0.0;  // percent of correctly labeled pixels
  double jaccard = 0.0;    // percent intersection over union of foregrounds
};

// Throws validation_error on dimension mismatch. J is 100 when both
// foregrounds are empty.
MaskMetrics evaluate_masks(const MaskGrid& predicted, const MaskGrid& truth);

struct EvalEntry {
  std::string image_id;
  MaskMetrics metrics;
};

struct EvalReport {
  std::string stage;
  std::vector<EvalEntry> per_image;
  MaskMetrics average;
};

EvalReport make_report(const std::string& stage,
                       const std::vector<std::pair<std::string, MaskMetrics>>& entries);

std::string report_to_text(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

enum class Stage { CorrOnly, CorrPlusCut, SingleInference, JointInference, FullPipeline };

Stage stage_from_string(const std::string& name);
std::string stage_to_string(Stage stage);

struct StageResult {
  EvalReport report;
  std::map<int, MaskGrid> masks;  // evaluated image index -> predicted mask
  bool converged = true;
};

// Staged evaluation. The intermediate stages run over the images adjacent to
// the template; the full pipeline evaluates every non-template image. Images
// must carry truth masks.
StageResult run_stage(const CollectionGraph& graph, Stage stage, const PropagationParams& params,
                      std::uint64_t rng_seed);

// Re-anchors the collection on another image, pinning its labels from its
// truth mask (synthetic collections let any image act as the template).
CollectionGraph with_template(const CollectionGraph& graph, int image);

// Averages run_stage over `template_count` distinct template choices drawn
// with rng_seed; per-image rows keep the template id as a prefix.
StageResult run_stage_multi_template(const CollectionGraph& graph, Stage stage,
                                     const PropagationParams& params, std::uint64_t rng_seed,
                                     int template_count);

}  // namespace coprop
