#include "coprop/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"

namespace coprop {

using nlohmann::json;

MaskMetrics evaluate_masks(const MaskGrid& predicted, const MaskGrid& truth) {
  if (predicted.width() != truth.width() || predicted.height() != truth.height())
    throw validation_error("mask dimensions mismatch in evaluation");
  long correct = 0, inter = 0, uni = 0;
  const auto& p = predicted.values();
  const auto& t = truth.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    correct += (p[i] != 0) == (t[i] != 0);
    inter += p[i] != 0 && t[i] != 0;
    uni += p[i] != 0 || t[i] != 0;
  }
  MaskMetrics m;
  m.precision = 100.0 * double(correct) / double(p.size());
  m.jaccard = uni == 0 ? 100.0 : 100.0 * double(inter) / double(uni);
  return m;
}

EvalReport make_report(const std::string& stage,
                       const std::vector<std::pair<std::string, MaskMetrics>>& entries) {
  EvalReport report;
  report.stage = stage;
  for (const auto& [id, metrics] : entries) report.per_image.push_back({id, metrics});
  if (!entries.empty()) {
    for (const auto& [id, metrics] : entries) {
      report.average.precision += metrics.precision;
      report.average.jaccard += metrics.jaccard;
    }
    report.average.precision /= double(entries.size());
    report.average.jaccard /= double(entries.size());
  }
  return report;
}

std::string report_to_text(const EvalReport& report) {
  std::string out = "stage: " + report.stage + "\n";
  out += "image                            P        J\n";
  char line[128];
  for (const auto& entry : report.per_image) {
    std::snprintf(line, sizeof line, "%-28s %8.4f %8.4f\n", entry.image_id.c_str(),
                  entry.metrics.precision, entry.metrics.jaccard);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-28s %8.4f %8.4f\n", "average", report.average.precision,
                report.average.jaccard);
  out += line;
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["stage"] = report.stage;
  j["average"] = {{"precision", report.average.precision}, {"jaccard", report.average.jaccard}};
  j["images"] = json::array();
  for (const auto& entry : report.per_image)
    j["images"].push_back({{"id", entry.image_id},
                           {"precision", entry.metrics.precision},
                           {"jaccard", entry.metrics.jaccard}});
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  EvalReport report;
  report.stage = j.at("stage").get<std::string>();
  report.average.precision = j.at("average").at("precision").get<double>();
  report.average.jaccard = j.at("average").at("jaccard").get<double>();
  for (const auto& entry : j.at("images"))
    report.per_image.push_back({entry.at("id").get<std::string>(),
                                {entry.at("precision").get<double>(),
                                 entry.at("jaccard").get<double>()}});
  return report;
}

Stage stage_from_string(const std::string& name) {
  if (name == "corr_only") return Stage::CorrOnly;
  if (name == "corr_plus_cut") return Stage::CorrPlusCut;
  if (name == "single_inference") return Stage::SingleInference;
  if (name == "joint_inference") return Stage::JointInference;
  if (name == "full_pipeline") return Stage::FullPipeline;
  throw validation_error("unknown stage: " + name);
}

std::string stage_to_string(Stage stage) {
  switch (stage) {
    case Stage::CorrOnly: return "corr_only";
    case Stage::CorrPlusCut: return "corr_plus_cut";
    case Stage::SingleInference: return "single_inference";
    case Stage::JointInference: return "joint_inference";
    case Stage::FullPipeline: return "full_pipeline";
  }
  return "";
}

namespace {

// Parts of a template-adjacent image touched by template-foreground
// correspondences, in either direction.
std::vector<int> corr_hit_labels(const CollectionGraph& graph, int target) {
  const int tmpl = graph.template_image;
  const auto& tmpl_base = graph.images[tmpl].base();
  const auto& target_base = graph.images[target].base();
  std::vector<int> labels(graph.images[target].part_count(), 0);
  if (const auto* fwd = graph.corr_between(tmpl, target))
    for (const auto& pp : fwd->pairs)
      if (graph.template_labels[tmpl_base.part_index.at(pp.src)] == 1)
        labels[target_base.part_index.at(pp.dst)] = 1;
  if (const auto* bwd = graph.corr_between(target, tmpl))
    for (const auto& pp : bwd->pairs)
      if (graph.template_labels[tmpl_base.part_index.at(pp.dst)] == 1)
        labels[target_base.part_index.at(pp.src)] = 1;
  return labels;
}

std::vector<int> cut_labels(const CollectionGraph& graph, int image,
                            const std::vector<double>& likelihoods,
                            const PropagationParams& params) {
  const auto intra = intra_pairwise(graph.images[image], params.compat);
  return min_cut(build_cut_problem(likelihoods, intra, params.lambda_pairwise)).labels;
}

BinaryMrf stage_target_mrf(const CollectionGraph& graph, int target,
                           const PropagationParams& params) {
  const auto local = local_potentials(graph, graph.template_image, graph.template_labels, target,
                                      params.compat);
  BinaryMrf mrf;
  for (int p = 0; p < graph.images[target].part_count(); ++p)
    mrf.add_node(local.theta_b[p], local.theta_f[p], 1.0);
  for (const auto& pot : intra_pairwise(graph.images[target], params.compat))
    mrf.add_attractive_edge(pot.part_i, pot.part_j, pot.weight, 1.0);
  return mrf;
}

}  // namespace

StageResult run_stage(const CollectionGraph& graph, Stage stage, const PropagationParams& params,
                      std::uint64_t rng_seed) {
  StageResult result;
  std::vector<std::pair<std::string, MaskMetrics>> rows;

  auto require_truth = [&](int image) -> const MaskGrid& {
    if (!graph.images[image].truth_mask)
      throw validation_error("stage evaluation requires a truth mask for image " +
                             graph.images[image].id);
    return *graph.images[image].truth_mask;
  };

  if (stage == Stage::FullPipeline) {
    auto pipeline = run_pipeline(graph, params, rng_seed);
    result.converged = pipeline.converged;
    for (int i = 0; i < int(graph.images.size()); ++i) {
      if (i == graph.template_image) continue;
      result.masks.emplace(i, pipeline.masks[i]);
      rows.push_back({graph.images[i].id, evaluate_masks(pipeline.masks[i], require_truth(i))});
    }
    result.report = make_report(stage_to_string(stage), rows);
    return result;
  }

  const auto targets = graph.images_adjacent_to(graph.template_image);
  if (targets.empty())
    throw validation_error("stage requires template-adjacent images and none exist");

  std::vector<std::vector<int>> labels(targets.size());
  if (stage == Stage::CorrOnly || stage == Stage::CorrPlusCut) {
    for (int k = 0; k < int(targets.size()); ++k) {
      labels[k] = corr_hit_labels(graph, targets[k]);
      if (stage == Stage::CorrPlusCut) {
        std::vector<double> likelihoods(labels[k].begin(), labels[k].end());
        labels[k] = cut_labels(graph, targets[k], likelihoods, params);
      }
    }
  } else {
    // single inference per target, optionally refined jointly
    std::vector<BinaryMrf> mrfs;
    std::vector<BeliefState> beliefs;
    bool converged = true;
    for (int target : targets) {
      BinaryMrf mrf = stage_target_mrf(graph, target, params);
      SolveOptions opts = params.solver;
      opts.mode = SolveMode::Concave;
      auto solved = cbp_solve(mrf, opts);
      converged &= solved.converged;
      beliefs.push_back(std::move(solved.beliefs));
      mrfs.push_back(std::move(mrf));
    }
    if (stage == Stage::JointInference) {
      CouplingGraph coupling;
      std::map<int, int> slot;
      for (int k = 0; k < int(targets.size()); ++k) {
        coupling.nodes_per_image.push_back(graph.images[targets[k]].part_count());
        slot[targets[k]] = k;
      }
      for (const auto& e : graph.inter_edges) {
        auto a = slot.find(e.image_a), b = slot.find(e.image_b);
        if (a != slot.end() && b != slot.end())
          coupling.edges.push_back({a->second, e.part_a, b->second, e.part_b, e.weight});
      }
      ExtendedOptions joint = params.joint;
      joint.inner.mode = SolveMode::Concave;
      auto refined = extended_solve(mrfs, coupling, joint, &beliefs);
      converged &= refined.converged;
      beliefs = std::move(refined.beliefs);
    }
    result.converged = converged;
    for (int k = 0; k < int(targets.size()); ++k) {
      std::vector<double> likelihoods(graph.images[targets[k]].part_count());
      for (int p = 0; p < int(likelihoods.size()); ++p) likelihoods[p] = beliefs[k].fg(p);
      labels[k] = cut_labels(graph, targets[k], likelihoods, params);
    }
  }

  for (int k = 0; k < int(targets.size()); ++k) {
    MaskGrid mask = labels_to_mask(graph.images[targets[k]], labels[k]);
    rows.push_back({graph.images[targets[k]].id, evaluate_masks(mask, require_truth(targets[k]))});
    result.masks.emplace(targets[k], std::move(mask));
  }
  result.report = make_report(stage_to_string(stage), rows);
  return result;
}

CollectionGraph with_template(const CollectionGraph& graph, int image) {
  if (image < 0 || image >= int(graph.images.size()))
    throw validation_error("template index out of range");
  if (!graph.images[image].truth_mask)
    throw validation_error("image " + graph.images[image].id +
                           " has no truth mask to serve as template");
  CollectionGraph out = graph;
  out.template_image = image;
  out.template_labels = rasterize_mask(out.images[image], *out.images[image].truth_mask);
  return out;
}

StageResult run_stage_multi_template(const CollectionGraph& graph, Stage stage,
                                     const PropagationParams& params, std::uint64_t rng_seed,
                                     int template_count) {
  const int n = int(graph.images.size());
  if (template_count < 1 || template_count > n)
    throw validation_error("invalid template count");
  Rng rng(rng_seed ^ 0x7424e9a6c1d5f30bULL);
  std::set<int> chosen;
  while (int(chosen.size()) < template_count) chosen.insert(int(rng.next_below(n)));

  StageResult combined;
  std::vector<std::pair<std::string, MaskMetrics>> rows;
  for (int tmpl : chosen) {
    CollectionGraph variant = with_template(graph, tmpl);
    StageResult one = run_stage(variant, stage, params, rng_seed);
    combined.converged &= one.converged;
    for (const auto& entry : one.report.per_image)
      rows.push_back({variant.images[tmpl].id + "/" + entry.image_id, entry.metrics});
  }
  combined.report = make_report(stage_to_string(stage), rows);
  return combined;
}

}  // namespace coprop
