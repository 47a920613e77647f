#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "coprop/harness.hpp"
#include "coprop/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coprop;

namespace {

SynthSpec parse_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open spec file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error(std::string("malformed spec file: ") + e.what());
  }
  SynthSpec spec;
  spec.image_count = j.value("image_count", spec.image_count);
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  spec.part_size = j.value("part_size", spec.part_size);
  spec.fg_fraction = j.value("fg_fraction", spec.fg_fraction);
  spec.appearance_noise = j.value("appearance_noise", spec.appearance_noise);
  spec.dropout = j.value("dropout", spec.dropout);
  spec.false_rate = j.value("false_rate", spec.false_rate);
  spec.max_shift_tiles = j.value("max_shift_tiles", spec.max_shift_tiles);
  spec.working_level = j.value("working_level", spec.working_level);
  spec.coarse_level = j.value("coarse_level", spec.coarse_level);
  spec.confidence_threshold = j.value("confidence_threshold", spec.confidence_threshold);
  spec.template_index = j.value("template_index", spec.template_index);
  const std::string shape = j.value("shape", std::string("rect"));
  if (shape == "rect")
    spec.shape = SynthSpec::Shape::Rect;
  else if (shape == "disc")
    spec.shape = SynthSpec::Shape::Disc;
  else
    throw validation_error("unknown shape: " + shape);
  const std::string topology = j.value("topology", std::string("complete"));
  if (topology == "complete")
    spec.topology = SynthSpec::Topology::Complete;
  else if (topology == "chain")
    spec.topology = SynthSpec::Topology::Chain;
  else if (topology == "ring")
    spec.topology = SynthSpec::Topology::Ring;
  else
    throw validation_error("unknown topology: " + topology);
  return spec;
}

struct RunFlags {
  std::string manifest, out_dir;
  int runs = 5;
  double decay = 0.5, delta = 0.1, tau = 4.0, lambda_min = 0.2;
  int top_k = 3;
  double conf = -1.0;  // <0: use the manifest value
  double lambda_pairwise = 0.1;
  std::uint64_t seed = 1;
  std::string stage = "full_pipeline";
  int template_seeds = 1;
  bool trace = false, checkpoints = false, strict = false;
};

int cmd_run(const RunFlags& flags) {
  auto loaded = io::load_collection(
      flags.manifest, flags.conf >= 0.0 ? std::optional<double>(flags.conf) : std::nullopt);
  for (const auto& warning : loaded.warnings) std::cerr << "warning: " << warning << "\n";
  const CollectionGraph& graph = loaded.graph;

  PropagationParams params;
  params.runs = flags.runs;
  params.decay = flags.decay;
  params.lambda_pairwise = flags.lambda_pairwise;
  params.compat.delta = flags.delta;
  params.compat.tau = flags.tau;
  params.compat.lambda_min = flags.lambda_min;
  params.compat.top_k = flags.top_k;

  fs::create_directories(flags.out_dir);
  std::ofstream trace_out;
  if (flags.trace) {
    trace_out.open(fs::path(flags.out_dir) / "trace.txt");
    auto sink = [&trace_out](int sweep, double objective, double residual) {
      trace_out << sweep << ' ' << io::fmt_double(objective) << ' ' << io::fmt_double(residual)
                << '\n';
    };
    params.solver.trace = sink;
    params.joint.inner.trace = sink;
  }
  if (flags.checkpoints) {
    fs::create_directories(fs::path(flags.out_dir) / "checkpoints");
    params.checkpoint = [&flags](int run, int iteration, const LikelihoodStore& store) {
      std::ofstream out(fs::path(flags.out_dir) / "checkpoints" /
                        ("run" + std::to_string(run) + "_iter" + std::to_string(iteration) +
                         ".txt"));
      for (int i = 0; i < store.image_count(); ++i)
        for (int p = 0; p < store.part_count(i); ++p)
          out << i << ' ' << p << ' ' << io::fmt_double(store.fused(i, p)) << ' '
              << io::fmt_double(store.weight_sum(i, p)) << '\n';
    };
  }

  const Stage stage = stage_from_string(flags.stage);
  bool truth_available = true;
  for (int i = 0; i < int(graph.images.size()); ++i)
    if (i != graph.template_image && !graph.images[i].truth_mask) truth_available = false;

  StageResult result;
  if (!truth_available && stage == Stage::FullPipeline) {
    auto pipeline = run_pipeline(graph, params, flags.seed);
    result.converged = pipeline.converged;
    for (int i = 0; i < int(graph.images.size()); ++i)
      result.masks.emplace(i, pipeline.masks[i]);
    result.report.stage = stage_to_string(stage);
    std::cerr << "no truth masks; emitting masks without metrics\n";
  } else if (flags.template_seeds > 1) {
    result = run_stage_multi_template(graph, stage, params, flags.seed, flags.template_seeds);
  } else {
    result = run_stage(graph, stage, params, flags.seed);
  }

  for (const auto& [image, mask] : result.masks)
    io::write_mask((fs::path(flags.out_dir) / (graph.images[image].id + "_pred.mask")).string(),
                   mask);
  {
    std::ofstream out(fs::path(flags.out_dir) / "report.txt");
    out << report_to_text(result.report);
    std::ofstream js(fs::path(flags.out_dir) / "report.json");
    js << report_to_json(result.report);
  }
  std::cout << report_to_text(result.report);
  if (flags.strict && !result.converged) {
    std::cerr << "error: inference did not converge\n";
    return 3;
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed) {
  SynthSpec spec = parse_synth_spec(spec_path);
  auto synthetic = generate_synthetic_collection(spec, seed);
  io::save_collection(synthetic.graph, out_dir);
  std::cout << "wrote " << synthetic.graph.images.size() << " images to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir) {
  std::vector<std::pair<std::string, MaskMetrics>> rows;
  std::vector<fs::path> truth_files;
  for (const auto& entry : fs::directory_iterator(truth_dir))
    if (entry.path().extension() == ".mask") truth_files.push_back(entry.path());
  std::sort(truth_files.begin(), truth_files.end());
  for (const auto& truth_path : truth_files) {
    fs::path pred_path = fs::path(pred_dir) / truth_path.filename();
    if (!fs::exists(pred_path)) throw validation_error("missing prediction: " + pred_path.string());
    rows.push_back({truth_path.stem().string(),
                    evaluate_masks(io::read_mask(pred_path.string()),
                                   io::read_mask(truth_path.string()))});
  }
  if (rows.empty()) throw validation_error("no .mask files found in " + truth_dir);
  std::cout << report_to_text(make_report("eval", rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-segmentation by iterative belief propagation"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run a stage or the full pipeline on a collection");
  run->add_option("--manifest", run_flags.manifest, "collection manifest")->required();
  run->add_option("--out", run_flags.out_dir, "output directory")->required();
  run->add_option("--runs", run_flags.runs, "independent pipeline runs");
  run->add_option("--decay", run_flags.decay, "amortization decay per hop");
  run->add_option("--delta", run_flags.delta, "enrichment coefficient");
  run->add_option("--tau", run_flags.tau, "merge-level falloff");
  run->add_option("--lambda-min", run_flags.lambda_min, "finest merge level");
  run->add_option("--topk", run_flags.top_k, "appearance nearest neighbours");
  run->add_option("--conf", run_flags.conf, "correspondence confidence threshold");
  run->add_option("--lambda-pairwise", run_flags.lambda_pairwise, "graph-cut smoothing");
  run->add_option("--seed", run_flags.seed, "random seed");
  run->add_option("--stage", run_flags.stage,
                  "corr_only | corr_plus_cut | single_inference | joint_inference | full_pipeline");
  run->add_option("--template-seeds", run_flags.template_seeds,
                  "average the stage over this many random template choices");
  run->add_flag("--trace", run_flags.trace, "write per-sweep solver rows");
  run->add_flag("--checkpoints", run_flags.checkpoints, "dump the likelihood store per iteration");
  run->add_flag("--strict", run_flags.strict, "exit 3 when inference does not converge");

  std::string synth_spec, synth_out;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic collection");
  synth->add_option("--spec", synth_spec, "generator parameters (json)")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "random seed")->required();

  std::string eval_pred, eval_truth;
  auto* eval = app.add_subcommand("eval", "compare predicted masks against truth masks");
  eval->add_option("--pred", eval_pred, "directory of predicted masks")->required();
  eval->add_option("--truth", eval_truth, "directory of truth masks")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out, synth_seed);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_truth);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
