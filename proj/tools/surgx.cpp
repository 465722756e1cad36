// surgx: command-line front end for the neuron-concept explanation engine.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "surgx/surgx.hpp"

namespace {

struct PipelineFlags {
  std::string container;
  std::vector<std::string> concepts;
  std::string phase_texts;
  std::string out = "surgx_out";
  std::string layer;
  std::string strategy = "video-threshold";
  std::optional<std::size_t> k;
  std::optional<double> alpha;
  std::size_t n_prev = 9;
  double dilation_s = 5.0;
  std::string theta = "auto";
  bool no_dedup = false;
  std::string importance = "relative:0.8";
  std::string backend = "auto";
  bool deterministic = false;
  std::size_t workers = 1;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f, bool needs_concepts = true) {
  cmd->add_option("--container,-c", f.container, "Container directory (manifest.json + tensors)")->required();
  auto* c = cmd->add_option("--concepts", f.concepts, "Concept set (.jsonl with a sibling .f32bin); repeatable");
  if (needs_concepts) c->required();
  cmd->add_option("--phase-texts", f.phase_texts, "phase_texts.json (default: <container>/phase_texts.json)");
  cmd->add_option("--out,-o", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--layer", f.layer, "Layer id (default: the penultimate layer)");
  cmd->add_option("--strategy", f.strategy, "{global|video}-{topk|threshold}")->capture_default_str();
  cmd->add_option("--k", f.k, "K for top-K selection (default 40 global, 1 per video)");
  cmd->add_option("--alpha", f.alpha, "alpha for threshold selection (default 0.95)");
  cmd->add_option("--n-prev", f.n_prev, "Previous frames per representative sequence")->capture_default_str();
  cmd->add_option("--dilation-s", f.dilation_s, "Seconds between sequence frames")->capture_default_str();
  cmd->add_option("--theta", f.theta, "Annotation threshold: auto (mean + 2 std) or a number")->capture_default_str();
  cmd->add_flag("--no-dedup", f.no_dedup, "Score every sequence slot instead of unique frames");
  cmd->add_option("--importance", f.importance, "topk:<k> or relative:<beta>")->capture_default_str();
  cmd->add_option("--backend", f.backend, "Contribution backend: auto, linear or gradient")->capture_default_str();
  cmd->add_flag("--deterministic", f.deterministic, "Omit timestamps from reports");
  cmd->add_option("--workers,-j", f.workers, "Worker threads (results do not depend on it)")->capture_default_str();
}

surgx::RunConfig to_run_config(const PipelineFlags& f) {
  surgx::RunConfig cfg;
  cfg.container = f.container;
  for (const auto& c : f.concepts) cfg.concepts.emplace_back(c);
  if (!f.phase_texts.empty()) cfg.phase_texts = f.phase_texts;
  cfg.out = f.out;
  if (!f.layer.empty()) cfg.layer = f.layer;
  cfg.analysis.strategy = surgx::SelectionStrategy::parse(f.strategy, f.k, f.alpha);
  cfg.analysis.sequence = {f.n_prev, f.dilation_s};
  cfg.analysis.sequence.validate();
  cfg.analysis.theta = surgx::ThetaRule::parse(f.theta);
  cfg.analysis.dedup = !f.no_dedup;
  cfg.importance = surgx::ImportanceRule::parse(f.importance);
  cfg.backend = surgx::parse_backend(f.backend);
  cfg.deterministic = f.deterministic;
  cfg.workers = f.workers;
  return cfg;
}

void print(const surgx::StageSummary& s) {
  for (const auto& line : s.lines) std::cout << "[" << s.stage << "] " << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surgx: explain surgical phase-recognition predictions with neuron-concept associations"};
  app.require_subcommand(1);

  PipelineFlags flags;
  std::string grid = "all", grid_file, concept_name, gt, pred;
  std::size_t max_cards = 12;
  bool with_ablation = false;

  auto* select = app.add_subcommand("select", "Select representative sequences per neuron");
  add_pipeline_flags(select, flags, false);
  auto* annotate = app.add_subcommand("annotate", "Score concepts and annotate neurons");
  add_pipeline_flags(annotate, flags);
  auto* explain = app.add_subcommand("explain", "Explain every test frame from its highly contributing neurons");
  add_pipeline_flags(explain, flags);
  auto* evaluate = app.add_subcommand("evaluate", "Concept alignment and prediction interpretability scores");
  add_pipeline_flags(evaluate, flags);
  auto* involvement = app.add_subcommand("involvement", "Fraction of frames whose important neurons carry a concept");
  add_pipeline_flags(involvement, flags);
  involvement->add_option("--concept", concept_name, "Concept id or text")->required();
  involvement->add_option("--gt", gt, "Keep frames with this ground-truth phase (index or name)");
  involvement->add_option("--pred", pred, "Keep frames with this predicted phase (index or name)");
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  add_pipeline_flags(ablate, flags);
  ablate->add_option("--grid", grid, "concept_set, frame_selection, sequence or all")->capture_default_str();
  ablate->add_option("--grid-file", grid_file, "JSON grid file (overrides --grid)");
  auto* report = app.add_subcommand("report", "Render report.md and report.html");
  add_pipeline_flags(report, flags);
  report->add_option("--max-cards", max_cards, "Explanation cards to render")->capture_default_str();
  auto* run = app.add_subcommand("run", "select, annotate (final + penultimate), explain, evaluate, report");
  add_pipeline_flags(run, flags);
  run->add_flag("--with-ablation", with_ablation, "Also run the ablation grid");
  run->add_option("--grid", grid, "Ablation grid when --with-ablation is set")->capture_default_str();
  run->add_option("--max-cards", max_cards, "Explanation cards to render")->capture_default_str();

  std::string spec_path, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic container with planted concepts");
  synth->add_option("--spec", spec_path, "Plant spec JSON (defaults when omitted)");
  synth->add_option("--out,-o", synth_out, "Output directory")->required();

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "Load and validate a container");
  validate->add_option("container", validate_dir, "Container directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(surgx::ErrorKind::validation);
  }

  try {
    if (synth->parsed()) {
      surgx::PlantSpec spec;
      if (!spec_path.empty()) spec = surgx::PlantSpec::from_json(surgx::json::parse(surgx::read_file_bytes(spec_path)));
      const auto fx = surgx::generate(spec);
      surgx::write_fixture(fx, synth_out);
      std::cout << "[synth] wrote " << fx.container.manifest.videos.size() << " videos, "
                << spec.neurons << " neurons, " << spec.concepts << " concepts to " << synth_out << "\n";
      return 0;
    }
    if (validate->parsed()) {
      const auto c = surgx::load_container(validate_dir);
      std::size_t frames = 0;
      for (const auto& v : c.manifest.videos) frames += v.frame_count;
      std::cout << "[validate] ok: " << c.manifest.videos.size() << " videos, " << frames << " frames, "
                << c.manifest.layers.size() << " layers, " << c.clamped_entries
                << " negative activations clamped, fingerprint " << c.fingerprint << "\n";
      return 0;
    }

    auto cfg = to_run_config(flags);
    cfg.grid = grid;
    if (!grid_file.empty()) cfg.grid_file = grid_file;
    if (!concept_name.empty()) cfg.involvement_concept = concept_name;
    if (!gt.empty()) cfg.filter_gt = gt;
    if (!pred.empty()) cfg.filter_pred = pred;
    cfg.max_cards = max_cards;
    surgx::Workspace ws(cfg);

    if (select->parsed()) print(surgx::cmd_select(ws));
    else if (annotate->parsed()) print(surgx::cmd_annotate(ws));
    else if (explain->parsed()) print(surgx::cmd_explain(ws));
    else if (evaluate->parsed()) print(surgx::cmd_evaluate(ws));
    else if (involvement->parsed()) print(surgx::cmd_involvement(ws));
    else if (ablate->parsed()) print(surgx::cmd_ablate(ws));
    else if (report->parsed()) print(surgx::cmd_report(ws));
    else if (run->parsed())
      for (const auto& s : surgx::cmd_run(ws, with_ablation)) print(s);
    return 0;
  } catch (const surgx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return static_cast<int>(surgx::ErrorKind::validation);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
