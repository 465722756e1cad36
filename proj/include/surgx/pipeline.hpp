#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/ablation.hpp"
#include "surgx/analysis.hpp"
#include "surgx/attribution.hpp"
#include "surgx/binary_io.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/evaluation.hpp"

namespace surgx {

/// Everything a pipeline stage needs. Fields that cannot change results
/// (output directory, worker count, determinism of report timestamps) are
/// left out of the provenance record.
struct RunConfig {
  fs::path container;
  std::vector<fs::path> concepts;
  std::optional<fs::path> phase_texts;
  fs::path out = "surgx_out";
  std::optional<std::string> layer;
  AnalysisConfig analysis = [] {
    AnalysisConfig a;
    a.strategy = SelectionStrategy::parse("video-threshold");
    return a;
  }();
  ImportanceRule importance;
  ContributionBackend backend = ContributionBackend::automatic;
  bool deterministic = false;
  std::size_t workers = 1;

  std::string grid = "all";
  std::optional<fs::path> grid_file;

  std::optional<std::string> involvement_concept;
  std::optional<std::string> filter_gt;
  std::optional<std::string> filter_pred;

  std::size_t max_cards = 12;

  fs::path phase_texts_path() const { return phase_texts.value_or(container / kPhaseTextsFile); }

  json provenance() const {
    json cs = json::array();
    for (const auto& c : concepts) cs.push_back(c.generic_string());
    return {{"container", container.generic_string()},
            {"concepts", cs},
            {"phase_texts", phase_texts_path().generic_string()},
            {"analysis", analysis.to_json()},
            {"importance", importance.to_json()},
            {"backend", to_string(backend)}};
  }
};

inline constexpr const char* kRepresentativesFile = "representatives.json";
inline constexpr const char* kAnnotationsFile = "annotations.json";
inline constexpr const char* kScoresFile = "scores.f32bin";
inline constexpr const char* kExplanationsFile = "explanations.jsonl";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kInvolvementFile = "involvement.json";
inline constexpr const char* kAblationCsv = "ablation.csv";
inline constexpr const char* kAblationJson = "ablation.json";
inline constexpr const char* kReportMd = "report.md";
inline constexpr const char* kReportHtml = "report.html";

inline std::string stage_fingerprint(const std::string& stage, const json& inputs) {
  return Fnv1a{}.update(stage).update(json(inputs).dump()).hex();
}

/// Loaded inputs shared by the stages.
struct Workspace {
  RunConfig cfg;
  Container container;
  std::optional<ConceptSet> concepts;

  explicit Workspace(RunConfig c) : cfg(std::move(c)), container(load_container(cfg.container)) {}

  const ConceptSet& concept_set() {
    if (!concepts) {
      require(!cfg.concepts.empty(), "no concept set given (--concepts)");
      concepts = load_concept_set(cfg.concepts.front(), container.manifest.embedding_dim);
      check_concept_dim(*concepts, container.manifest);
    }
    return *concepts;
  }

  std::string layer_or(LayerRole role) const {
    if (cfg.layer) {
      require(container.manifest.has_layer(*cfg.layer), "unknown layer '" + *cfg.layer + "'");
      return *cfg.layer;
    }
    return require_layer_role(container.manifest, role).layer_id;
  }

  std::string selection_fp(const std::string& layer) const {
    return stage_fingerprint("select", {{"container", container.fingerprint},
                                        {"layer", layer},
                                        {"strategy", cfg.analysis.strategy.to_json()},
                                        {"sequence", cfg.analysis.sequence.to_json()}});
  }

  std::string annotation_fp(const std::string& layer) {
    return stage_fingerprint("annotate", {{"selection", selection_fp(layer)},
                                          {"concepts", concept_set().fingerprint},
                                          {"theta", cfg.analysis.theta.to_json()},
                                          {"dedup", cfg.analysis.dedup}});
  }

  std::string explanation_fp(const std::string& layer) {
    return stage_fingerprint("explain", {{"annotation", annotation_fp(layer)},
                                         {"importance", cfg.importance.to_json()},
                                         {"backend", to_string(cfg.backend)}});
  }

  fs::path layer_dir(const std::string& layer) const { return cfg.out / layer; }
};

namespace detail {

inline json read_json_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    fail(ErrorKind::missing_artifact,
         "missing " + path.filename().string() + " (" + path.string() + "); run `surgx " + producer + "` first");
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::parse_error&) {
    fail(ErrorKind::validation, path.string() + " is not valid JSON");
  }
}

inline void check_fresh(const json& artifact, const std::string& expected, const fs::path& path,
                        const std::string& producer) {
  const auto got = artifact.value("fingerprint", std::string());
  if (got != expected)
    fail(ErrorKind::missing_artifact, "stale artifact " + path.string() + ": it was produced from a different "
                                      "container or configuration; re-run `surgx " + producer + "`");
}

inline void write_json(const fs::path& path, const json& j) { write_file_bytes(path, j.dump(1) + "\n"); }

inline std::string producer_for(const std::string& stage, const std::string& layer) {
  return stage + " --layer " + layer;
}

}  // namespace detail

struct StageSummary {
  std::string stage;
  std::vector<std::string> lines;
};

inline StageSummary cmd_select(Workspace& ws) {
  const auto layer = ws.layer_or(LayerRole::penultimate);
  const auto reps = select_layer(ws.container, layer, ws.cfg.analysis, ws.cfg.workers);
  std::size_t dead = 0;
  for (const auto& r : reps) dead += r.dead() ? 1 : 0;
  json j{{"stage", "select"},
         {"fingerprint", ws.selection_fp(layer)},
         {"run_config", ws.cfg.provenance()},
         {"layer_id", layer},
         {"clamped_entries", ws.container.clamped_entries},
         {"dead_neurons", dead},
         {"neurons", representatives_to_json(reps, ws.container.manifest)}};
  detail::write_json(ws.layer_dir(layer) / kRepresentativesFile, j);
  return {"select", {"layer " + layer + ": " + std::to_string(reps.size()) + " neurons, " + std::to_string(dead) +
                         " dead, " + std::to_string(ws.container.clamped_entries) + " negative activations clamped"}};
}

inline std::vector<RepresentativeSet> read_representatives(Workspace& ws, const std::string& layer) {
  const auto path = ws.layer_dir(layer) / kRepresentativesFile;
  const auto j = detail::read_json_artifact(path, detail::producer_for("select", layer));
  detail::check_fresh(j, ws.selection_fp(layer), path, detail::producer_for("select", layer));
  return representatives_from_json(j.at("neurons"), ws.container.manifest);
}

inline StageSummary cmd_annotate(Workspace& ws) {
  const auto layer = ws.layer_or(LayerRole::penultimate);
  auto reps = read_representatives(ws, layer);
  const auto& concepts = ws.concept_set();
  const auto a = annotate_layer(ws.container, layer, std::move(reps), concepts, ws.cfg.analysis, ws.cfg.workers);
  const auto scores = scores_as_f32(a.scores);
  write_f32bin(ws.layer_dir(layer) / kScoresFile, scores);
  std::size_t fallback = 0, dead = 0;
  for (const auto& n : a.annotations) {
    fallback += n.fallback_used ? 1 : 0;
    dead += n.dead ? 1 : 0;
  }
  json j{{"stage", "annotate"},
         {"fingerprint", ws.annotation_fp(layer)},
         {"run_config", ws.cfg.provenance()},
         {"layer_id", layer},
         {"concept_set", concepts.set_id},
         {"scores_file", kScoresFile},
         {"scores_shape", {a.scores.scores.rows(), a.scores.scores.cols()}},
         {"scores_fingerprint", fingerprint_of(encode_f32(scores))},
         {"unique_concepts", unique_concept_count(a.annotations)},
         {"fallback_neurons", fallback},
         {"dead_neurons", dead},
         {"neurons", annotations_to_json(a.annotations, concepts)}};
  detail::write_json(ws.layer_dir(layer) / kAnnotationsFile, j);
  return {"annotate", {"layer " + layer + ": " + std::to_string(unique_concept_count(a.annotations)) +
                           " unique concepts, " + std::to_string(fallback) + " fallback, " + std::to_string(dead) +
                           " dead"}};
}

inline std::vector<NeuronAnnotation> read_annotations(Workspace& ws, const std::string& layer) {
  const auto path = ws.layer_dir(layer) / kAnnotationsFile;
  const auto j = detail::read_json_artifact(path, detail::producer_for("annotate", layer));
  detail::check_fresh(j, ws.annotation_fp(layer), path, detail::producer_for("annotate", layer));
  return annotations_from_json(j.at("neurons"), ws.concept_set());
}

inline StageSummary cmd_explain(Workspace& ws) {
  const auto layer = ws.layer_or(LayerRole::penultimate);
  const auto annotations = read_annotations(ws, layer);
  const auto records = explain_test_frames(ws.container, layer, annotations, ws.cfg.importance, ws.cfg.backend,
                                           ws.cfg.workers);
  const auto fp = ws.explanation_fp(layer);
  std::string out;
  std::size_t degenerate = 0;
  for (const auto& r : records) {
    auto j = explanation_to_json(r, ws.container.manifest, ws.concept_set());
    j["layer_id"] = layer;
    j["fingerprint"] = fp;
    out += j.dump() + "\n";
    degenerate += r.degenerate ? 1 : 0;
  }
  write_file_bytes(ws.cfg.out / kExplanationsFile, out);
  return {"explain", {std::to_string(records.size()) + " test frames explained with " + ws.cfg.importance.name() +
                          " (" + to_string(resolve_backend(ws.cfg.backend, ws.container, layer)) + " backend), " +
                          std::to_string(degenerate) + " degenerate"}};
}

inline std::vector<ExplanationRecord> read_explanations(Workspace& ws, const std::string& layer) {
  const auto path = ws.cfg.out / kExplanationsFile;
  if (!fs::exists(path))
    fail(ErrorKind::missing_artifact, "missing " + path.string() + "; run `surgx explain` first");
  const auto expected = ws.explanation_fp(layer);
  std::istringstream in(read_file_bytes(path));
  std::string line;
  std::vector<ExplanationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    detail::check_fresh(j, expected, path, "explain");
    out.push_back(explanation_from_json(j, ws.container.manifest, ws.concept_set()));
  }
  return out;
}

inline std::size_t resolve_phase(const DatasetManifest& m, const std::string& s) {
  if (auto p = m.phase_index(s)) return *p;
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc{} && ptr == s.data() + s.size() && v < m.phase_count(), "unknown phase '" + s + "'");
  return v;
}

inline StageSummary cmd_evaluate(Workspace& ws) {
  const auto penult = ws.layer_or(LayerRole::penultimate);
  const auto final_layer = require_layer_role(ws.container.manifest, LayerRole::final).layer_id;
  const auto bank = load_phase_bank(ws.cfg.phase_texts_path());
  check_phase_bank(bank, ws.container.manifest);
  const auto final_ann = read_annotations(ws, final_layer);
  const auto records = read_explanations(ws, penult);
  const auto& concepts = ws.concept_set();
  auto cas = concept_alignment_score(final_ann, concepts, bank, final_layer);
  auto pis = prediction_interpretability_score(records, concepts, bank, penult);
  const auto fp = stage_fingerprint("evaluate", {{"explanations", ws.explanation_fp(penult)},
                                                 {"final_annotations", ws.annotation_fp(final_layer)},
                                                 {"phase_texts", bank.fingerprint}});
  cas.config = pis.config = ws.cfg.provenance();
  json j{{"stage", "evaluate"},
         {"fingerprint", fp},
         {"run_config", ws.cfg.provenance()},
         {"aggregation", "unweighted: mean over concepts, then neurons/frames, then word/sentence"},
         {"concept_alignment", cas.to_json()},
         {"prediction_interpretability", pis.to_json()}};
  detail::write_json(ws.cfg.out / kMetricsFile, j);
  std::ostringstream a, b;
  a << "concept alignment       word " << cas.word_score << "  sentence " << cas.sentence_score << "  avg " << cas.avg_score;
  b << "prediction interpret.   word " << pis.word_score << "  sentence " << pis.sentence_score << "  avg " << pis.avg_score;
  return {"evaluate", {a.str(), b.str()}};
}

inline StageSummary cmd_involvement(Workspace& ws) {
  const auto layer = ws.layer_or(LayerRole::penultimate);
  require(ws.cfg.involvement_concept.has_value(), "involvement needs --concept");
  const auto& concepts = ws.concept_set();
  const auto idx = concepts.find(*ws.cfg.involvement_concept);
  require(idx.has_value(), "unknown concept '" + *ws.cfg.involvement_concept + "'");
  const auto annotations = read_annotations(ws, layer);
  auto records = read_explanations(ws, layer);
  const auto& m = ws.container.manifest;
  std::optional<std::size_t> gt, pred;
  if (ws.cfg.filter_gt) gt = resolve_phase(m, *ws.cfg.filter_gt);
  if (ws.cfg.filter_pred) pred = resolve_phase(m, *ws.cfg.filter_pred);
  std::erase_if(records, [&](const ExplanationRecord& r) {
    if (gt && (!r.ground_truth || *r.ground_truth != *gt)) return true;
    if (pred && r.predicted != *pred) return true;
    return false;
  });
  const double fraction = concept_involvement(records, *idx, annotations);
  json j{{"stage", "involvement"},
         {"fingerprint", stage_fingerprint("involvement", {{"explanations", ws.explanation_fp(layer)},
                                                           {"concept", concepts.concepts[*idx].concept_id},
                                                           {"gt", gt ? json(*gt) : json(nullptr)},
                                                           {"pred", pred ? json(*pred) : json(nullptr)}})},
         {"run_config", ws.cfg.provenance()},
         {"concept_id", concepts.concepts[*idx].concept_id},
         {"concept_text", concepts.concepts[*idx].text},
         {"filter", {{"gt", gt ? json(*gt) : json(nullptr)}, {"pred", pred ? json(*pred) : json(nullptr)}}},
         {"frames", records.size()},
         {"fraction", fraction}};
  detail::write_json(ws.cfg.out / kInvolvementFile, j);
  std::ostringstream os;
  os << "concept '" << concepts.concepts[*idx].text << "' involved in " << fraction * 100.0 << "% of " << records.size()
     << " frames";
  return {"involvement", {os.str()}};
}

inline StageSummary cmd_ablate(Workspace& ws) {
  require(!ws.cfg.concepts.empty(), "ablation needs at least one --concepts set");
  std::vector<ConceptSet> sets;
  for (const auto& p : ws.cfg.concepts) {
    sets.push_back(load_concept_set(p, ws.container.manifest.embedding_dim));
    check_concept_dim(sets.back(), ws.container.manifest);
  }
  std::map<std::string, const ConceptSet*> by_id;
  std::vector<std::string> ids;
  json set_fps = json::object();
  for (const auto& s : sets) {
    require(by_id.emplace(s.set_id, &s).second, "two concept sets share the id '" + s.set_id + "'");
    ids.push_back(s.set_id);
    set_fps[s.set_id] = s.fingerprint;
  }
  const auto bank = load_phase_bank(ws.cfg.phase_texts_path());
  std::vector<AblationConfig> grid;
  if (ws.cfg.grid_file) {
    grid = grid_from_json(json::parse(read_file_bytes(*ws.cfg.grid_file)), ids);
  } else {
    grid = default_grid(ws.cfg.grid, ids);
  }
  const auto rows = run_ablation_harness(ws.container, by_id, bank, grid, ws.cfg.workers);
  json grid_json = json::array();
  for (const auto& g : grid) grid_json.push_back(g.to_json());
  const auto fp = stage_fingerprint("ablate", {{"container", ws.container.fingerprint},
                                               {"concept_sets", set_fps},
                                               {"phase_texts", bank.fingerprint},
                                               {"grid", grid_json}});
  write_file_bytes(ws.cfg.out / kAblationCsv, ablation_csv(rows, fp));
  detail::write_json(ws.cfg.out / kAblationJson, {{"stage", "ablate"},
                                                  {"fingerprint", fp},
                                                  {"run_config", ws.cfg.provenance()},
                                                  {"aggregation", "unweighted nesting"},
                                                  {"rows", ablation_json(rows)}});
  return {"ablate", {std::to_string(rows.size()) + " configurations evaluated"}};
}

}  // namespace surgx
