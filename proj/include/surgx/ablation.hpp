#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/analysis.hpp"
#include "surgx/attribution.hpp"
#include "surgx/evaluation.hpp"
#include "surgx/parallel.hpp"

namespace surgx {

struct AblationConfig {
  std::string table;  // "concept_set", "frame_selection", "sequence" or "custom"
  std::string label;
  std::string concept_set;
  AnalysisConfig analysis;
  ImportanceRule importance;
  ContributionBackend backend = ContributionBackend::automatic;

  json to_json() const {
    return {{"table", table},
            {"label", label},
            {"concept_set", concept_set},
            {"analysis", analysis.to_json()},
            {"importance", importance.to_json()},
            {"backend", to_string(backend)}};
  }
};

struct AblationRow {
  AblationConfig config;
  MetricReport alignment;
  MetricReport interpretability;
  std::size_t unique_concepts_final = 0;
  std::size_t unique_concepts_penultimate = 0;
};

namespace detail {

inline AnalysisConfig reference_analysis() {
  AnalysisConfig a;
  a.strategy = SelectionStrategy::parse("video-threshold");
  a.sequence = {9, 5.0};
  return a;
}

}  // namespace detail

/// Grids mirroring the three ablation tables. `which` is one of
/// concept_set, frame_selection, sequence, all. Rows that do not vary the
/// concept set use the first id in `concept_sets`.
inline std::vector<AblationConfig> default_grid(std::string_view which, std::span<const std::string> concept_sets) {
  require(!concept_sets.empty(), "ablation grid needs at least one concept set");
  std::vector<AblationConfig> out;
  const auto add = [&](std::string table, std::string label, std::string set, AnalysisConfig a) {
    out.push_back({std::move(table), std::move(label), std::move(set), a, ImportanceRule{}, ContributionBackend::automatic});
  };
  const bool all = which == "all";
  require(all || which == "concept_set" || which == "frame_selection" || which == "sequence",
          "unknown ablation grid '" + std::string(which) + "'");
  if (all || which == "concept_set") {
    for (const auto& s : concept_sets) add("concept_set", s, s, detail::reference_analysis());
  }
  if (all || which == "frame_selection") {
    const std::pair<const char*, const char*> rows[] = {{"Global Threshold", "global-threshold"},
                                                         {"Global TopK", "global-topk"},
                                                         {"Video-wise Threshold", "video-threshold"},
                                                         {"Video-wise TopK", "video-topk"}};
    for (const auto& [label, strategy] : rows) {
      auto a = detail::reference_analysis();
      a.strategy = SelectionStrategy::parse(strategy);
      add("frame_selection", label, concept_sets.front(), a);
    }
  }
  if (all || which == "sequence") {
    const std::tuple<const char*, std::size_t, double> rows[] = {{"Single-Frame", 0, 1.0},
                                                                  {"Contiguous-Sequence", 9, 1.0},
                                                                  {"Dilated-Sequence (3)", 9, 3.0},
                                                                  {"Dilated-Sequence (5)", 9, 5.0},
                                                                  {"Dilated-Sequence (10)", 9, 10.0}};
    for (const auto& [label, n_prev, dilation] : rows) {
      auto a = detail::reference_analysis();
      a.sequence = {n_prev, dilation};
      add("sequence", label, concept_sets.front(), a);
    }
  }
  return out;
}

/// Grid file: {"configs": [{"label", "concept_set", "strategy", "k", "alpha",
/// "n_prev", "dilation_s", "theta", "importance", "dedup", "table"}]}.
inline std::vector<AblationConfig> grid_from_json(const json& j, std::span<const std::string> concept_sets) {
  std::vector<AblationConfig> out;
  require(j.contains("configs") && j.at("configs").is_array(), "grid file needs a 'configs' array");
  for (const auto& jc : j.at("configs")) {
    AblationConfig c;
    c.table = jc.value("table", "custom");
    c.label = jc.value("label", "config " + std::to_string(out.size()));
    c.concept_set = jc.value("concept_set", concept_sets.empty() ? std::string() : concept_sets.front());
    std::optional<std::size_t> k;
    std::optional<double> alpha;
    if (jc.contains("k")) k = jc.at("k").get<std::size_t>();
    if (jc.contains("alpha")) alpha = jc.at("alpha").get<double>();
    c.analysis.strategy = SelectionStrategy::parse(jc.value("strategy", "video-threshold"), k, alpha);
    c.analysis.sequence = {jc.value("n_prev", std::size_t{9}), jc.value("dilation_s", 5.0)};
    c.analysis.theta = ThetaRule::parse(jc.contains("theta") && jc.at("theta").is_number()
                                            ? jc.at("theta").dump()
                                            : jc.value("theta", std::string("auto")));
    c.analysis.dedup = jc.value("dedup", true);
    c.importance = ImportanceRule::parse(jc.value("importance", std::string("relative:0.8")));
    c.backend = parse_backend(jc.value("backend", std::string("auto")));
    out.push_back(std::move(c));
  }
  return out;
}

inline AblationRow run_ablation_config(const Container& c, const std::map<std::string, const ConceptSet*>& sets,
                                       const PhaseTextBank& bank, const AblationConfig& cfg) {
  auto it = sets.find(cfg.concept_set);
  if (it == sets.end()) fail(ErrorKind::validation, "ablation config '" + cfg.label + "' references missing concept set '" + cfg.concept_set + "'");
  const ConceptSet& concepts = *it->second;
  const auto& final_layer = require_layer_role(c.manifest, LayerRole::final);
  const auto& penult = require_layer_role(c.manifest, LayerRole::penultimate);

  AblationRow row{cfg, {}, {}, 0, 0};
  const auto fin = analyze_layer(c, final_layer.layer_id, concepts, cfg.analysis);
  row.alignment = concept_alignment_score(fin.annotations, concepts, bank, final_layer.layer_id);
  const auto pen = analyze_layer(c, penult.layer_id, concepts, cfg.analysis);
  const auto records = explain_test_frames(c, penult.layer_id, pen.annotations, cfg.importance, cfg.backend);
  row.interpretability = prediction_interpretability_score(records, concepts, bank, penult.layer_id);
  row.unique_concepts_final = unique_concept_count(fin.annotations);
  row.unique_concepts_penultimate = unique_concept_count(pen.annotations);
  row.alignment.config = row.interpretability.config = cfg.to_json();
  return row;
}

/// Evaluates every grid point; rows come back in grid order whatever the
/// worker count.
inline std::vector<AblationRow> run_ablation_harness(const Container& c,
                                                     const std::map<std::string, const ConceptSet*>& sets,
                                                     const PhaseTextBank& bank, std::span<const AblationConfig> grid,
                                                     std::size_t workers = 1) {
  require(!grid.empty(), "empty ablation grid");
  check_phase_bank(bank, c.manifest);
  for (const auto& cfg : grid)
    if (!sets.count(cfg.concept_set))
      fail(ErrorKind::validation, "ablation config '" + cfg.label + "' references missing concept set '" + cfg.concept_set + "'");
  std::vector<AblationRow> rows(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) { rows[i] = run_ablation_config(c, sets, bank, grid[i]); });
  return rows;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string num(double v) { return json(v).dump(); }

}  // namespace detail

inline std::string ablation_csv(std::span<const AblationRow> rows, const std::string& fingerprint) {
  std::ostringstream os;
  os << "table,label,concept_set,strategy,k,alpha,n_prev,dilation_s,theta,importance,"
        "alignment_word,alignment_sentence,alignment_avg,interpretability_word,interpretability_sentence,"
        "interpretability_avg,unique_concepts_final,unique_concepts_penultimate,fingerprint\n";
  for (const auto& r : rows) {
    const auto& a = r.config.analysis;
    const bool topk = a.strategy.is_topk();
    os << detail::csv_field(r.config.table) << ',' << detail::csv_field(r.config.label) << ','
       << detail::csv_field(r.config.concept_set) << ',' << a.strategy.name() << ','
       << (topk ? std::to_string(std::get<TopK>(a.strategy.rule).k) : "") << ','
       << (topk ? "" : detail::num(std::get<AdaptiveThreshold>(a.strategy.rule).alpha)) << ',' << a.sequence.n_prev << ','
       << detail::num(a.sequence.dilation_s) << ',' << a.theta.name() << ',' << r.config.importance.name() << ','
       << detail::num(r.alignment.word_score) << ',' << detail::num(r.alignment.sentence_score) << ','
       << detail::num(r.alignment.avg_score) << ',' << detail::num(r.interpretability.word_score) << ','
       << detail::num(r.interpretability.sentence_score) << ',' << detail::num(r.interpretability.avg_score) << ','
       << r.unique_concepts_final << ',' << r.unique_concepts_penultimate << ',' << fingerprint << '\n';
  }
  return os.str();
}

inline json ablation_json(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"config", r.config.to_json()},
                   {"alignment", r.alignment.to_json()},
                   {"interpretability", r.interpretability.to_json()},
                   {"unique_concepts_final", r.unique_concepts_final},
                   {"unique_concepts_penultimate", r.unique_concepts_penultimate}});
  }
  return out;
}

}  // namespace surgx
