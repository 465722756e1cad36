#pragma once

#include <chrono>
#include <ctime>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/pipeline.hpp"

namespace surgx {

namespace detail {

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\";
    out += c;
  }
  return out;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

/// Up to `n` evenly spaced picks from `items`.
template <class T>
std::vector<T> spaced(const std::vector<T>& items, std::size_t n) {
  std::vector<T> out;
  if (items.empty() || n == 0) return out;
  if (items.size() <= n) return items;
  for (std::size_t i = 0; i < n; ++i) out.push_back(items[i * items.size() / n]);
  return out;
}

struct Card {
  json record;
  bool correct = false;
};

inline std::vector<Card> pick_cards(const std::vector<json>& records, std::size_t max_cards) {
  std::vector<Card> correct, wrong;
  for (const auto& r : records) {
    if (r.at("degenerate").get<bool>() || r.at("ground_truth_phase").is_null()) continue;
    const bool ok = r.at("ground_truth_phase").get<std::size_t>() == r.at("predicted_phase").get<std::size_t>();
    (ok ? correct : wrong).push_back({r, ok});
  }
  std::size_t want_wrong = std::min(wrong.size(), max_cards / 2);
  std::size_t want_correct = std::min(correct.size(), max_cards - want_wrong);
  want_wrong = std::min(wrong.size(), max_cards - want_correct);
  auto out = spaced(correct, want_correct);
  for (auto& c : spaced(wrong, want_wrong)) out.push_back(std::move(c));
  return out;
}

struct TableSpec {
  const char* tag;
  const char* title;
  bool unique_column;
};

inline const TableSpec kTables[] = {{"concept_set", "Concept set construction", true},
                                    {"frame_selection", "Representative frame selection", false},
                                    {"sequence", "Representative sequence construction", false},
                                    {"custom", "Custom configurations", true}};

}  // namespace detail

struct ReportInputs {
  std::vector<json> explanations;
  std::optional<json> metrics;
  std::optional<json> ablation;
  std::string fingerprint;
};

inline std::string render_report_md(const ReportInputs& in, const DatasetManifest& m, std::size_t max_cards,
                                    const std::string& generated) {
  std::ostringstream os;
  os << "# Neuron-concept explanation report\n\n";
  os << "Dataset: `" << m.dataset_id << "`  \nFingerprint: `" << in.fingerprint << "`\n";
  if (!generated.empty()) os << "Generated: " << generated << "\n";
  if (in.metrics) {
    os << "\n## Metrics\n\n| Metric | Layer | Word | Sentence | Avg |\n|---|---|---|---|---|\n";
    for (const char* key : {"concept_alignment", "prediction_interpretability"}) {
      const auto& r = in.metrics->at(key);
      os << "| " << key << " | " << r.at("layer_id").get<std::string>() << " | " << detail::fixed(r.at("word").get<double>())
         << " | " << detail::fixed(r.at("sentence").get<double>()) << " | " << detail::fixed(r.at("avg").get<double>())
         << " |\n";
    }
  }
  os << "\n## Explanations\n";
  for (const auto& card : detail::pick_cards(in.explanations, max_cards)) {
    const auto& r = card.record;
    const auto gt = r.at("ground_truth_phase").get<std::size_t>();
    const auto frame = r.at("frame_index").get<std::size_t>();
    os << "\n### " << r.at("video_id").get<std::string>() << " frame " << frame << " (t = "
       << detail::fixed(static_cast<double>(frame) / m.fps, 1) << " s) " << (card.correct ? "correct" : "incorrect") << "\n\n";
    os << "- Prediction: " << r.at("predicted_name").get<std::string>() << "\n- Ground truth: " << m.phase_names.at(gt) << "\n\n";
    os << "| Rank | Neuron | Contribution | Concepts |\n|---|---|---|---|\n";
    std::size_t rank = 1;
    for (const auto& n : r.at("neurons")) {
      if (rank > 3) break;
      std::string concepts;
      if (n.at("annotated").get<bool>()) {
        std::size_t k = 0;
        for (const auto& c : n.at("concepts")) {
          if (k++ == 3) break;
          if (!concepts.empty()) concepts += "; ";
          concepts += detail::md_escape(c.at("text").get<std::string>()) + " (" + detail::fixed(c.at("score").get<double>(), 3) + ")";
        }
      } else {
        concepts = "unannotated";
      }
      os << "| " << rank++ << " | " << n.at("neuron").get<std::size_t>() << " | "
         << detail::fixed(n.at("contribution").get<double>()) << " | " << concepts << " |\n";
    }
  }
  if (in.ablation) {
    os << "\n## Ablations\n";
    for (const auto& t : detail::kTables) {
      std::vector<json> rows;
      for (const auto& r : in.ablation->at("rows"))
        if (r.at("config").at("table").get<std::string>() == t.tag) rows.push_back(r);
      if (rows.empty()) continue;
      os << "\n### " << t.title << "\n\n| Config | Align word | Align sentence | Align avg | Interp word | Interp sentence | Interp avg |"
         << (t.unique_column ? " Unique (final / penultimate) |" : "") << "\n|---|---|---|---|---|---|---|" << (t.unique_column ? "---|" : "") << "\n";
      for (const auto& r : rows) {
        const auto& a = r.at("alignment");
        const auto& p = r.at("interpretability");
        os << "| " << detail::md_escape(r.at("config").at("label").get<std::string>()) << " | " << detail::fixed(a.at("word").get<double>())
           << " | " << detail::fixed(a.at("sentence").get<double>()) << " | " << detail::fixed(a.at("avg").get<double>()) << " | "
           << detail::fixed(p.at("word").get<double>()) << " | " << detail::fixed(p.at("sentence").get<double>()) << " | "
           << detail::fixed(p.at("avg").get<double>()) << " |";
        if (t.unique_column)
          os << " " << r.at("unique_concepts_final").get<std::size_t>() << " / " << r.at("unique_concepts_penultimate").get<std::size_t>() << " |";
        os << "\n";
      }
    }
  }
  return os.str();
}

inline std::string render_report_html(const ReportInputs& in, const DatasetManifest& m, std::size_t max_cards,
                                      const std::string& generated) {
  using detail::fixed;
  using detail::html_escape;
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Neuron-concept explanation report</title>\n"
        "<style>body{font-family:sans-serif;margin:2em;max-width:70em}table{border-collapse:collapse;margin:.5em 0}"
        "td,th{border:1px solid #bbb;padding:.25em .6em}.cards{display:flex;flex-wrap:wrap;gap:1em}"
        ".card{border:1px solid #888;border-radius:6px;padding:.8em;width:20em}.correct{border-left:6px solid #2a2}"
        ".incorrect{border-left:6px solid #c22}.concept{color:#225}</style></head><body>\n";
  os << "<h1>Neuron-concept explanation report</h1>\n<p>Dataset <code>" << html_escape(m.dataset_id)
     << "</code>, fingerprint <code>" << in.fingerprint << "</code>";
  if (!generated.empty()) os << ", generated " << html_escape(generated);
  os << "</p>\n";
  if (in.metrics) {
    os << "<h2>Metrics</h2>\n<table><tr><th>Metric</th><th>Layer</th><th>Word</th><th>Sentence</th><th>Avg</th></tr>\n";
    for (const char* key : {"concept_alignment", "prediction_interpretability"}) {
      const auto& r = in.metrics->at(key);
      os << "<tr><td>" << key << "</td><td>" << html_escape(r.at("layer_id").get<std::string>()) << "</td><td>"
         << fixed(r.at("word").get<double>()) << "</td><td>" << fixed(r.at("sentence").get<double>()) << "</td><td>"
         << fixed(r.at("avg").get<double>()) << "</td></tr>\n";
    }
    os << "</table>\n";
  }
  os << "<h2>Explanations</h2>\n<div class=\"cards\">\n";
  for (const auto& card : detail::pick_cards(in.explanations, max_cards)) {
    const auto& r = card.record;
    const auto frame = r.at("frame_index").get<std::size_t>();
    os << "<div class=\"card " << (card.correct ? "correct" : "incorrect") << "\">\n<b>"
       << html_escape(r.at("video_id").get<std::string>()) << "</b> frame " << frame << " (t = "
       << fixed(static_cast<double>(frame) / m.fps, 1) << " s)<br>\nPrediction: <b>"
       << html_escape(r.at("predicted_name").get<std::string>()) << "</b><br>\nGround truth: "
       << html_escape(m.phase_names.at(r.at("ground_truth_phase").get<std::size_t>())) << "\n<ol>\n";
    std::size_t rank = 0;
    for (const auto& n : r.at("neurons")) {
      if (rank++ == 3) break;
      os << "<li>neuron " << n.at("neuron").get<std::size_t>() << " (contribution "
         << fixed(n.at("contribution").get<double>()) << ")<br>";
      if (n.at("annotated").get<bool>()) {
        std::size_t k = 0;
        for (const auto& c : n.at("concepts")) {
          if (k++ == 3) break;
          os << "<span class=\"concept\">" << html_escape(c.at("text").get<std::string>()) << "</span> ("
             << fixed(c.at("score").get<double>(), 3) << ")<br>";
        }
      } else {
        os << "<i>unannotated</i>";
      }
      os << "</li>\n";
    }
    os << "</ol>\n</div>\n";
  }
  os << "</div>\n";
  if (in.ablation) {
    os << "<h2>Ablations</h2>\n";
    for (const auto& t : detail::kTables) {
      std::vector<json> rows;
      for (const auto& r : in.ablation->at("rows"))
        if (r.at("config").at("table").get<std::string>() == t.tag) rows.push_back(r);
      if (rows.empty()) continue;
      os << "<h3>" << t.title << "</h3>\n<table><tr><th rowspan=\"2\">Config</th><th colspan=\"3\">Concept Alignment</th>"
         << "<th colspan=\"3\">Prediction Interpretability</th>" << (t.unique_column ? "<th rowspan=\"2\">Unique concepts<br>(final / penultimate)</th>" : "")
         << "</tr>\n<tr><th>Word</th><th>Sentence</th><th>Avg</th><th>Word</th><th>Sentence</th><th>Avg</th></tr>\n";
      for (const auto& r : rows) {
        const auto& a = r.at("alignment");
        const auto& p = r.at("interpretability");
        os << "<tr><td>" << html_escape(r.at("config").at("label").get<std::string>()) << "</td><td>"
           << fixed(a.at("word").get<double>()) << "</td><td>" << fixed(a.at("sentence").get<double>()) << "</td><td>"
           << fixed(a.at("avg").get<double>()) << "</td><td>" << fixed(p.at("word").get<double>()) << "</td><td>"
           << fixed(p.at("sentence").get<double>()) << "</td><td>" << fixed(p.at("avg").get<double>()) << "</td>";
        if (t.unique_column)
          os << "<td>" << r.at("unique_concepts_final").get<std::size_t>() << " / "
             << r.at("unique_concepts_penultimate").get<std::size_t>() << "</td>";
        os << "</tr>\n";
      }
      os << "</table>\n";
    }
  }
  os << "</body></html>\n";
  return os.str();
}

inline StageSummary cmd_report(Workspace& ws) {
  const auto layer = ws.layer_or(LayerRole::penultimate);
  const auto path = ws.cfg.out / kExplanationsFile;
  if (!fs::exists(path)) fail(ErrorKind::missing_artifact, "missing " + path.string() + "; run `surgx explain` first");
  ReportInputs in;
  const auto expected = ws.explanation_fp(layer);
  std::istringstream lines(read_file_bytes(path));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    detail::check_fresh(j, expected, path, "explain");
    in.explanations.push_back(std::move(j));
  }
  json upstream{{"explanations", expected}};
  if (fs::exists(ws.cfg.out / kMetricsFile)) {
    in.metrics = json::parse(read_file_bytes(ws.cfg.out / kMetricsFile));
    upstream["metrics"] = in.metrics->at("fingerprint");
  }
  if (fs::exists(ws.cfg.out / kAblationJson)) {
    in.ablation = json::parse(read_file_bytes(ws.cfg.out / kAblationJson));
    upstream["ablation"] = in.ablation->at("fingerprint");
  }
  in.fingerprint = stage_fingerprint("report", upstream);
  std::string generated;
  if (!ws.cfg.deterministic) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S UTC", std::gmtime(&now));
    generated = buf;
  }
  const auto& m = ws.container.manifest;
  write_file_bytes(ws.cfg.out / kReportMd, render_report_md(in, m, ws.cfg.max_cards, generated));
  write_file_bytes(ws.cfg.out / kReportHtml, render_report_html(in, m, ws.cfg.max_cards, generated));
  return {"report", {"wrote " + (ws.cfg.out / kReportHtml).string() + " and " + kReportMd}};
}

/// select + annotate for the penultimate and final layers, then explain,
/// evaluate and report.
inline std::vector<StageSummary> cmd_run(Workspace& ws, bool with_ablation = false) {
  std::vector<StageSummary> out;
  const auto saved = ws.cfg.layer;
  const auto penult = ws.layer_or(LayerRole::penultimate);
  const auto final_layer = require_layer_role(ws.container.manifest, LayerRole::final).layer_id;
  for (const auto& layer : {final_layer, penult}) {
    ws.cfg.layer = layer;
    out.push_back(cmd_select(ws));
    out.push_back(cmd_annotate(ws));
  }
  ws.cfg.layer = penult;
  out.push_back(cmd_explain(ws));
  out.push_back(cmd_evaluate(ws));
  if (with_ablation) out.push_back(cmd_ablate(ws));
  out.push_back(cmd_report(ws));
  ws.cfg.layer = saved;
  return out;
}

}  // namespace surgx
