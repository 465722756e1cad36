#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/annotation.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"
#include "surgx/parallel.hpp"
#include "surgx/selection.hpp"

namespace surgx {

/// Contribution of each neuron to the class-p logit of a linear head:
/// |f_p(a) - f_p(a with a_i = 0)| = |a_i * W[p, i]|. The bias cancels.
inline std::vector<float> contribution_linear(std::span<const float> activations, const LinearHead& head,
                                              std::size_t phase) {
  require(phase < head.phase_count(), "phase index " + std::to_string(phase) + " outside head range");
  require(activations.size() == head.neuron_count(),
          "dimension mismatch: " + std::to_string(activations.size()) + " activations for a head of width " +
              std::to_string(head.neuron_count()));
  const auto w = head.weights.row(phase);
  std::vector<float> out(activations.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(activations[i] * w[i]);
  return out;
}

/// First-order contribution |a_i * df/da_i| from exporter-supplied gradients.
inline std::vector<float> contribution_from_gradients(std::span<const float> activations,
                                                      std::span<const float> gradients) {
  require(activations.size() == gradients.size(),
          "dimension mismatch: " + std::to_string(activations.size()) + " activations vs " +
              std::to_string(gradients.size()) + " gradients");
  std::vector<float> out(activations.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(activations[i] * gradients[i]);
  return out;
}

struct ImportanceRule {
  enum class Mode { top_k, relative };
  Mode mode = Mode::relative;
  std::size_t k = 1;
  double beta = 0.8;

  static ImportanceRule top_k(std::size_t k) { return {Mode::top_k, k, 0.0}; }
  static ImportanceRule relative(double beta) { return {Mode::relative, 0, beta}; }

  void validate() const {
    if (mode == Mode::top_k)
      require(k >= 1, "importance top-k needs k >= 1");
    else
      require(beta > 0.0 && beta <= 1.0, "importance relative rule needs 0 < beta <= 1");
  }

  std::string name() const {
    return mode == Mode::top_k ? "topk:" + std::to_string(k) : "relative:" + json(beta).dump();
  }

  json to_json() const { return name(); }

  /// "topk:<k>" or "relative:<beta>".
  static ImportanceRule parse(std::string_view s) {
    const auto colon = s.find(':');
    require(colon != std::string_view::npos, "--importance must be topk:<k> or relative:<beta>");
    const auto kind = s.substr(0, colon);
    const auto value = s.substr(colon + 1);
    ImportanceRule r;
    if (kind == "topk") {
      std::size_t k = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), k);
      require(ec == std::errc{} && ptr == value.data() + value.size(), "bad k in '" + std::string(s) + "'");
      r = top_k(k);
    } else if (kind == "relative") {
      double b = 0.0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), b);
      require(ec == std::errc{} && ptr == value.data() + value.size(), "bad beta in '" + std::string(s) + "'");
      r = relative(b);
    } else {
      fail(ErrorKind::validation, "unknown importance rule '" + std::string(kind) + "'");
    }
    r.validate();
    return r;
  }
};

struct ImportantNeurons {
  std::vector<std::size_t> neurons;  // contribution descending, ties by index
  bool degenerate = false;           // every contribution was zero
};

inline ImportantNeurons important_neurons(std::span<const float> contributions, const ImportanceRule& rule) {
  rule.validate();
  require(!contributions.empty(), "empty contribution vector");
  ImportantNeurons out;
  const float peak = *std::max_element(contributions.begin(), contributions.end());
  if (!(peak > 0.0f)) {
    out.neurons = {0};
    out.degenerate = true;
    return out;
  }
  std::vector<std::size_t> order(contributions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return contributions[a] > contributions[b]; });
  if (rule.mode == ImportanceRule::Mode::top_k) {
    order.resize(std::min(rule.k, order.size()));
  } else {
    const double cut = rule.beta * static_cast<double>(peak);
    const auto end = std::find_if(order.begin(), order.end(),
                                  [&](auto i) { return static_cast<double>(contributions[i]) < cut; });
    order.erase(end, order.end());
  }
  out.neurons = std::move(order);
  return out;
}

enum class ContributionBackend { automatic, linear, gradient };

inline std::string to_string(ContributionBackend b) {
  switch (b) {
    case ContributionBackend::automatic: return "auto";
    case ContributionBackend::linear: return "linear";
    case ContributionBackend::gradient: return "gradient";
  }
  return "auto";
}

inline ContributionBackend parse_backend(std::string_view s) {
  if (s == "auto") return ContributionBackend::automatic;
  if (s == "linear") return ContributionBackend::linear;
  if (s == "gradient") return ContributionBackend::gradient;
  fail(ErrorKind::validation, "unknown contribution backend '" + std::string(s) + "'");
}

/// Resolves `automatic`: linear when head weights exist, else gradients.
inline ContributionBackend resolve_backend(ContributionBackend b, const Container& c, const std::string& layer_id) {
  if (b == ContributionBackend::automatic) {
    if (c.head && c.head->layer_id == layer_id) return ContributionBackend::linear;
    if (c.layer_gradients(layer_id, 0)) return ContributionBackend::gradient;
    fail(ErrorKind::validation, "no head weights and missing gradient tensor for layer '" + layer_id + "'");
  }
  if (b == ContributionBackend::linear)
    require(c.head.has_value() && c.head->layer_id == layer_id, "linear backend needs head weights for layer '" + layer_id + "'");
  if (b == ContributionBackend::gradient)
    require(c.layer_gradients(layer_id, 0) != nullptr, "missing gradient tensor for layer '" + layer_id + "'");
  return b;
}

struct NeuronExplanation {
  std::size_t neuron = 0;
  float contribution = 0.0f;
  bool annotated = false;
  std::vector<ScoredConcept> concepts;
};

struct ExplanationRecord {
  FrameRef frame;
  std::size_t predicted = 0;
  std::optional<std::size_t> ground_truth;
  bool degenerate = false;
  std::vector<NeuronExplanation> neurons;

  bool involves(std::size_t concept_index) const {
    return std::any_of(neurons.begin(), neurons.end(), [&](const auto& n) {
      return std::any_of(n.concepts.begin(), n.concepts.end(),
                         [&](const auto& c) { return c.concept_index == concept_index; });
    });
  }
};

/// Predicted phase for a frame: the exported label when present, otherwise
/// the head's argmax.
inline std::size_t predicted_phase(const Container& c, std::size_t video, std::size_t frame,
                                   std::span<const float> activations) {
  const auto& v = c.manifest.videos[video];
  if (v.prediction_labels) return (*v.prediction_labels)[frame];
  if (c.head) return c.head->predict(activations);
  fail(ErrorKind::validation, "video '" + v.video_id + "' has no prediction labels and the container has no head");
}

inline ExplanationRecord assemble_explanation(FrameRef frame, std::size_t predicted,
                                              std::optional<std::size_t> ground_truth,
                                              std::span<const float> contributions,
                                              std::span<const NeuronAnnotation> annotations,
                                              const ImportanceRule& rule) {
  const auto imp = important_neurons(contributions, rule);
  ExplanationRecord r{frame, predicted, ground_truth, imp.degenerate, {}};
  for (auto n : imp.neurons) {
    NeuronExplanation ne{n, contributions[n], false, {}};
    if (n < annotations.size() && !annotations[n].dead) {
      ne.annotated = true;
      ne.concepts = annotations[n].annotated;
    }
    r.neurons.push_back(std::move(ne));
  }
  return r;
}

/// Explains one frame of the layer the annotations belong to.
inline ExplanationRecord explain_frame(const Container& c, const std::string& layer_id, FrameRef frame,
                                       std::span<const NeuronAnnotation> annotations, const ImportanceRule& rule,
                                       ContributionBackend backend) {
  const auto& traces = c.layer_traces(layer_id);
  require(frame.video < traces.size() && frame.frame < traces[frame.video].values.rows(), "frame reference out of range");
  const auto activations = traces[frame.video].values.row(frame.frame);
  const auto p = predicted_phase(c, frame.video, frame.frame, activations);
  const auto& v = c.manifest.videos[frame.video];
  std::optional<std::size_t> gt;
  if (v.phase_labels) gt = (*v.phase_labels)[frame.frame];
  std::vector<float> contrib;
  if (resolve_backend(backend, c, layer_id) == ContributionBackend::linear) {
    contrib = contribution_linear(activations, *c.head, p);
  } else {
    contrib = contribution_from_gradients(activations, c.layer_gradients(layer_id, frame.video)->row(frame.frame));
  }
  return assemble_explanation(frame, p, gt, contrib, annotations, rule);
}

/// Every frame of every test-split video, in manifest order.
inline std::vector<ExplanationRecord> explain_test_frames(const Container& c, const std::string& layer_id,
                                                          std::span<const NeuronAnnotation> annotations,
                                                          const ImportanceRule& rule, ContributionBackend backend,
                                                          std::size_t workers = 1) {
  backend = resolve_backend(backend, c, layer_id);
  std::vector<FrameRef> frames;
  for (std::size_t v = 0; v < c.manifest.videos.size(); ++v) {
    if (!c.manifest.videos[v].is_test()) continue;
    for (std::size_t f = 0; f < c.manifest.videos[v].frame_count; ++f)
      frames.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(f)});
  }
  std::vector<ExplanationRecord> out(frames.size());
  parallel_for(frames.size(), workers,
               [&](std::size_t i) { out[i] = explain_frame(c, layer_id, frames[i], annotations, rule, backend); });
  return out;
}

/// Fraction of `records` whose important neurons include at least one
/// neuron annotated with `concept_index`.
inline double concept_involvement(std::span<const ExplanationRecord> records, std::size_t concept_index,
                                  std::span<const NeuronAnnotation> annotations) {
  if (records.empty()) fail(ErrorKind::validation, "concept involvement is undefined for an empty frame set");
  std::size_t hits = 0;
  for (const auto& r : records) {
    const bool hit = std::any_of(r.neurons.begin(), r.neurons.end(), [&](const auto& n) {
      return n.neuron < annotations.size() && annotations[n.neuron].has_concept(concept_index);
    });
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline json explanation_to_json(const ExplanationRecord& r, const DatasetManifest& m, const ConceptSet& concepts) {
  json neurons = json::array();
  for (const auto& n : r.neurons) {
    json jn{{"neuron", n.neuron}, {"contribution", n.contribution}, {"annotated", n.annotated}};
    json cs = json::array();
    for (const auto& c : n.concepts) {
      const auto& con = concepts.concepts[c.concept_index];
      cs.push_back({{"concept_id", con.concept_id}, {"text", con.text}, {"score", c.score}});
    }
    jn["concepts"] = n.annotated ? cs : json("unannotated");
    neurons.push_back(std::move(jn));
  }
  json j{{"video_id", m.videos.at(r.frame.video).video_id},
         {"frame_index", r.frame.frame},
         {"predicted_phase", r.predicted},
         {"predicted_name", m.phase_names.at(r.predicted)},
         {"degenerate", r.degenerate},
         {"neurons", std::move(neurons)}};
  j["ground_truth_phase"] = r.ground_truth ? json(*r.ground_truth) : json(nullptr);
  return j;
}

inline ExplanationRecord explanation_from_json(const json& j, const DatasetManifest& m, const ConceptSet& concepts) {
  ExplanationRecord r;
  const auto vid = j.at("video_id").get<std::string>();
  const auto vi = m.video_index(vid);
  require(vi.has_value(), "explanation references unknown video '" + vid + "'");
  r.frame = {static_cast<std::uint32_t>(*vi), j.at("frame_index").get<std::uint32_t>()};
  r.predicted = j.at("predicted_phase").get<std::size_t>();
  if (!j.at("ground_truth_phase").is_null()) r.ground_truth = j.at("ground_truth_phase").get<std::size_t>();
  r.degenerate = j.at("degenerate").get<bool>();
  for (const auto& jn : j.at("neurons")) {
    NeuronExplanation n;
    n.neuron = jn.at("neuron").get<std::size_t>();
    n.contribution = jn.at("contribution").get<float>();
    n.annotated = jn.at("annotated").get<bool>();
    if (n.annotated) {
      for (const auto& jc : jn.at("concepts")) {
        const auto idx = concepts.find(jc.at("concept_id").get<std::string>());
        require(idx.has_value(), "explanation references unknown concept");
        n.concepts.push_back({*idx, jc.at("score").get<double>()});
      }
    }
    r.neurons.push_back(std::move(n));
  }
  return r;
}

}  // namespace surgx
