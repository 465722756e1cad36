#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/annotation.hpp"
#include "surgx/attribution.hpp"
#include "surgx/concepts.hpp"
#include "surgx/error.hpp"

namespace surgx {

/// One metric, scored against the word-form and sentence-form phase texts.
struct MetricReport {
  std::string metric;
  std::string layer_id;
  double word_score = 0.0;
  double sentence_score = 0.0;
  double avg_score = 0.0;
  std::size_t items_used = 0;     // neurons (alignment) or frames (interpretability)
  std::size_t items_skipped = 0;  // dead neurons, degenerate or unannotated frames
  json config;

  json to_json() const {
    return {{"metric", metric},         {"layer_id", layer_id},           {"word", word_score},
            {"sentence", sentence_score}, {"avg", avg_score},             {"items_used", items_used},
            {"items_skipped", items_skipped}, {"config", config}};
  }
};

inline double cosine(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "cosine of vectors with different dims");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  require(na > 0.0 && nb > 0.0, "cosine of a zero vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace detail {

struct WordSentence {
  double word = 0.0;
  double sentence = 0.0;
};

/// Mean cosine of a neuron's annotated concepts against phase p's texts.
inline WordSentence concept_phase_similarity(std::span<const ScoredConcept> annotated, const ConceptSet& concepts,
                                             const PhaseTextBank& bank, std::size_t phase) {
  WordSentence s;
  for (const auto& c : annotated) {
    s.word += cosine(concepts.embedding(c.concept_index), bank.word.row(phase));
    s.sentence += cosine(concepts.embedding(c.concept_index), bank.sentence.row(phase));
  }
  const auto n = static_cast<double>(annotated.size());
  return {s.word / n, s.sentence / n};
}

inline void finish(MetricReport& r, double word_sum, double sentence_sum) {
  r.word_score = word_sum / static_cast<double>(r.items_used);
  r.sentence_score = sentence_sum / static_cast<double>(r.items_used);
  r.avg_score = (r.word_score + r.sentence_score) / 2.0;
}

}  // namespace detail

/// Final-layer neuron p is identified with phase p. Per neuron the mean
/// cosine over its concepts is taken, then the mean over neurons.
inline MetricReport concept_alignment_score(std::span<const NeuronAnnotation> final_annotations,
                                            const ConceptSet& concepts, const PhaseTextBank& bank,
                                            const std::string& layer_id = "final") {
  require(final_annotations.size() == bank.phase_count(),
          "final layer has " + std::to_string(final_annotations.size()) + " neurons but there are " +
              std::to_string(bank.phase_count()) + " phases");
  MetricReport r;
  r.metric = "concept_alignment";
  r.layer_id = layer_id;
  double ws = 0.0, ss = 0.0;
  for (std::size_t p = 0; p < final_annotations.size(); ++p) {
    const auto& a = final_annotations[p];
    if (a.dead || a.annotated.empty()) {
      ++r.items_skipped;
      continue;
    }
    const auto s = detail::concept_phase_similarity(a.annotated, concepts, bank, p);
    ws += s.word;
    ss += s.sentence;
    ++r.items_used;
  }
  if (r.items_used == 0) fail(ErrorKind::numeric, "concept alignment undefined: every final-layer neuron is dead");
  detail::finish(r, ws, ss);
  return r;
}

/// Per frame: mean over important neurons of the mean cosine between their
/// concepts and the predicted phase's texts; then the mean over frames.
/// Degenerate frames and frames whose important neurons are all
/// unannotated are excluded and counted in items_skipped.
inline MetricReport prediction_interpretability_score(std::span<const ExplanationRecord> records,
                                                      const ConceptSet& concepts, const PhaseTextBank& bank,
                                                      const std::string& layer_id = "penultimate") {
  if (records.empty()) fail(ErrorKind::validation, "prediction interpretability needs at least one test frame");
  MetricReport r;
  r.metric = "prediction_interpretability";
  r.layer_id = layer_id;
  double ws = 0.0, ss = 0.0;
  for (const auto& rec : records) {
    require(rec.predicted < bank.phase_count(), "predicted phase outside the phase text bank");
    double fw = 0.0, fs = 0.0;
    std::size_t used = 0;
    if (!rec.degenerate) {
      for (const auto& n : rec.neurons) {
        if (!n.annotated || n.concepts.empty()) continue;
        const auto s = detail::concept_phase_similarity(n.concepts, concepts, bank, rec.predicted);
        fw += s.word;
        fs += s.sentence;
        ++used;
      }
    }
    if (used == 0) {
      ++r.items_skipped;
      continue;
    }
    ws += fw / static_cast<double>(used);
    ss += fs / static_cast<double>(used);
    ++r.items_used;
  }
  if (r.items_used == 0) fail(ErrorKind::numeric, "prediction interpretability undefined: no explainable frame");
  detail::finish(r, ws, ss);
  return r;
}

}  // namespace surgx
