#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/annotation.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/selection.hpp"

namespace surgx {

/// Knobs of the neuron-concept annotation pipeline for one layer.
struct AnalysisConfig {
  SelectionStrategy strategy;
  SequenceSpec sequence;
  ThetaRule theta;
  bool dedup = true;

  json to_json() const {
    json j = strategy.to_json();
    j["sequence"] = sequence.to_json();
    j["theta"] = theta.to_json();
    j["dedup"] = dedup;
    return j;
  }
};

struct LayerAnalysis {
  std::string layer_id;
  std::vector<RepresentativeSet> representatives;
  ConceptScoreTable scores;
  std::vector<NeuronAnnotation> annotations;
};

inline std::vector<std::size_t> probe_videos(const DatasetManifest& m) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < m.videos.size(); ++v)
    if (m.videos[v].is_probe()) out.push_back(v);
  require(!out.empty(), "no probing videos (every video is marked split=test)");
  return out;
}

inline void check_concept_dim(const ConceptSet& concepts, const DatasetManifest& m) {
  require(concepts.embeddings.dim() == m.embedding_dim || concepts.size() == 0,
          "concept set '" + concepts.set_id + "' has embedding dim " + std::to_string(concepts.embeddings.dim()) +
              ", container uses " + std::to_string(m.embedding_dim));
  require(concepts.size() > 0, "concept set '" + concepts.set_id + "' is empty");
}

inline std::vector<RepresentativeSet> select_layer(const Container& c, const std::string& layer_id,
                                                   const AnalysisConfig& cfg, std::size_t workers = 1) {
  const auto videos = probe_videos(c.manifest);
  return select_representatives(c.layer_traces(layer_id), c.manifest.fps, cfg.strategy, cfg.sequence, videos, workers);
}

inline LayerAnalysis annotate_layer(const Container& c, const std::string& layer_id,
                                    std::vector<RepresentativeSet> reps, const ConceptSet& concepts,
                                    const AnalysisConfig& cfg, std::size_t workers = 1) {
  check_concept_dim(concepts, c.manifest);
  LayerAnalysis a{layer_id, std::move(reps), {}, {}};
  a.scores = build_score_table(a.representatives, c.frame_embeddings, concepts, layer_id, cfg.dedup, workers);
  a.annotations = annotate(a.scores, cfg.theta);
  return a;
}

/// Selection, sequence construction, scoring and annotation for one layer.
inline LayerAnalysis analyze_layer(const Container& c, const std::string& layer_id, const ConceptSet& concepts,
                                   const AnalysisConfig& cfg, std::size_t workers = 1) {
  return annotate_layer(c, layer_id, select_layer(c, layer_id, cfg, workers), concepts, cfg, workers);
}

inline const LayerDescriptor& require_layer_role(const DatasetManifest& m, LayerRole role) {
  const auto* l = m.layer_with_role(role);
  if (!l) fail(ErrorKind::validation, "container has no layer with role '" + to_string(role) + "'");
  return *l;
}

}  // namespace surgx
