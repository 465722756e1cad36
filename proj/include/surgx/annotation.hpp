#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"
#include "surgx/matrix.hpp"
#include "surgx/parallel.hpp"
#include "surgx/selection.hpp"

namespace surgx {

/// Annotation threshold. `auto` uses mean + 2 std of the neuron's own score
/// vector; otherwise the absolute value is applied to every neuron.
struct ThetaRule {
  std::optional<double> absolute;

  double resolve(std::span<const double> scores) const {
    if (absolute) return *absolute;
    if (scores.empty()) return 0.0;
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    return mean + 2.0 * std::sqrt(var);
  }

  std::string name() const {
    if (!absolute) return "auto";
    return json(*absolute).dump();
  }

  json to_json() const { return absolute ? json(*absolute) : json("auto"); }

  static ThetaRule parse(std::string_view s) {
    if (s == "auto") return {};
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(v),
            "--theta must be 'auto' or a number, got '" + std::string(s) + "'");
    return {v};
  }
};

/// Unit vectors of a concept set in double precision, reused across neurons.
class ConceptDirections {
 public:
  explicit ConceptDirections(const MatrixF& concepts) : units_(concepts.rows(), concepts.cols()) {
    for (std::size_t c = 0; c < concepts.rows(); ++c) {
      const double norm = l2_norm(concepts.row(c));
      require(norm > 0.0, "zero concept embedding at row " + std::to_string(c));
      for (std::size_t d = 0; d < concepts.cols(); ++d) units_(c, d) = concepts(c, d) / norm;
    }
  }

  std::size_t size() const noexcept { return units_.rows(); }
  std::size_t dim() const noexcept { return units_.cols(); }

  /// Mean cosine between each example row and each concept. The mean of
  /// cosines equals the cosine against the mean unit example, so the
  /// examples are folded first; the result is clamped to [-1, 1].
  template <class Rows>
  std::vector<double> score(const Rows& examples) const {
    require(!std::empty(examples), "concept scoring needs at least one example");
    std::vector<double> mean_unit(dim(), 0.0);
    std::size_t e = 0;
    for (const auto& row : examples) {
      require(row.size() == dim(), "example embedding dim does not match concept dim");
      const double norm = l2_norm(row);
      require(norm > 0.0, "zero example embedding");
      for (std::size_t d = 0; d < dim(); ++d) mean_unit[d] += row[d] / norm;
      ++e;
    }
    for (double& x : mean_unit) x /= static_cast<double>(e);
    std::vector<double> out(size());
    for (std::size_t c = 0; c < size(); ++c) {
      const auto u = units_.row(c);
      double s = 0.0;
      for (std::size_t d = 0; d < dim(); ++d) s += mean_unit[d] * u[d];
      out[c] = std::clamp(s, -1.0, 1.0);
    }
    return out;
  }

 private:
  MatrixD units_;
};

/// Mean cosine similarity of E example embeddings against C concepts.
inline std::vector<double> score_concepts(const MatrixF& examples, const MatrixF& concepts) {
  std::vector<std::span<const float>> rows;
  for (std::size_t r = 0; r < examples.rows(); ++r) rows.push_back(examples.row(r));
  return ConceptDirections(concepts).score(rows);
}

struct ConceptScoreTable {
  std::string layer_id;
  MatrixD scores;  // neurons x concepts; dead rows stay zero
  std::vector<bool> dead;
  std::vector<std::size_t> example_counts;
};

inline ConceptScoreTable build_score_table(std::span<const RepresentativeSet> reps,
                                           std::span<const EmbeddingMatrix> frame_embeddings,
                                           const ConceptSet& concepts, const std::string& layer_id, bool dedup = true,
                                           std::size_t workers = 1) {
  const ConceptDirections dirs(concepts.embeddings.values);
  if (!frame_embeddings.empty())
    require(frame_embeddings.front().dim() == dirs.dim(),
            "concept embedding dim " + std::to_string(dirs.dim()) + " does not match frame embedding dim " +
                std::to_string(frame_embeddings.front().dim()));
  ConceptScoreTable t{layer_id, MatrixD(reps.size(), dirs.size()), std::vector<bool>(reps.size(), false),
                      std::vector<std::size_t>(reps.size(), 0)};
  std::vector<char> dead(reps.size(), 0);
  parallel_for(reps.size(), workers, [&](std::size_t n) {
    const auto examples = flatten_examples(reps[n], dedup);
    t.example_counts[n] = examples.size();
    if (examples.empty()) {
      dead[n] = 1;
      return;
    }
    std::vector<std::span<const float>> rows;
    rows.reserve(examples.size());
    for (const auto& r : examples) rows.push_back(frame_embeddings[r.video].values.row(r.frame));
    const auto s = dirs.score(rows);
    std::ranges::copy(s, t.scores.row(n).begin());
  });
  for (std::size_t n = 0; n < reps.size(); ++n) t.dead[n] = dead[n] != 0;
  return t;
}

struct ScoredConcept {
  std::size_t concept_index = 0;
  double score = 0.0;

  friend bool operator==(const ScoredConcept&, const ScoredConcept&) = default;
};

struct NeuronAnnotation {
  std::size_t neuron = 0;
  bool dead = false;
  bool fallback_used = false;
  double theta = 0.0;
  std::vector<ScoredConcept> annotated;  // score descending, ties by concept index

  bool has_concept(std::size_t c) const {
    return std::any_of(annotated.begin(), annotated.end(), [&](const auto& s) { return s.concept_index == c; });
  }
};

/// Concepts with score >= theta; when none qualifies the argmax concept is
/// used and `fallback_used` is set.
inline NeuronAnnotation annotate_neuron(std::size_t neuron, std::span<const double> scores, const ThetaRule& theta) {
  NeuronAnnotation a;
  a.neuron = neuron;
  a.theta = theta.resolve(scores);
  for (std::size_t c = 0; c < scores.size(); ++c)
    if (scores[c] >= a.theta) a.annotated.push_back({c, scores[c]});
  if (a.annotated.empty() && !scores.empty()) {
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    a.annotated.push_back({best, scores[best]});
    a.fallback_used = true;
  }
  std::stable_sort(a.annotated.begin(), a.annotated.end(),
                   [](const auto& x, const auto& y) { return x.score > y.score; });
  return a;
}

inline std::vector<NeuronAnnotation> annotate(const ConceptScoreTable& table, const ThetaRule& theta) {
  std::vector<NeuronAnnotation> out(table.scores.rows());
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (table.dead[n]) {
      out[n].neuron = n;
      out[n].dead = true;
      continue;
    }
    out[n] = annotate_neuron(n, table.scores.row(n), theta);
  }
  return out;
}

inline std::size_t unique_concept_count(std::span<const NeuronAnnotation> annotations) {
  std::set<std::size_t> seen;
  for (const auto& a : annotations)
    for (const auto& s : a.annotated) seen.insert(s.concept_index);
  return seen.size();
}

inline json annotations_to_json(std::span<const NeuronAnnotation> annotations, const ConceptSet& concepts) {
  json out = json::array();
  for (const auto& a : annotations) {
    json list = json::array();
    for (const auto& s : a.annotated) {
      const auto& c = concepts.concepts[s.concept_index];
      list.push_back({{"concept_id", c.concept_id}, {"text", c.text}, {"score", s.score}, {"fallback", a.fallback_used}});
    }
    out.push_back({{"neuron", a.neuron}, {"dead", a.dead}, {"theta", a.theta}, {"concepts", std::move(list)}});
  }
  return out;
}

inline std::vector<NeuronAnnotation> annotations_from_json(const json& j, const ConceptSet& concepts) {
  std::vector<NeuronAnnotation> out;
  for (const auto& jn : j) {
    NeuronAnnotation a;
    a.neuron = jn.at("neuron").get<std::size_t>();
    a.dead = jn.at("dead").get<bool>();
    a.theta = jn.at("theta").get<double>();
    for (const auto& jc : jn.at("concepts")) {
      const auto id = jc.at("concept_id").get<std::string>();
      std::optional<std::size_t> idx;
      for (std::size_t i = 0; i < concepts.size(); ++i)
        if (concepts.concepts[i].concept_id == id) idx = i;
      require(idx.has_value(), "annotation references unknown concept '" + id + "'");
      a.fallback_used = jc.at("fallback").get<bool>();
      a.annotated.push_back({*idx, jc.at("score").get<double>()});
    }
    out.push_back(std::move(a));
  }
  return out;
}

/// N x C score matrix narrowed to float32 for `scores.f32bin`.
inline std::vector<float> scores_as_f32(const ConceptScoreTable& t) {
  std::vector<float> out(t.scores.size());
  std::ranges::transform(t.scores.data(), out.begin(), [](double s) { return static_cast<float>(s); });
  return out;
}

}  // namespace surgx
