#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "surgx/container.hpp"
#include "surgx/rng.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("surgx_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Single-neuron traces for selection tests: per_video[v][f].
inline std::vector<surgx::ActivationTrace> traces_from(const std::vector<std::vector<float>>& per_video,
                                                        std::size_t neurons = 1) {
  std::vector<surgx::ActivationTrace> out;
  for (std::size_t v = 0; v < per_video.size(); ++v) {
    surgx::MatrixF m(per_video[v].size(), neurons);
    for (std::size_t f = 0; f < per_video[v].size(); ++f)
      for (std::size_t n = 0; n < neurons; ++n) m(f, n) = per_video[v][f];
    out.push_back({"v" + std::to_string(v), "pen", std::move(m)});
  }
  return out;
}

/// Sparse random activations: zero with probability `zero_p`, 1/8 quantized
/// values otherwise so that ties occur.
inline std::vector<std::vector<float>> random_activations(surgx::Rng& rng, std::size_t videos, std::size_t max_frames,
                                                           double zero_p = 0.3) {
  std::vector<std::vector<float>> out(videos);
  for (auto& v : out) {
    v.resize(1 + rng.index(max_frames));
    for (float& a : v) a = rng.uniform() < zero_p ? 0.0f : static_cast<float>(1 + rng.index(16)) / 8.0f;
  }
  return out;
}

}  // namespace fixtures

#include "surgx/concepts.hpp"

namespace fixtures {

/// In-memory concept set over the given embedding rows; ids c0, c1, ...
inline surgx::ConceptSet concept_set(const surgx::MatrixF& rows, std::vector<std::string> texts = {}) {
  surgx::ConceptSet s;
  s.set_id = "test_concepts";
  s.embeddings = {s.set_id, rows};
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto text = i < texts.size() ? texts[i] : "concept " + std::to_string(i);
    s.concepts.push_back({"c" + std::to_string(i), text,
                          text.find(' ') == std::string::npos ? surgx::ConceptForm::word : surgx::ConceptForm::sentence,
                          i});
  }
  s.fingerprint = "test";
  return s;
}

inline surgx::PhaseTextBank phase_bank(const surgx::MatrixF& word, const surgx::MatrixF& sentence) {
  surgx::PhaseTextBank b;
  for (std::size_t p = 0; p < word.rows(); ++p) {
    b.phase_names.push_back("phase" + std::to_string(p));
    b.word_texts.push_back("w" + std::to_string(p));
    b.sentence_texts.push_back("s" + std::to_string(p));
  }
  b.word = word;
  b.sentence = sentence;
  b.fingerprint = "test";
  return b;
}

/// Standard basis vector e_i in R^dim.
inline std::vector<float> basis(std::size_t dim, std::size_t i) {
  std::vector<float> v(dim, 0.0f);
  v[i] = 1.0f;
  return v;
}

inline surgx::MatrixF rows_of(const std::vector<std::vector<float>>& rows) {
  surgx::MatrixF m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace fixtures
