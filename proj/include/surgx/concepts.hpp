#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/binary_io.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"

namespace surgx {

enum class ConceptForm { word, sentence };

inline std::string to_string(ConceptForm f) { return f == ConceptForm::word ? "word" : "sentence"; }

inline ConceptForm parse_concept_form(const std::string& s) {
  if (s == "word") return ConceptForm::word;
  if (s == "sentence") return ConceptForm::sentence;
  fail(ErrorKind::validation, "unknown concept form '" + s + "' (expected word or sentence)");
}

struct Concept {
  std::string concept_id;
  std::string text;
  ConceptForm form = ConceptForm::word;
  std::size_t embedding_row = 0;
};

struct ConceptSet {
  std::string set_id;
  std::vector<Concept> concepts;
  EmbeddingMatrix embeddings;
  std::string fingerprint;

  std::size_t size() const noexcept { return concepts.size(); }
  std::span<const float> embedding(std::size_t concept_index) const {
    return embeddings.values.row(concepts[concept_index].embedding_row);
  }
  std::optional<std::size_t> find(std::string_view id_or_text) const {
    for (std::size_t i = 0; i < concepts.size(); ++i)
      if (concepts[i].concept_id == id_or_text) return i;
    for (std::size_t i = 0; i < concepts.size(); ++i)
      if (concepts[i].text == id_or_text) return i;
    return std::nullopt;
  }
};

/// Word- and sentence-form text embeddings for every phase.
struct PhaseTextBank {
  std::vector<std::string> phase_names;
  std::vector<std::string> word_texts;
  std::vector<std::string> sentence_texts;
  MatrixF word;      // P x D
  MatrixF sentence;  // P x D
  std::string fingerprint;

  std::size_t phase_count() const noexcept { return phase_names.size(); }
  std::size_t dim() const noexcept { return word.cols(); }
};

struct ConceptSetStats {
  std::size_t word = 0;
  std::size_t sentence = 0;
  double min_norm = 0.0;
  double max_norm = 0.0;

  friend bool operator==(const ConceptSetStats&, const ConceptSetStats&) = default;
};

inline double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

inline ConceptSetStats concept_set_stats(const ConceptSet& set) {
  ConceptSetStats s;
  if (set.concepts.empty()) return s;
  s.min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    (set.concepts[i].form == ConceptForm::word ? s.word : s.sentence) += 1;
    const double n = l2_norm(set.embedding(i));
    s.min_norm = std::min(s.min_norm, n);
    s.max_norm = std::max(s.max_norm, n);
  }
  return s;
}

/// The embedding file sits next to the JSON-lines file with the `.f32bin`
/// extension: `concepts.jsonl` pairs with `concepts.f32bin`.
inline fs::path concept_embedding_path(const fs::path& jsonl) {
  auto p = jsonl;
  p.replace_extension(".f32bin");
  return p;
}

inline std::string concept_set_id_from_path(const fs::path& jsonl) {
  const auto stem = jsonl.stem().string();
  if (stem == "concepts" && jsonl.has_parent_path()) {
    auto parent = fs::absolute(jsonl).parent_path().filename().string();
    if (!parent.empty()) return parent;
  }
  return stem;
}

/// Loads a concept set. `dim` is the embedding width expected by the caller
/// (normally the container's embedding_dim); when omitted it is inferred
/// from the file size.
inline ConceptSet load_concept_set(const fs::path& jsonl, std::optional<std::size_t> dim = std::nullopt) {
  if (!fs::exists(jsonl)) fail(ErrorKind::missing_artifact, "missing concept file: " + jsonl.string());
  const std::string text_bytes = read_file_bytes(jsonl);
  ConceptSet set;
  set.set_id = concept_set_id_from_path(jsonl);
  std::istringstream lines(text_bytes);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen_text, seen_id;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::validation, jsonl.filename().string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    const auto where = jsonl.filename().string() + ":" + std::to_string(line_no);
    Concept c;
    c.concept_id = detail::get_field<std::string>(j, "id", where);
    c.text = detail::get_field<std::string>(j, "text", where);
    c.form = parse_concept_form(detail::get_field<std::string>(j, "form", where));
    c.embedding_row = set.concepts.size();
    require(!c.text.empty(), where + ": empty concept text");
    require(seen_text.insert(c.text).second, where + ": duplicate concept text '" + c.text + "'");
    require(seen_id.insert(c.concept_id).second, where + ": duplicate concept id '" + c.concept_id + "'");
    set.concepts.push_back(std::move(c));
  }

  const auto emb_path = concept_embedding_path(jsonl);
  if (!fs::exists(emb_path)) fail(ErrorKind::missing_artifact, "missing concept embeddings: " + emb_path.string());
  const auto rows = set.concepts.size();
  std::size_t width = 0;
  if (dim) {
    width = *dim;
  } else {
    const auto bytes = fs::file_size(emb_path);
    if (rows == 0) {
      require(bytes == 0, "row-count mismatch: " + emb_path.filename().string() + " holds data for an empty concept set");
    } else {
      require(bytes % (4 * rows) == 0 && bytes > 0,
              "row-count mismatch: " + emb_path.filename().string() + " cannot hold " + std::to_string(rows) + " rows");
      width = bytes / (4 * rows);
    }
  }
  std::string raw;
  try {
    set.embeddings = {set.set_id, read_f32bin(emb_path, rows, width, "concept set '" + set.set_id + "'", &raw)};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::validation) throw;
    fail(ErrorKind::validation, "row-count mismatch: " + std::string(e.what()));
  }
  detail::check_no_zero_rows(set.embeddings.values, "concept set '" + set.set_id + "'");
  set.fingerprint = Fnv1a{}.update(text_bytes).update(raw).hex();
  return set;
}

inline void save_concept_set(const ConceptSet& set, const fs::path& jsonl) {
  std::string out;
  for (const auto& c : set.concepts)
    out += json{{"id", c.concept_id}, {"text", c.text}, {"form", to_string(c.form)}}.dump() + "\n";
  write_file_bytes(jsonl, out);
  MatrixF rows(set.size(), set.embeddings.dim());
  for (std::size_t i = 0; i < set.size(); ++i) std::ranges::copy(set.embedding(i), rows.row(i).begin());
  write_f32bin(concept_embedding_path(jsonl), rows.data());
}

inline constexpr const char* kPhaseTextsFile = "phase_texts.json";

/// `phase_texts.json` lists the phases; its embedding file holds 2P rows,
/// the P word-form rows followed by the P sentence-form rows.
inline PhaseTextBank load_phase_bank(const fs::path& json_path) {
  if (!fs::exists(json_path)) fail(ErrorKind::missing_artifact, "missing phase text bank: " + json_path.string());
  const std::string bytes = read_file_bytes(json_path);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error&) {
    fail(ErrorKind::validation, json_path.filename().string() + " is not valid JSON");
  }
  PhaseTextBank bank;
  const std::string where = json_path.filename().string();
  const auto dim = detail::get_field<std::size_t>(j, "dim", where);
  const auto file = detail::get_field<std::string>(j, "embeddings_file", where);
  for (const auto& jp : detail::get_field<json>(j, "phases", where)) {
    bank.phase_names.push_back(detail::get_field<std::string>(jp, "name", where));
    bank.word_texts.push_back(detail::get_field<std::string>(jp, "word", where));
    bank.sentence_texts.push_back(detail::get_field<std::string>(jp, "sentence", where));
  }
  const auto p = bank.phase_count();
  require(p > 0, where + ": no phases");
  std::string raw;
  const MatrixF all = read_f32bin(json_path.parent_path() / file, 2 * p, dim, "phase text bank", &raw);
  detail::check_no_zero_rows(all, "phase text bank");
  bank.word = MatrixF(p, dim);
  bank.sentence = MatrixF(p, dim);
  for (std::size_t i = 0; i < p; ++i) {
    std::ranges::copy(all.row(i), bank.word.row(i).begin());
    std::ranges::copy(all.row(p + i), bank.sentence.row(i).begin());
  }
  bank.fingerprint = Fnv1a{}.update(bytes).update(raw).hex();
  return bank;
}

inline void save_phase_bank(const PhaseTextBank& bank, const fs::path& json_path,
                            const std::string& embeddings_file = "phase_texts.f32bin") {
  json j{{"dim", bank.dim()}, {"embeddings_file", embeddings_file}, {"phases", json::array()}};
  for (std::size_t i = 0; i < bank.phase_count(); ++i)
    j["phases"].push_back({{"name", bank.phase_names[i]}, {"word", bank.word_texts[i]}, {"sentence", bank.sentence_texts[i]}});
  write_file_bytes(json_path, j.dump(2) + "\n");
  std::vector<float> all(bank.word.data().begin(), bank.word.data().end());
  all.insert(all.end(), bank.sentence.data().begin(), bank.sentence.data().end());
  write_f32bin(json_path.parent_path() / embeddings_file, all);
}

inline void check_phase_bank(const PhaseTextBank& bank, const DatasetManifest& m) {
  require(bank.phase_count() == m.phase_count(), "phase text bank lists " + std::to_string(bank.phase_count()) +
                                                     " phases, manifest has " + std::to_string(m.phase_count()));
  require(bank.dim() == m.embedding_dim, "phase text embedding dim " + std::to_string(bank.dim()) +
                                             " does not match container embedding_dim " + std::to_string(m.embedding_dim));
}

}  // namespace surgx
