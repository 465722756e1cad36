#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/binary_io.hpp"
#include "surgx/error.hpp"
#include "surgx/matrix.hpp"

namespace surgx {

using nlohmann::json;

enum class LayerRole { penultimate, final, other };

inline std::string to_string(LayerRole r) {
  switch (r) {
    case LayerRole::penultimate: return "penultimate";
    case LayerRole::final: return "final";
    case LayerRole::other: return "other";
  }
  return "other";
}

inline LayerRole parse_layer_role(const std::string& s) {
  if (s == "penultimate") return LayerRole::penultimate;
  if (s == "final") return LayerRole::final;
  if (s == "other") return LayerRole::other;
  fail(ErrorKind::validation, "unknown layer role '" + s + "' (expected penultimate, final or other)");
}

/// Which evaluation role a video plays. `all` videos are used both for
/// probing (representative selection) and for explanation metrics.
enum class Split { all, probe, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::all: return "all";
    case Split::probe: return "probe";
    case Split::test: return "test";
  }
  return "all";
}

inline Split parse_split(const std::string& s) {
  if (s == "all") return Split::all;
  if (s == "probe") return Split::probe;
  if (s == "test") return Split::test;
  fail(ErrorKind::validation, "unknown split '" + s + "' (expected all, probe or test)");
}

struct VideoEntry {
  std::string video_id;
  std::size_t frame_count = 0;
  Split split = Split::all;
  std::optional<std::vector<std::uint32_t>> phase_labels;
  std::optional<std::vector<std::uint32_t>> prediction_labels;

  bool is_probe() const noexcept { return split != Split::test; }
  bool is_test() const noexcept { return split != Split::probe; }
};

struct LayerDescriptor {
  std::string layer_id;
  std::size_t neuron_count = 0;
  LayerRole role = LayerRole::other;
};

struct DatasetManifest {
  std::string dataset_id;
  double fps = 1.0;
  std::size_t embedding_dim = 0;
  std::vector<std::string> phase_names;
  std::vector<VideoEntry> videos;
  std::vector<LayerDescriptor> layers;

  std::size_t phase_count() const noexcept { return phase_names.size(); }

  std::optional<std::size_t> video_index(std::string_view id) const {
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (videos[i].video_id == id) return i;
    return std::nullopt;
  }

  const LayerDescriptor& layer(std::string_view id) const {
    for (const auto& l : layers)
      if (l.layer_id == id) return l;
    fail(ErrorKind::validation, "unknown layer '" + std::string(id) + "'");
  }

  bool has_layer(std::string_view id) const {
    return std::any_of(layers.begin(), layers.end(), [&](const auto& l) { return l.layer_id == id; });
  }

  /// First layer carrying `role`, if any.
  const LayerDescriptor* layer_with_role(LayerRole role) const {
    for (const auto& l : layers)
      if (l.role == role) return &l;
    return nullptr;
  }

  std::optional<std::size_t> phase_index(std::string_view name) const {
    for (std::size_t i = 0; i < phase_names.size(); ++i)
      if (phase_names[i] == name) return i;
    return std::nullopt;
  }
};

struct ActivationTrace {
  std::string video_id;
  std::string layer_id;
  MatrixF values;  // frames x neurons
};

struct EmbeddingMatrix {
  std::string owner_id;
  MatrixF values;  // rows x dim

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

/// Final linear projection fed by the penultimate layer: logits = W a + b.
struct LinearHead {
  std::string layer_id;
  MatrixF weights;  // phases x neurons
  std::vector<float> bias;

  std::size_t phase_count() const noexcept { return weights.rows(); }
  std::size_t neuron_count() const noexcept { return weights.cols(); }

  std::vector<double> logits(std::span<const float> activations) const {
    require(activations.size() == neuron_count(), "activation length does not match head width");
    std::vector<double> out(phase_count());
    for (std::size_t p = 0; p < phase_count(); ++p) {
      double acc = bias[p];
      const auto w = weights.row(p);
      for (std::size_t i = 0; i < w.size(); ++i) acc += static_cast<double>(w[i]) * activations[i];
      out[p] = acc;
    }
    return out;
  }

  std::size_t predict(std::span<const float> activations) const {
    const auto l = logits(activations);
    return static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
  }
};

/// Everything an exporter hands to the engine. Immutable once loaded.
struct Container {
  DatasetManifest manifest;
  /// layer id -> one trace per video, in manifest video order.
  std::map<std::string, std::vector<ActivationTrace>> traces;
  /// One frame-embedding matrix per video, in manifest video order.
  std::vector<EmbeddingMatrix> frame_embeddings;
  /// layer id -> per-video gradients of the predicted logit (frames x neurons).
  std::map<std::string, std::vector<MatrixF>> gradients;
  std::optional<LinearHead> head;

  /// Populated by load_container.
  std::size_t clamped_entries = 0;
  std::string fingerprint;

  std::span<const ActivationTrace> layer_traces(const std::string& layer_id) const {
    auto it = traces.find(layer_id);
    if (it == traces.end()) fail(ErrorKind::validation, "no traces for layer '" + layer_id + "'");
    return it->second;
  }

  const MatrixF* layer_gradients(const std::string& layer_id, std::size_t video) const {
    auto it = gradients.find(layer_id);
    if (it == gradients.end()) return nullptr;
    return &it->second.at(video);
  }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_manifest(const DatasetManifest& m) {
  require(!m.phase_names.empty(), "manifest must list at least one phase");
  {
    std::set<std::string> seen;
    for (const auto& p : m.phase_names) {
      require(!p.empty(), "phase names must be non-empty");
      require(seen.insert(p).second, "duplicate phase name '" + p + "'");
    }
  }
  require(std::isfinite(m.fps) && m.fps > 0.0, "fps must be positive");
  require(m.embedding_dim > 0, "embedding_dim must be positive");
  require(!m.videos.empty(), "manifest must list at least one video");
  {
    std::set<std::string> seen;
    for (const auto& v : m.videos) {
      require(!v.video_id.empty(), "video ids must be non-empty");
      require(seen.insert(v.video_id).second, "duplicate video id '" + v.video_id + "'");
      require(v.frame_count > 0, "empty tensor: video '" + v.video_id + "' has 0 frames");
      const auto check_labels = [&](const std::optional<std::vector<std::uint32_t>>& labels, const char* what) {
        if (!labels) return;
        require(labels->size() == v.frame_count, std::string(what) + " of video '" + v.video_id + "' has length " +
                                                     std::to_string(labels->size()) + ", expected " +
                                                     std::to_string(v.frame_count));
        for (auto l : *labels)
          require(l < m.phase_count(), std::string(what) + " of video '" + v.video_id + "' contains phase index " +
                                           std::to_string(l) + " outside [0, " + std::to_string(m.phase_count()) + ")");
      };
      check_labels(v.phase_labels, "phase_labels");
      check_labels(v.prediction_labels, "prediction_labels");
    }
  }
  require(!m.layers.empty(), "manifest must describe at least one layer");
  {
    std::set<std::string> seen;
    for (const auto& l : m.layers) {
      require(!l.layer_id.empty(), "layer ids must be non-empty");
      require(seen.insert(l.layer_id).second, "duplicate layer id '" + l.layer_id + "'");
      require(l.neuron_count > 0, "layer '" + l.layer_id + "' must have at least one neuron");
    }
  }
}

namespace detail {

inline void check_shape(const MatrixF& m, std::size_t rows, std::size_t cols, const std::string& entity) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorKind::validation, "dimension mismatch for " + entity + ": expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + ", found " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()));
  }
}

inline void check_finite(const MatrixF& m, const std::string& entity) {
  for (float v : m.data())
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite value in " + entity);
}

inline void check_no_zero_rows(const MatrixF& m, const std::string& entity) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    if (std::all_of(row.begin(), row.end(), [](float v) { return v == 0.0f; }))
      fail(ErrorKind::validation, "zero-row embedding: row " + std::to_string(r) + " of " + entity +
                                      " is the all-zero vector");
  }
}

inline std::string trace_entity(const std::string& video, const std::string& layer) {
  return "trace of video '" + video + "' layer '" + layer + "'";
}

}  // namespace detail

/// Checks every cross-object invariant. Negative activations are an error
/// here; load_container clamps them before validating.
inline void validate_container(const Container& c) {
  const auto& m = c.manifest;
  validate_manifest(m);
  for (const auto& layer : m.layers) {
    auto it = c.traces.find(layer.layer_id);
    require(it != c.traces.end(), "missing traces for layer '" + layer.layer_id + "'");
    require(it->second.size() == m.videos.size(),
            "layer '" + layer.layer_id + "' has " + std::to_string(it->second.size()) + " traces for " +
                std::to_string(m.videos.size()) + " videos");
    for (std::size_t v = 0; v < m.videos.size(); ++v) {
      const auto& t = it->second[v];
      const auto entity = detail::trace_entity(m.videos[v].video_id, layer.layer_id);
      require(t.video_id == m.videos[v].video_id && t.layer_id == layer.layer_id,
              "trace order does not follow manifest order at " + entity);
      detail::check_shape(t.values, m.videos[v].frame_count, layer.neuron_count, entity);
      detail::check_finite(t.values, entity);
      for (float a : t.values.data()) require(a >= 0.0f, "negative activation in " + entity);
    }
  }
  require(c.traces.size() == m.layers.size(), "traces reference a layer missing from the manifest");
  require(c.frame_embeddings.size() == m.videos.size(), "one frame-embedding matrix is required per video");
  for (std::size_t v = 0; v < m.videos.size(); ++v) {
    const auto& e = c.frame_embeddings[v];
    const auto entity = "frame embeddings of video '" + m.videos[v].video_id + "'";
    require(e.owner_id == m.videos[v].video_id, "frame embedding order does not follow manifest order at " + entity);
    detail::check_shape(e.values, m.videos[v].frame_count, m.embedding_dim, entity);
    detail::check_finite(e.values, entity);
    detail::check_no_zero_rows(e.values, entity);
  }
  for (const auto& [layer_id, per_video] : c.gradients) {
    require(m.has_layer(layer_id), "gradients reference unknown layer '" + layer_id + "'");
    require(per_video.size() == m.videos.size(), "gradients of layer '" + layer_id + "' must cover every video");
    for (std::size_t v = 0; v < m.videos.size(); ++v) {
      const auto entity = "gradients of video '" + m.videos[v].video_id + "' layer '" + layer_id + "'";
      detail::check_shape(per_video[v], m.videos[v].frame_count, m.layer(layer_id).neuron_count, entity);
      detail::check_finite(per_video[v], entity);
    }
  }
  if (c.head) {
    const auto& h = *c.head;
    require(m.has_layer(h.layer_id), "head references unknown layer '" + h.layer_id + "'");
    const auto n = m.layer(h.layer_id).neuron_count;
    detail::check_shape(h.weights, m.phase_count(), n, "head weights");
    require(h.bias.size() == m.phase_count(), "dimension mismatch for head bias: expected length " +
                                                  std::to_string(m.phase_count()) + ", found " +
                                                  std::to_string(h.bias.size()));
    detail::check_finite(h.weights, "head weights");
    for (float b : h.bias)
      if (!std::isfinite(b)) fail(ErrorKind::numeric, "non-finite value in head bias");
  }
}

// ---------------------------------------------------------------------------
// Manifest (de)serialization

namespace detail {

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::validation, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::validation, where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

/// Accepts a JSON number or a "num/den" string.
inline double parse_fps(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    double num = 0, den = 1;
    auto parse = [&](std::string_view part, double& out) {
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
      require(ec == std::errc{} && ptr == part.data() + part.size(), "fps '" + s + "' is not a rational number");
    };
    if (slash == std::string::npos) {
      parse(s, num);
    } else {
      parse(std::string_view(s).substr(0, slash), num);
      parse(std::string_view(s).substr(slash + 1), den);
      require(den != 0, "fps denominator must be non-zero");
    }
    return num / den;
  }
  fail(ErrorKind::validation, "fps must be a number or a 'num/den' string");
}

inline std::string tensor_name(const char* prefix, std::size_t a) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s/v%04zu.f32bin", prefix, a);
  return buf;
}

inline std::string tensor_name(const char* prefix, std::size_t a, std::size_t b) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s/v%04zu_l%02zu.f32bin", prefix, a, b);
  return buf;
}

}  // namespace detail

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr int kFormatVersion = 1;

inline DatasetManifest parse_manifest(const json& j) {
  DatasetManifest m;
  const std::string where = "manifest";
  m.dataset_id = detail::get_field<std::string>(j, "dataset_id", where);
  if (!j.contains("fps")) fail(ErrorKind::validation, "manifest: missing field 'fps'");
  m.fps = detail::parse_fps(j.at("fps"));
  m.embedding_dim = detail::get_field<std::size_t>(j, "embedding_dim", where);
  m.phase_names = detail::get_field<std::vector<std::string>>(j, "phase_names", where);
  for (const auto& jl : detail::get_field<json>(j, "layers", where)) {
    LayerDescriptor l;
    l.layer_id = detail::get_field<std::string>(jl, "layer_id", "layer");
    l.neuron_count = detail::get_field<std::size_t>(jl, "neuron_count", "layer '" + l.layer_id + "'");
    l.role = parse_layer_role(detail::get_field<std::string>(jl, "role", "layer '" + l.layer_id + "'"));
    m.layers.push_back(std::move(l));
  }
  for (const auto& jv : detail::get_field<json>(j, "videos", where)) {
    VideoEntry v;
    v.video_id = detail::get_field<std::string>(jv, "video_id", "video");
    const auto vw = "video '" + v.video_id + "'";
    v.frame_count = detail::get_field<std::size_t>(jv, "frame_count", vw);
    if (jv.contains("split")) v.split = parse_split(jv.at("split").get<std::string>());
    if (jv.contains("phase_labels")) v.phase_labels = detail::get_field<std::vector<std::uint32_t>>(jv, "phase_labels", vw);
    if (jv.contains("prediction_labels"))
      v.prediction_labels = detail::get_field<std::vector<std::uint32_t>>(jv, "prediction_labels", vw);
    m.videos.push_back(std::move(v));
  }
  return m;
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "surgx-container";
  j["version"] = kFormatVersion;
  j["dataset_id"] = m.dataset_id;
  j["fps"] = m.fps;
  j["embedding_dim"] = m.embedding_dim;
  j["phase_names"] = m.phase_names;
  j["layers"] = json::array();
  for (const auto& l : m.layers)
    j["layers"].push_back({{"layer_id", l.layer_id}, {"neuron_count", l.neuron_count}, {"role", to_string(l.role)}});
  j["videos"] = json::array();
  for (const auto& v : m.videos) {
    json jv{{"video_id", v.video_id}, {"frame_count", v.frame_count}, {"split", to_string(v.split)}};
    if (v.phase_labels) jv["phase_labels"] = *v.phase_labels;
    if (v.prediction_labels) jv["prediction_labels"] = *v.prediction_labels;
    j["videos"].push_back(std::move(jv));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Load / save

inline Container load_container(const fs::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) fail(ErrorKind::missing_artifact, "missing file: " + manifest_path.string());
  const std::string manifest_bytes = read_file_bytes(manifest_path);
  json j;
  try {
    j = json::parse(manifest_bytes);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, "manifest.json is not valid JSON: " + std::string(e.what()));
  }

  Container c;
  c.manifest = parse_manifest(j);
  validate_manifest(c.manifest);
  const auto& m = c.manifest;

  Fnv1a fp;
  fp.update(manifest_bytes);
  std::string raw;
  auto read_tensor = [&](const std::string& file, std::size_t rows, std::size_t cols, const std::string& entity) {
    if (file.empty()) fail(ErrorKind::validation, entity + ": empty file name");
    if (!fs::exists(dir / file)) fail(ErrorKind::missing_artifact, "missing file: " + (dir / file).string() + " (" + entity + ")");
    MatrixF t = read_f32bin(dir / file, rows, cols, entity, &raw);
    fp.update_u64(raw.size()).update(raw);
    return t;
  };

  // traces: exactly one per (video, layer)
  std::map<std::pair<std::size_t, std::string>, std::string> trace_files;
  for (const auto& jt : detail::get_field<json>(j, "traces", "manifest")) {
    const auto vid = detail::get_field<std::string>(jt, "video_id", "trace");
    const auto lid = detail::get_field<std::string>(jt, "layer_id", "trace");
    const auto vi = m.video_index(vid);
    require(vi.has_value(), "trace references unknown video '" + vid + "'");
    require(m.has_layer(lid), "trace references unknown layer '" + lid + "'");
    require(trace_files.emplace(std::pair{*vi, lid}, detail::get_field<std::string>(jt, "file", "trace")).second,
            "duplicate " + detail::trace_entity(vid, lid));
  }
  for (const auto& layer : m.layers) {
    auto& per_video = c.traces[layer.layer_id];
    for (std::size_t v = 0; v < m.videos.size(); ++v) {
      const auto entity = detail::trace_entity(m.videos[v].video_id, layer.layer_id);
      auto it = trace_files.find({v, layer.layer_id});
      if (it == trace_files.end()) fail(ErrorKind::validation, "missing " + entity + " in manifest");
      ActivationTrace t{m.videos[v].video_id, layer.layer_id,
                        read_tensor(it->second, m.videos[v].frame_count, layer.neuron_count, entity)};
      for (float& a : t.values.data()) {
        if (a < 0.0f) {
          a = 0.0f;
          ++c.clamped_entries;
        }
      }
      per_video.push_back(std::move(t));
    }
  }

  std::map<std::size_t, std::string> embedding_files;
  for (const auto& je : detail::get_field<json>(j, "frame_embeddings", "manifest")) {
    const auto vid = detail::get_field<std::string>(je, "video_id", "frame embedding");
    const auto vi = m.video_index(vid);
    require(vi.has_value(), "frame embedding references unknown video '" + vid + "'");
    require(embedding_files.emplace(*vi, detail::get_field<std::string>(je, "file", "frame embedding")).second,
            "duplicate frame embeddings for video '" + vid + "'");
  }
  for (std::size_t v = 0; v < m.videos.size(); ++v) {
    const auto entity = "frame embeddings of video '" + m.videos[v].video_id + "'";
    auto it = embedding_files.find(v);
    if (it == embedding_files.end()) fail(ErrorKind::validation, "missing " + entity + " in manifest");
    c.frame_embeddings.push_back(
        {m.videos[v].video_id, read_tensor(it->second, m.videos[v].frame_count, m.embedding_dim, entity)});
  }

  if (j.contains("gradients")) {
    std::map<std::pair<std::size_t, std::string>, std::string> grad_files;
    for (const auto& jg : j.at("gradients")) {
      const auto vid = detail::get_field<std::string>(jg, "video_id", "gradient");
      const auto lid = detail::get_field<std::string>(jg, "layer_id", "gradient");
      const auto vi = m.video_index(vid);
      require(vi.has_value(), "gradient references unknown video '" + vid + "'");
      require(m.has_layer(lid), "gradient references unknown layer '" + lid + "'");
      require(grad_files.emplace(std::pair{*vi, lid}, detail::get_field<std::string>(jg, "file", "gradient")).second,
              "duplicate gradients for video '" + vid + "' layer '" + lid + "'");
    }
    std::set<std::string> grad_layers;
    for (const auto& [key, _] : grad_files) grad_layers.insert(key.second);
    for (const auto& lid : grad_layers) {
      auto& per_video = c.gradients[lid];
      for (std::size_t v = 0; v < m.videos.size(); ++v) {
        const auto entity = "gradients of video '" + m.videos[v].video_id + "' layer '" + lid + "'";
        auto it = grad_files.find({v, lid});
        if (it == grad_files.end()) fail(ErrorKind::validation, "missing " + entity + " in manifest");
        per_video.push_back(read_tensor(it->second, m.videos[v].frame_count, m.layer(lid).neuron_count, entity));
      }
    }
  }

  if (j.contains("head") && !j.at("head").is_null()) {
    const auto& jh = j.at("head");
    LinearHead h;
    h.layer_id = detail::get_field<std::string>(jh, "layer_id", "head");
    require(m.has_layer(h.layer_id), "head references unknown layer '" + h.layer_id + "'");
    const auto n = m.layer(h.layer_id).neuron_count;
    h.weights = read_tensor(detail::get_field<std::string>(jh, "weights_file", "head"), m.phase_count(), n, "head weights");
    const MatrixF bias = read_tensor(detail::get_field<std::string>(jh, "bias_file", "head"), 1, m.phase_count(), "head bias");
    h.bias.assign(bias.data().begin(), bias.data().end());
    c.head = std::move(h);
  }

  validate_container(c);
  c.fingerprint = fp.hex();
  return c;
}

/// Writes `c` under `dir`. Tensor files are named by position, so ids may
/// contain any characters.
inline void save_container(const Container& c, const fs::path& dir) {
  validate_container(c);
  const auto& m = c.manifest;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());

  json j = manifest_to_json(m);
  j["traces"] = json::array();
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& per_video = c.traces.at(m.layers[li].layer_id);
    for (std::size_t v = 0; v < m.videos.size(); ++v) {
      const auto name = detail::tensor_name("traces", v, li);
      write_f32bin(dir / name, per_video[v].values.data());
      j["traces"].push_back({{"video_id", m.videos[v].video_id}, {"layer_id", m.layers[li].layer_id}, {"file", name}});
    }
  }
  j["frame_embeddings"] = json::array();
  for (std::size_t v = 0; v < m.videos.size(); ++v) {
    const auto name = detail::tensor_name("embeddings", v);
    write_f32bin(dir / name, c.frame_embeddings[v].values.data());
    j["frame_embeddings"].push_back({{"video_id", m.videos[v].video_id}, {"file", name}});
  }
  if (!c.gradients.empty()) {
    j["gradients"] = json::array();
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
      auto it = c.gradients.find(m.layers[li].layer_id);
      if (it == c.gradients.end()) continue;
      for (std::size_t v = 0; v < m.videos.size(); ++v) {
        const auto name = detail::tensor_name("gradients", v, li);
        write_f32bin(dir / name, it->second[v].data());
        j["gradients"].push_back({{"video_id", m.videos[v].video_id}, {"layer_id", it->first}, {"file", name}});
      }
    }
  }
  if (c.head) {
    write_f32bin(dir / "head_weights.f32bin", c.head->weights.data());
    write_f32bin(dir / "head_bias.f32bin", c.head->bias);
    j["head"] = {{"layer_id", c.head->layer_id}, {"weights_file", "head_weights.f32bin"}, {"bias_file", "head_bias.f32bin"}};
  }
  write_file_bytes(dir / kManifestFile, j.dump(1) + "\n");
}

}  // namespace surgx
