#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"
#include "surgx/parallel.hpp"

namespace surgx {

enum class Scope { global, video_wise };

struct TopK {
  std::size_t k = 1;
};

/// Keeps frames whose activation is at least alpha times the scope maximum.
struct AdaptiveThreshold {
  double alpha = 0.95;
};

struct SelectionStrategy {
  Scope scope = Scope::video_wise;
  std::variant<TopK, AdaptiveThreshold> rule = AdaptiveThreshold{};

  void validate() const {
    if (const auto* t = std::get_if<TopK>(&rule)) require(t->k >= 1, "top-K selection needs K >= 1");
    if (const auto* a = std::get_if<AdaptiveThreshold>(&rule))
      require(a->alpha > 0.0 && a->alpha <= 1.0, "threshold selection needs 0 < alpha <= 1");
  }

  bool is_topk() const noexcept { return std::holds_alternative<TopK>(rule); }

  /// CLI spelling: {global|video}-{topk|threshold}.
  std::string name() const {
    return std::string(scope == Scope::global ? "global" : "video") + (is_topk() ? "-topk" : "-threshold");
  }

  json to_json() const {
    json j{{"strategy", name()}};
    if (is_topk())
      j["k"] = std::get<TopK>(rule).k;
    else
      j["alpha"] = std::get<AdaptiveThreshold>(rule).alpha;
    return j;
  }

  /// Unspecified K defaults to 40 for the global scope and 1 per video.
  static SelectionStrategy parse(std::string_view name, std::optional<std::size_t> k = std::nullopt,
                                 std::optional<double> alpha = std::nullopt) {
    SelectionStrategy s;
    const auto dash = name.find('-');
    require(dash != std::string_view::npos, "strategy must look like {global|video}-{topk|threshold}, got '" +
                                                std::string(name) + "'");
    const auto scope = name.substr(0, dash);
    const auto rule = name.substr(dash + 1);
    if (scope == "global")
      s.scope = Scope::global;
    else if (scope == "video")
      s.scope = Scope::video_wise;
    else
      fail(ErrorKind::validation, "unknown selection scope '" + std::string(scope) + "'");
    if (rule == "topk")
      s.rule = TopK{k.value_or(s.scope == Scope::global ? 40 : 1)};
    else if (rule == "threshold")
      s.rule = AdaptiveThreshold{alpha.value_or(0.95)};
    else
      fail(ErrorKind::validation, "unknown selection rule '" + std::string(rule) + "'");
    s.validate();
    return s;
  }
};

/// Temporal context attached to each anchor: n_prev earlier frames spaced
/// dilation_s seconds apart.
struct SequenceSpec {
  std::size_t n_prev = 9;
  double dilation_s = 5.0;

  void validate() const {
    require(n_prev == 0 || (std::isfinite(dilation_s) && dilation_s > 0.0),
            "sequence dilation must be positive when n_prev > 0");
  }

  json to_json() const { return {{"n_prev", n_prev}, {"dilation_s", dilation_s}}; }
};

/// Frame stride in frames: round(dilation_s * fps).
inline std::size_t frame_stride(const SequenceSpec& spec, double fps) {
  spec.validate();
  if (spec.n_prev == 0) return 0;
  const auto stride = std::llround(spec.dilation_s * fps);
  if (stride <= 0)
    fail(ErrorKind::validation, "dilation of " + std::to_string(spec.dilation_s) + " s at " + std::to_string(fps) +
                                    " fps rounds to a 0-frame stride");
  return static_cast<std::size_t>(stride);
}

struct FrameRef {
  std::uint32_t video = 0;  // manifest video index
  std::uint32_t frame = 0;

  friend auto operator<=>(const FrameRef&, const FrameRef&) = default;
};

struct RepresentativeSet {
  std::size_t neuron = 0;
  std::vector<std::vector<FrameRef>> sequences;

  bool dead() const noexcept { return sequences.empty(); }
};

namespace detail {

/// Rank of each video id among `videos`, used for lexicographic tie-breaks.
inline std::vector<std::size_t> id_ranks(std::span<const ActivationTrace> traces, std::span<const std::size_t> videos) {
  std::vector<std::size_t> order(videos.begin(), videos.end());
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return traces[a].video_id < traces[b].video_id; });
  std::vector<std::size_t> rank(traces.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

inline std::vector<FrameRef> select_neuron(std::span<const ActivationTrace> traces, std::span<const std::size_t> videos,
                                           const std::vector<std::size_t>& rank, const SelectionStrategy& strategy,
                                           std::size_t neuron) {
  struct Candidate {
    float activation;
    std::size_t rank;
    FrameRef ref;
  };
  const auto better = [](const Candidate& a, const Candidate& b) {
    if (a.activation != b.activation) return a.activation > b.activation;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.ref.frame < b.ref.frame;
  };
  const auto collect = [&](std::span<const std::size_t> scope_videos) {
    std::vector<Candidate> out;
    for (auto v : scope_videos) {
      const auto& m = traces[v].values;
      for (std::size_t f = 0; f < m.rows(); ++f) {
        const float a = m(f, neuron);
        if (a > 0.0f) out.push_back({a, rank[v], {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(f)}});
      }
    }
    return out;
  };
  const auto pick = [&](std::vector<Candidate> cands, std::vector<FrameRef>& out) {
    if (cands.empty()) return;
    if (const auto* t = std::get_if<TopK>(&strategy.rule)) {
      const auto k = std::min(t->k, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), better);
      for (std::size_t i = 0; i < k; ++i) out.push_back(cands[i].ref);
    } else {
      const double alpha = std::get<AdaptiveThreshold>(strategy.rule).alpha;
      float peak = 0.0f;
      for (const auto& c : cands) peak = std::max(peak, c.activation);
      const double cut = alpha * static_cast<double>(peak);
      for (const auto& c : cands)
        if (static_cast<double>(c.activation) >= cut) out.push_back(c.ref);
    }
  };

  std::vector<FrameRef> anchors;
  if (strategy.scope == Scope::global) {
    pick(collect(videos), anchors);
  } else {
    for (auto v : videos) pick(collect(std::span(&v, 1)), anchors);
  }
  std::sort(anchors.begin(), anchors.end());
  return anchors;
}

}  // namespace detail

/// Representative anchor frames per neuron, each list sorted by
/// (video index, frame). `videos` restricts the probing set (empty: all).
/// Dead neurons get an empty list.
inline std::vector<std::vector<FrameRef>> select_frames(std::span<const ActivationTrace> traces,
                                                        const SelectionStrategy& strategy,
                                                        std::span<const std::size_t> videos = {},
                                                        std::size_t workers = 1) {
  strategy.validate();
  require(!traces.empty(), "selection needs at least one video");
  std::vector<std::size_t> all;
  if (videos.empty()) {
    all.resize(traces.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    videos = all;
  }
  for (auto v : videos) require(v < traces.size(), "probing video index out of range");
  const std::size_t n = traces[videos.front()].values.cols();
  for (auto v : videos) require(traces[v].values.cols() == n, "traces disagree on neuron count");
  const auto rank = detail::id_ranks(traces, videos);
  std::vector<std::vector<FrameRef>> out(n);
  parallel_for(n, workers, [&](std::size_t i) { out[i] = detail::select_neuron(traces, videos, rank, strategy, i); });
  return out;
}

/// Expands each anchor t into [t - n*stride, ..., t - stride, t], clamping
/// indices below zero to frame 0.
inline RepresentativeSet build_sequences(std::size_t neuron, std::span<const FrameRef> anchors,
                                         const SequenceSpec& spec, double fps) {
  const std::size_t stride = frame_stride(spec, fps);
  RepresentativeSet set{neuron, {}};
  set.sequences.reserve(anchors.size());
  for (const auto& a : anchors) {
    std::vector<FrameRef> seq(spec.n_prev + 1);
    for (std::size_t k = 0; k <= spec.n_prev; ++k) {
      const std::size_t back = (spec.n_prev - k) * stride;
      seq[k] = {a.video, back >= a.frame ? 0u : static_cast<std::uint32_t>(a.frame - back)};
    }
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

/// The example set used for concept scoring. With `dedup`, every frame
/// appears once, sorted; otherwise all sequence slots are kept in order.
inline std::vector<FrameRef> flatten_examples(const RepresentativeSet& set, bool dedup = true) {
  std::vector<FrameRef> out;
  for (const auto& seq : set.sequences) out.insert(out.end(), seq.begin(), seq.end());
  if (dedup) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

/// Full selection stage for one layer.
inline std::vector<RepresentativeSet> select_representatives(std::span<const ActivationTrace> traces, double fps,
                                                             const SelectionStrategy& strategy,
                                                             const SequenceSpec& spec,
                                                             std::span<const std::size_t> videos = {},
                                                             std::size_t workers = 1) {
  spec.validate();
  (void)frame_stride(spec, fps);
  const auto anchors = select_frames(traces, strategy, videos, workers);
  std::vector<RepresentativeSet> out(anchors.size());
  for (std::size_t n = 0; n < anchors.size(); ++n) out[n] = build_sequences(n, anchors[n], spec, fps);
  return out;
}

inline json representatives_to_json(std::span<const RepresentativeSet> sets, const DatasetManifest& m) {
  json neurons = json::array();
  for (const auto& s : sets) {
    json seqs = json::array();
    for (const auto& seq : s.sequences) {
      json js = json::array();
      for (const auto& r : seq) js.push_back(json::array({m.videos.at(r.video).video_id, r.frame}));
      seqs.push_back(std::move(js));
    }
    neurons.push_back({{"neuron", s.neuron}, {"dead", s.dead()}, {"sequences", std::move(seqs)}});
  }
  return neurons;
}

inline std::vector<RepresentativeSet> representatives_from_json(const json& neurons, const DatasetManifest& m) {
  std::vector<RepresentativeSet> out;
  for (const auto& jn : neurons) {
    RepresentativeSet s;
    s.neuron = jn.at("neuron").get<std::size_t>();
    for (const auto& js : jn.at("sequences")) {
      std::vector<FrameRef> seq;
      for (const auto& jr : js) {
        const auto vid = jr.at(0).get<std::string>();
        const auto vi = m.video_index(vid);
        require(vi.has_value(), "representatives reference unknown video '" + vid + "'");
        const auto f = jr.at(1).get<std::uint32_t>();
        require(f < m.videos[*vi].frame_count, "representative frame out of range in video '" + vid + "'");
        seq.push_back({static_cast<std::uint32_t>(*vi), f});
      }
      s.sequences.push_back(std::move(seq));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace surgx
