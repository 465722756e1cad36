#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"
#include "surgx/rng.hpp"

namespace surgx {

/// Parameters of a synthetic container with planted neuron-concept
/// structure.
///
/// Penultimate neuron n is planted with one concept. Neurons n < 2P are the
/// "aligned" neurons of phase n mod P: they carry phase p's concept and feed
/// logit p with weight 1. Every other neuron gets a distractor concept and a
/// small random head weight. In each video, each planted unit fires in an
/// event window inside its phase segment: the window frames show the concept
/// (embedding unit(t_c + sigma * noise), noise of expected norm sigma) and
/// activation ramps up to a plateau near the video gain. The default window
/// is long enough to hold a full 9-step, 5-frame dilated sequence ending on
/// the plateau, so temporal context shows the same concept. Two distractors make
/// selection strategies distinguishable: a one-frame spike slightly above the
/// plateau on a background frame, and in the first `artifact_videos` probing
/// videos a long high-gain burst on background frames shared by all neurons.
struct PlantSpec {
  std::size_t neurons = 64;
  std::size_t concepts = 128;
  std::size_t dim = 64;
  std::size_t phases = 7;
  std::size_t probe_videos = 6;
  std::size_t test_videos = 2;
  std::size_t window = 48;
  std::size_t plateau = 3;
  std::size_t padding = 8;
  std::size_t burst_frames = 48;
  std::size_t artifact_videos = 1;
  std::size_t dead_neurons = 0;
  bool spikes = true;
  bool gradients = false;
  double sigma = 0.1;
  double phase_text_noise = 0.3;
  double fps = 1.0;
  std::uint64_t seed = 7;

  void validate() const {
    require(phases >= 1, "plant spec needs at least one phase");
    require(neurons >= phases, "plant spec needs neurons >= phases to wire the head (N < P)");
    require(concepts >= phases, "plant spec needs concepts >= phases");
    require(dim >= 1, "plant spec needs dim >= 1");
    require(probe_videos >= 1, "plant spec needs at least one probing video");
    require(artifact_videos <= probe_videos, "artifact_videos exceeds probe_videos");
    require(window >= 1 && plateau >= 1 && plateau <= window, "plant spec needs 1 <= plateau <= window");
    require(!spikes || padding >= 1, "spikes need padding >= 1");
    require(dead_neurons + std::min(neurons, 2 * phases) <= neurons, "dead neurons may not overlap aligned neurons");
    require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be >= 0");
    require(fps > 0.0, "fps must be positive");
  }

  json to_json() const {
    return {{"neurons", neurons},
            {"concepts", concepts},
            {"dim", dim},
            {"phases", phases},
            {"probe_videos", probe_videos},
            {"test_videos", test_videos},
            {"window", window},
            {"plateau", plateau},
            {"padding", padding},
            {"burst_frames", burst_frames},
            {"artifact_videos", artifact_videos},
            {"dead_neurons", dead_neurons},
            {"spikes", spikes},
            {"gradients", gradients},
            {"sigma", sigma},
            {"phase_text_noise", phase_text_noise},
            {"fps", fps},
            {"seed", seed}};
  }

  static PlantSpec from_json(const json& j) {
    PlantSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "neurons") s.neurons = v.get<std::size_t>();
      else if (k == "concepts") s.concepts = v.get<std::size_t>();
      else if (k == "dim") s.dim = v.get<std::size_t>();
      else if (k == "phases") s.phases = v.get<std::size_t>();
      else if (k == "probe_videos") s.probe_videos = v.get<std::size_t>();
      else if (k == "test_videos") s.test_videos = v.get<std::size_t>();
      else if (k == "window") s.window = v.get<std::size_t>();
      else if (k == "plateau") s.plateau = v.get<std::size_t>();
      else if (k == "padding") s.padding = v.get<std::size_t>();
      else if (k == "burst_frames") s.burst_frames = v.get<std::size_t>();
      else if (k == "artifact_videos") s.artifact_videos = v.get<std::size_t>();
      else if (k == "dead_neurons") s.dead_neurons = v.get<std::size_t>();
      else if (k == "spikes") s.spikes = v.get<bool>();
      else if (k == "gradients") s.gradients = v.get<bool>();
      else if (k == "sigma") s.sigma = v.get<double>();
      else if (k == "phase_text_noise") s.phase_text_noise = v.get<double>();
      else if (k == "fps") s.fps = v.get<double>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else fail(ErrorKind::validation, "unknown plant spec field '" + k + "'");
    }
    s.validate();
    return s;
  }
};

/// One planted event: a unit's window in one video.
struct PlantEvent {
  std::size_t video = 0;
  std::size_t concept_index = 0;
  std::vector<std::size_t> neurons;
  std::size_t window_start = 0;
  std::size_t plateau_start = 0;
  std::size_t spike_frame = 0;  // meaningful only when spikes are enabled
};

struct PlantTruth {
  std::vector<std::size_t> neuron_concept;  // penultimate neuron -> concept; dead neurons map to SIZE_MAX
  std::vector<std::size_t> phase_concept;   // phase p -> concept aligned with its texts
  std::vector<bool> dead;
  std::vector<std::size_t> artifact_videos;
  std::vector<PlantEvent> events;
};

struct SynthFixture {
  PlantSpec spec;
  Container container;
  ConceptSet concepts;
  PhaseTextBank phase_bank;
  PlantTruth truth;
};

namespace detail {

inline const std::vector<std::string>& cholec_phase_names() {
  static const std::vector<std::string> names = {"Preparation",          "CalotTriangleDissection",
                                                 "ClippingCutting",      "GallbladderDissection",
                                                 "GallbladderPackaging", "CleaningCoagulation",
                                                 "GallbladderRetraction"};
  return names;
}

inline const std::vector<std::pair<std::string, std::string>>& cholec_phase_texts() {
  static const std::vector<std::pair<std::string, std::string>> texts = {
      {"preparation", "trocars are placed and the instruments enter the abdomen"},
      {"calot triangle dissection", "the surgeon exposes the structures of the calot triangle"},
      {"clipping and cutting", "clips are applied and the cystic structures are divided"},
      {"gallbladder dissection", "the gallbladder is separated from the liver bed"},
      {"gallbladder packaging", "the gallbladder is placed into a retrieval bag"},
      {"cleaning and coagulation", "bleeding points are coagulated and the field is irrigated"},
      {"gallbladder retraction", "the retrieval bag is pulled out through a port"}};
  return texts;
}

inline std::vector<std::string> concept_vocabulary(std::size_t n) {
  static const char* instruments[] = {"grasper", "bipolar", "hook", "scissors", "clipper", "irrigator", "specimen bag"};
  static const char* verbs[] = {"grasp", "retract", "dissect", "coagulate", "clip", "cut", "aspirate", "irrigate", "pack"};
  static const char* targets[] = {"gallbladder", "cystic plate", "cystic duct", "cystic artery", "omentum", "liver",
                                  "peritoneum", "abdominal wall", "fluid", "specimen"};
  std::vector<std::string> out;
  for (const char* w : instruments) out.emplace_back(w);
  for (const char* w : verbs) out.emplace_back(w);
  for (const char* w : targets) out.emplace_back(w);
  for (const char* i : instruments)
    for (const char* v : verbs)
      for (const char* t : targets) out.push_back(std::string("I use a ") + i + " to " + v + " the " + t);
  for (std::size_t k = out.size(); k < n; ++k) out.push_back("concept " + std::to_string(k));
  out.resize(n);
  return out;
}

inline std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

/// unit(base + noise) with noise ~ N(0, (sigma^2 / dim) I).
inline std::vector<float> perturbed_unit(Rng& rng, std::span<const float> base, double sigma) {
  const auto dim = base.size();
  std::vector<double> v(dim);
  double norm = 0.0;
  const double scale = sigma / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    v[i] = base[i] + (sigma > 0.0 ? scale * rng.normal() : 0.0);
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

}  // namespace detail

inline SynthFixture generate(const PlantSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t N = spec.neurons, C = spec.concepts, D = spec.dim, P = spec.phases;
  SynthFixture fx;
  fx.spec = spec;

  // Concepts: random unit directions.
  {
    const auto texts = detail::concept_vocabulary(C);
    fx.concepts.set_id = "synth_concepts";
    fx.concepts.embeddings = {"synth_concepts", MatrixF(C, D)};
    for (std::size_t c = 0; c < C; ++c) {
      char id[32];
      std::snprintf(id, sizeof id, "c%03zu", c);
      const auto form = texts[c].find(' ') == std::string::npos ? ConceptForm::word : ConceptForm::sentence;
      fx.concepts.concepts.push_back({id, texts[c], form, c});
      const auto u = detail::random_unit(rng, D);
      std::ranges::copy(u, fx.concepts.embeddings.values.row(c).begin());
    }
  }

  // Phase texts sit near each phase's concept.
  auto& truth = fx.truth;
  truth.phase_concept.resize(P);
  for (std::size_t p = 0; p < P; ++p) truth.phase_concept[p] = p;
  fx.phase_bank.word = MatrixF(P, D);
  fx.phase_bank.sentence = MatrixF(P, D);
  for (std::size_t p = 0; p < P; ++p) {
    const bool cholec = P == detail::cholec_phase_names().size();
    fx.phase_bank.phase_names.push_back(cholec ? detail::cholec_phase_names()[p] : "phase_" + std::to_string(p));
    fx.phase_bank.word_texts.push_back(cholec ? detail::cholec_phase_texts()[p].first : "phase " + std::to_string(p));
    fx.phase_bank.sentence_texts.push_back(cholec ? detail::cholec_phase_texts()[p].second
                                                  : "the procedure is in phase " + std::to_string(p));
    const auto base = fx.concepts.embedding(truth.phase_concept[p]);
    std::ranges::copy(detail::perturbed_unit(rng, base, spec.phase_text_noise), fx.phase_bank.word.row(p).begin());
    std::ranges::copy(detail::perturbed_unit(rng, base, spec.phase_text_noise), fx.phase_bank.sentence.row(p).begin());
  }

  // Planted map and units.
  const std::size_t aligned = std::min(N, 2 * P);
  truth.neuron_concept.assign(N, SIZE_MAX);
  truth.dead.assign(N, false);
  for (std::size_t n = N - spec.dead_neurons; n < N; ++n) truth.dead[n] = true;
  struct Unit {
    std::size_t phase;
    std::size_t concept_index;
    std::vector<std::size_t> neurons;
  };
  std::vector<Unit> units;
  for (std::size_t p = 0; p < P; ++p) {
    Unit u{p, truth.phase_concept[p], {}};
    for (std::size_t n = p; n < aligned; n += P) u.neurons.push_back(n);
    units.push_back(std::move(u));
  }
  const std::size_t distractors = C > P ? C - P : C;
  for (std::size_t n = aligned; n < N; ++n) {
    if (truth.dead[n]) continue;
    const std::size_t c = C > P ? P + (n - aligned) % distractors : n % C;
    units.push_back({n % P, c, {n}});
  }
  for (const auto& u : units)
    for (auto n : u.neurons) truth.neuron_concept[n] = u.concept_index;
  std::vector<std::vector<std::size_t>> units_by_phase(P);
  for (std::size_t i = 0; i < units.size(); ++i) units_by_phase[units[i].phase].push_back(i);
  std::size_t slots = 0;
  for (const auto& list : units_by_phase) slots = std::max(slots, list.size());
  const std::size_t seg_len = spec.padding + slots * spec.window;
  const std::size_t prefix = spec.burst_frames;
  const std::size_t F = prefix + P * seg_len;

  // Head: aligned neurons drive their phase's logit.
  LinearHead head{"penultimate", MatrixF(P, N), std::vector<float>(P, 0.0f)};
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t n = 0; n < N; ++n)
      head.weights(p, n) = (n < aligned && n % P == p) ? 1.0f : static_cast<float>(0.005 * rng.normal());

  auto& m = fx.container.manifest;
  m.dataset_id = "synthetic-" + std::to_string(spec.seed);
  m.fps = spec.fps;
  m.embedding_dim = D;
  m.phase_names = fx.phase_bank.phase_names;
  m.layers = {{"penultimate", N, LayerRole::penultimate}, {"final", P, LayerRole::final}};

  const std::size_t V = spec.probe_videos + spec.test_videos;
  auto& pen_traces = fx.container.traces["penultimate"];
  auto& fin_traces = fx.container.traces["final"];
  for (std::size_t v = 0; v < V; ++v) {
    const bool probe = v < spec.probe_videos;
    const bool artifact = probe && v < spec.artifact_videos;
    if (artifact) truth.artifact_videos.push_back(v);
    char vid[24];
    std::snprintf(vid, sizeof vid, probe ? "probe%02zu" : "test%02zu", probe ? v : v - spec.probe_videos);
    VideoEntry entry{vid, F, probe ? Split::probe : Split::test, std::vector<std::uint32_t>(F, 0), std::nullopt};
    for (std::size_t f = prefix; f < F; ++f) (*entry.phase_labels)[f] = static_cast<std::uint32_t>((f - prefix) / seg_len);

    MatrixF emb(F, D);
    for (std::size_t f = 0; f < F; ++f) std::ranges::copy(detail::random_unit(rng, D), emb.row(f).begin());
    MatrixF act(F, N);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t n = 0; n < N; ++n) act(f, n) = truth.dead[n] ? 0.0f : static_cast<float>(0.05 * rng.uniform());

    for (std::size_t p = 0; p < P; ++p) {
      const std::size_t seg = prefix + p * seg_len;
      // aligned neurons idle at a moderate level during their own phase
      for (std::size_t f = seg; f < seg + seg_len; ++f)
        for (std::size_t n = p; n < aligned; n += P) act(f, n) = static_cast<float>(0.3 + 0.05 * rng.uniform());
      auto order = units_by_phase[p];
      rng.shuffle(order.begin(), order.end());
      for (std::size_t s = 0; s < order.size(); ++s) {
        const auto& u = units[order[s]];
        const double gain = rng.uniform(1.0, 2.0);
        PlantEvent ev{v, u.concept_index, u.neurons, seg + spec.padding + s * spec.window, 0, 0};
        ev.plateau_start = ev.window_start + spec.window - spec.plateau;
        const auto t = fx.concepts.embedding(u.concept_index);
        for (std::size_t j = 0; j < spec.window; ++j) {
          const std::size_t f = ev.window_start + j;
          std::ranges::copy(detail::perturbed_unit(rng, t, spec.sigma), emb.row(f).begin());
          const std::size_t ramp = spec.window - spec.plateau;
          const double level = j < ramp ? 0.4 + 0.4 * static_cast<double>(j) / static_cast<double>(ramp)
                                        : rng.uniform(0.98, 1.0);
          for (auto n : u.neurons) act(f, n) = static_cast<float>(gain * level);
        }
        if (spec.spikes) {
          ev.spike_frame = seg + rng.index(spec.padding);
          for (auto n : u.neurons) act(ev.spike_frame, n) = static_cast<float>(gain * 1.01);
        }
        truth.events.push_back(std::move(ev));
      }
    }
    if (artifact) {
      for (std::size_t f = 0; f < prefix; ++f)
        for (std::size_t n = 0; n < N; ++n)
          if (!truth.dead[n]) act(f, n) = static_cast<float>(20.0 * (1.0 - 0.015 * static_cast<double>(f)));
    }

    MatrixF fin(F, P);
    std::vector<std::uint32_t> pred(F);
    MatrixF grad(F, N);
    for (std::size_t f = 0; f < F; ++f) {
      const auto logits = head.logits(act.row(f));
      pred[f] = static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      for (std::size_t p = 0; p < P; ++p) fin(f, p) = static_cast<float>(std::max(0.0, logits[p]));
      std::ranges::copy(head.weights.row(pred[f]), grad.row(f).begin());
    }
    entry.prediction_labels = std::move(pred);
    m.videos.push_back(std::move(entry));
    pen_traces.push_back({vid, "penultimate", std::move(act)});
    fin_traces.push_back({vid, "final", std::move(fin)});
    fx.container.frame_embeddings.push_back({vid, std::move(emb)});
    if (spec.gradients) fx.container.gradients["penultimate"].push_back(std::move(grad));
  }
  fx.container.head = std::move(head);
  validate_container(fx.container);
  return fx;
}

inline json plant_truth_to_json(const SynthFixture& fx) {
  const auto& t = fx.truth;
  const auto& m = fx.container.manifest;
  json neurons = json::array();
  for (std::size_t n = 0; n < t.neuron_concept.size(); ++n) {
    if (t.dead[n]) {
      neurons.push_back({{"neuron", n}, {"dead", true}, {"concept_id", nullptr}});
    } else {
      neurons.push_back({{"neuron", n}, {"dead", false}, {"concept_id", fx.concepts.concepts[t.neuron_concept[n]].concept_id}});
    }
  }
  json phases = json::array();
  for (std::size_t p = 0; p < t.phase_concept.size(); ++p)
    phases.push_back({{"phase", p}, {"name", m.phase_names[p]}, {"concept_id", fx.concepts.concepts[t.phase_concept[p]].concept_id}});
  json events = json::array();
  for (const auto& e : t.events) {
    json je{{"video_id", m.videos[e.video].video_id},
            {"concept_id", fx.concepts.concepts[e.concept_index].concept_id},
            {"neurons", e.neurons},
            {"window_start", e.window_start},
            {"plateau_start", e.plateau_start},
            {"window", fx.spec.window}};
    if (fx.spec.spikes) je["spike_frame"] = e.spike_frame;
    events.push_back(std::move(je));
  }
  json artifacts = json::array();
  for (auto v : t.artifact_videos) artifacts.push_back(m.videos[v].video_id);
  return {{"spec", fx.spec.to_json()},
          {"penultimate_neurons", std::move(neurons)},
          {"final_neurons", std::move(phases)},
          {"artifact_videos", std::move(artifacts)},
          {"events", std::move(events)}};
}

inline constexpr const char* kPlantTruthFile = "plant_truth.json";
inline constexpr const char* kSynthConceptsFile = "synth_concepts.jsonl";

/// Writes the container plus phase texts, the concept set and the plant record.
inline void write_fixture(const SynthFixture& fx, const fs::path& dir) {
  save_container(fx.container, dir);
  save_phase_bank(fx.phase_bank, dir / kPhaseTextsFile);
  save_concept_set(fx.concepts, dir / kSynthConceptsFile);
  write_file_bytes(dir / kPlantTruthFile, plant_truth_to_json(fx).dump(1) + "\n");
}

}  // namespace surgx
