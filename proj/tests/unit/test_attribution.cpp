#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "surgx/attribution.hpp"

using namespace surgx;

namespace {

LinearHead random_head(Rng& rng, std::size_t p, std::size_t n) {
  LinearHead h{"pen", MatrixF(p, n), std::vector<float>(p)};
  for (float& w : h.weights.data()) w = static_cast<float>(rng.normal());
  for (float& b : h.bias) b = static_cast<float>(rng.normal());
  return h;
}

/// Three penultimate neurons, two phases, one test video of three frames.
struct PlantedThree {
  Container c;
  ConceptSet concepts;
  std::vector<NeuronAnnotation> annotations;

  PlantedThree() {
    auto& m = c.manifest;
    m.dataset_id = "three";
    m.embedding_dim = 2;
    m.phase_names = {"Preparation", "Clipping"};
    m.layers = {{"pen", 3, LayerRole::penultimate}, {"fin", 2, LayerRole::final}};
    m.videos = {{"t0", 3, Split::test, std::vector<std::uint32_t>{0, 0, 1}, std::nullopt}};
    c.traces["pen"] = {{"t0", "pen", fixtures::rows_of({{1.0f, 0.5f, 3.0f}, {2.0f, 1.0f, 0.5f}, {0, 0, 0}})}};
    c.traces["fin"] = {{"t0", "fin", fixtures::rows_of({{2, 3}, {4, 0.5f}, {0, 0}})}};
    c.frame_embeddings = {{"t0", fixtures::rows_of({{1, 0}, {0, 1}, {1, 1}})}};
    c.head = LinearHead{"pen", fixtures::rows_of({{1.0f, 2.0f, 0.0f}, {0.0f, 0.0f, 1.0f}}), {0.0f, 0.0f}};
    concepts = fixtures::concept_set(fixtures::rows_of({{1, 0}, {0, 1}, {1, 1}}),
                                     {"grasper", "Insert a port", "Clip the cystic duct"});
    annotations.resize(3);
    annotations[0] = {0, false, false, 0.3, {{0, 0.8}}};
    annotations[1] = {1, true, false, 0.0, {}};
    annotations[2] = {2, false, false, 0.3, {{1, 0.9}, {0, 0.4}}};
  }
};

}  // namespace

TEST(Contribution, ZeroActivationContributesNothing) {
  Rng rng(31);
  const auto h = random_head(rng, 3, 4);
  const std::vector<float> a = {0.0f, 1.0f, 0.0f, 2.0f};
  const auto c = contribution_linear(a, h, 1);
  EXPECT_EQ(c[0], 0.0f);
  EXPECT_EQ(c[2], 0.0f);
}

TEST(Contribution, ProductMagnitude) {
  const LinearHead h{"pen", fixtures::rows_of({{0.5f}}), {7.0f}};
  const std::vector<float> a = {2.0f};
  EXPECT_EQ(contribution_linear(a, h, 0), std::vector<float>{1.0f});
  const LinearHead neg{"pen", fixtures::rows_of({{-0.5f}}), {7.0f}};
  EXPECT_EQ(contribution_linear(a, neg, 0), std::vector<float>{1.0f});
}

TEST(Contribution, MatchesExplicitAblation) {
  Rng rng(32);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_head(rng, 7, 256);
    std::vector<float> a(256);
    for (float& x : a) x = rng.uniform() < 0.3 ? 0.0f : static_cast<float>(rng.uniform(0.0, 4.0));
    const std::size_t p = rng.index(7);
    const auto got = contribution_linear(a, h, p);
    const auto want = oracle::ablation_contributions(a, h, p);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const long double d = std::max<long double>(std::fabs(got[i]), want[i]);
      if (d > 0) worst = std::max(worst, static_cast<double>(std::fabs(got[i] - want[i]) / d));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Contribution, GradientPath) {
  const std::vector<float> zeros(3, 0.0f), a = {1.0f, 2.0f, 3.0f};
  for (float c : contribution_from_gradients(a, zeros)) EXPECT_EQ(c, 0.0f);
  const std::vector<float> a2 = {1.0f, 2.0f}, g = {-3.0f, 0.5f};
  EXPECT_EQ(contribution_from_gradients(a2, g), (std::vector<float>{3.0f, 1.0f}));
  EXPECT_THROW(contribution_from_gradients(a, g), Error);
}

TEST(Contribution, GradientOfLinearHeadIsBitIdentical) {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_head(rng, 7, 64);
    std::vector<float> a(64);
    for (float& x : a) x = static_cast<float>(rng.uniform(0.0, 3.0));
    const std::size_t p = rng.index(7);
    const auto lin = contribution_linear(a, h, p);
    const auto grad = contribution_from_gradients(a, h.weights.row(p));
    EXPECT_TRUE(oracle::bit_equal(lin, grad));
  }
}

TEST(Contribution, BiasInvarianceAndPositiveScaling) {
  Rng rng(36);
  for (int trial = 0; trial < 50; ++trial) {
    auto h = random_head(rng, 5, 40);
    std::vector<float> a(40);
    for (float& x : a) x = static_cast<float>(rng.index(9)) * 0.25f;
    const std::size_t p = rng.index(5);
    const auto base = contribution_linear(a, h, p);
    for (float& b : h.bias) b = static_cast<float>(rng.normal() * 100.0);
    EXPECT_EQ(contribution_linear(a, h, p), base);

    const float k = 4.0f;  // a power of two keeps the products exact
    auto scaled = a;
    for (float& x : scaled) x *= k;
    const auto c = contribution_linear(scaled, h, p);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], k * base[i]);
    EXPECT_EQ(important_neurons(c, ImportanceRule::top_k(40)).neurons,
              important_neurons(base, ImportanceRule::top_k(40)).neurons);
  }
}

TEST(Contribution, DimensionMismatch) {
  Rng rng(34);
  const auto h = random_head(rng, 2, 4);
  EXPECT_THROW(contribution_linear(std::vector<float>(3, 1.0f), h, 0), Error);
  EXPECT_THROW(contribution_linear(std::vector<float>(4, 1.0f), h, 2), Error);
}

TEST(Importance, Examples) {
  const std::vector<float> c = {0.1f, 0.9f, 0.5f};
  EXPECT_EQ(important_neurons(c, ImportanceRule::top_k(1)).neurons, std::vector<std::size_t>{1});
  EXPECT_EQ(important_neurons(c, ImportanceRule::relative(0.5)).neurons, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(important_neurons(c, ImportanceRule{}).neurons, std::vector<std::size_t>{1});
}

TEST(Importance, DegenerateVector) {
  const std::vector<float> z(4, 0.0f);
  const auto r = important_neurons(z, ImportanceRule::top_k(3));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.neurons, std::vector<std::size_t>{0});
}

TEST(Importance, MatchesSortFilterOracle) {
  Rng rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<float> c(1 + rng.index(30));
    for (float& x : c) x = static_cast<float>(rng.index(8)) / 4.0f;
    if (*std::max_element(c.begin(), c.end()) == 0.0f) c[0] = 1.0f;
    std::vector<std::pair<float, std::size_t>> sorted;
    for (std::size_t i = 0; i < c.size(); ++i) sorted.push_back({-c[i], i});
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = 1 + rng.index(c.size() + 2);
    std::vector<std::size_t> want_k;
    for (std::size_t i = 0; i < std::min(k, c.size()); ++i) want_k.push_back(sorted[i].second);
    EXPECT_EQ(important_neurons(c, ImportanceRule::top_k(k)).neurons, want_k);
    const double beta = 0.05 + 0.95 * rng.uniform();
    const float peak = *std::max_element(c.begin(), c.end());
    std::vector<std::size_t> want_rel;
    for (const auto& [neg, i] : sorted)
      if (static_cast<double>(c[i]) >= beta * peak) want_rel.push_back(i);
    EXPECT_EQ(important_neurons(c, ImportanceRule::relative(beta)).neurons, want_rel);
  }
}

TEST(Importance, FullTopKAndTinyBetaReturnAllSorted) {
  const std::vector<float> c = {0.2f, 0.7f, 0.7f, 0.1f};
  const std::vector<std::size_t> want = {1, 2, 0, 3};
  EXPECT_EQ(important_neurons(c, ImportanceRule::top_k(4)).neurons, want);
  EXPECT_EQ(important_neurons(c, ImportanceRule::relative(1e-9)).neurons, want);
}

TEST(Importance, ParseAndValidate) {
  EXPECT_EQ(ImportanceRule::parse("topk:3").k, 3u);
  EXPECT_EQ(ImportanceRule::parse("topk:3").mode, ImportanceRule::Mode::top_k);
  EXPECT_DOUBLE_EQ(ImportanceRule::parse("relative:0.8").beta, 0.8);
  EXPECT_THROW(ImportanceRule::parse("topk:0"), Error);
  EXPECT_THROW(ImportanceRule::parse("relative:0"), Error);
  EXPECT_THROW(ImportanceRule::parse("relative:1.5"), Error);
  EXPECT_THROW(ImportanceRule::parse("best"), Error);
  EXPECT_EQ(ImportanceRule::parse(ImportanceRule::relative(0.5).name()).beta, 0.5);
}

TEST(Explain, PlantedThreeNeuronFrames) {
  PlantedThree f;
  // Frame 0: logits W a = [2, 3] -> Clipping; contributions |a * W[1]| = [0, 0, 3].
  const auto r0 = explain_frame(f.c, "pen", {0, 0}, f.annotations, ImportanceRule{}, ContributionBackend::automatic);
  EXPECT_EQ(r0.predicted, 1u);
  EXPECT_EQ(r0.ground_truth, std::optional<std::size_t>(0));
  EXPECT_FALSE(r0.degenerate);
  ASSERT_EQ(r0.neurons.size(), 1u);
  EXPECT_EQ(r0.neurons[0].neuron, 2u);
  EXPECT_EQ(r0.neurons[0].contribution, 3.0f);
  ASSERT_FALSE(r0.neurons[0].concepts.empty());
  EXPECT_EQ(f.concepts.concepts[r0.neurons[0].concepts[0].concept_index].text, "Insert a port");

  // Frame 1: logits [4, 0.5] -> Preparation; contributions [2, 2, 0], tie by index.
  const auto r1 = explain_frame(f.c, "pen", {0, 1}, f.annotations, ImportanceRule{}, ContributionBackend::linear);
  EXPECT_EQ(r1.predicted, 0u);
  ASSERT_EQ(r1.neurons.size(), 2u);
  EXPECT_EQ(r1.neurons[0].neuron, 0u);
  EXPECT_EQ(r1.neurons[1].neuron, 1u);
  EXPECT_TRUE(r1.neurons[0].annotated);
  EXPECT_FALSE(r1.neurons[1].annotated);  // dead neuron shows as unannotated
  const auto j = explanation_to_json(r1, f.c.manifest, f.concepts);
  EXPECT_EQ(j["neurons"][1]["concepts"], "unannotated");
  EXPECT_EQ(j["predicted_name"], "Preparation");
}

TEST(Explain, AllZeroActivationsAreDegenerate) {
  PlantedThree f;
  const auto r = explain_frame(f.c, "pen", {0, 2}, f.annotations, ImportanceRule{}, ContributionBackend::automatic);
  EXPECT_TRUE(r.degenerate);
  ASSERT_EQ(r.neurons.size(), 1u);
  EXPECT_EQ(r.neurons[0].neuron, 0u);
}

TEST(Explain, PredictionLabelsOverrideHead) {
  PlantedThree f;
  f.c.manifest.videos[0].prediction_labels = std::vector<std::uint32_t>{0, 0, 0};
  const auto r = explain_frame(f.c, "pen", {0, 0}, f.annotations, ImportanceRule{}, ContributionBackend::automatic);
  EXPECT_EQ(r.predicted, 0u);
  // Contributions |a * W[0]| = [1, 1, 0]: a tie, lower index first.
  ASSERT_EQ(r.neurons.size(), 2u);
  EXPECT_EQ(r.neurons[0].neuron, 0u);
  EXPECT_EQ(r.neurons[1].neuron, 1u);
}

TEST(Explain, GradientBackend) {
  PlantedThree f;
  EXPECT_THROW(resolve_backend(ContributionBackend::gradient, f.c, "pen"), Error);
  f.c.gradients["pen"] = {fixtures::rows_of({{0, 0, 1}, {1, 2, 0}, {0, 0, 1}})};
  const auto r = explain_frame(f.c, "pen", {0, 0}, f.annotations, ImportanceRule{}, ContributionBackend::gradient);
  ASSERT_EQ(r.neurons.size(), 1u);
  EXPECT_EQ(r.neurons[0].neuron, 2u);
  f.c.head.reset();
  EXPECT_EQ(resolve_backend(ContributionBackend::automatic, f.c, "pen"), ContributionBackend::gradient);
  f.c.gradients.clear();
  EXPECT_THROW(resolve_backend(ContributionBackend::automatic, f.c, "pen"), Error);
}

TEST(Explain, TestFramesAndJsonRoundTrip) {
  PlantedThree f;
  const auto records = explain_test_frames(f.c, "pen", f.annotations, ImportanceRule{}, ContributionBackend::automatic, 3);
  ASSERT_EQ(records.size(), 3u);
  for (const auto& r : records) {
    const auto back = explanation_from_json(explanation_to_json(r, f.c.manifest, f.concepts), f.c.manifest, f.concepts);
    EXPECT_EQ(back.frame, r.frame);
    EXPECT_EQ(back.predicted, r.predicted);
    EXPECT_EQ(back.degenerate, r.degenerate);
    ASSERT_EQ(back.neurons.size(), r.neurons.size());
    for (std::size_t i = 0; i < r.neurons.size(); ++i) EXPECT_EQ(back.neurons[i].concepts, r.neurons[i].concepts);
  }
  f.c.manifest.videos[0].split = Split::probe;
  EXPECT_TRUE(explain_test_frames(f.c, "pen", f.annotations, ImportanceRule{}, ContributionBackend::automatic).empty());
}

TEST(Involvement, Counting) {
  PlantedThree f;
  const auto records = explain_test_frames(f.c, "pen", f.annotations, ImportanceRule{}, ContributionBackend::automatic);
  const std::vector<ExplanationRecord> two(records.begin(), records.begin() + 2);
  // "Insert a port" is carried by neuron 2, important only in frame 0.
  EXPECT_DOUBLE_EQ(concept_involvement(two, 1, f.annotations), 0.5);
  // "Clip the cystic duct" is annotated to no neuron.
  EXPECT_DOUBLE_EQ(concept_involvement(two, 2, f.annotations), 0.0);
  EXPECT_THROW(concept_involvement(std::span<const ExplanationRecord>{}, 0, f.annotations), Error);
}
