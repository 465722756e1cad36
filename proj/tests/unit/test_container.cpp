#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "surgx/container.hpp"

using namespace surgx;

namespace {

Container two_video_container() {
  Rng rng(11);
  oracle::RandomContainerOptions o;
  o.videos = 2;
  o.neurons = 5;
  o.raw_bits = false;
  auto c = oracle::random_container(rng, o);
  // Rebuild with the exact 3- and 4-frame shapes.
  Container out;
  out.manifest = c.manifest;
  out.manifest.videos[0].frame_count = 3;
  out.manifest.videos[1].frame_count = 4;
  for (auto& v : out.manifest.videos) v.phase_labels.reset(), v.prediction_labels.reset();
  for (std::size_t v = 0; v < 2; ++v) {
    const auto frames = out.manifest.videos[v].frame_count;
    for (const auto& layer : out.manifest.layers) {
      MatrixF t(frames, layer.neuron_count);
      for (float& x : t.data()) x = static_cast<float>(rng.uniform());
      out.traces[layer.layer_id].push_back({out.manifest.videos[v].video_id, layer.layer_id, std::move(t)});
    }
    MatrixF e(frames, out.manifest.embedding_dim);
    for (float& x : e.data()) x = static_cast<float>(rng.uniform(0.1, 1.0));
    out.frame_embeddings.push_back({out.manifest.videos[v].video_id, std::move(e)});
  }
  return out;
}

template <class F>
ErrorKind error_kind(F&& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

}  // namespace

TEST(Container, LoadsConsistentTwoVideoContainer) {
  const auto dir = fixtures::scratch_dir("two_video");
  const auto c = two_video_container();
  save_container(c, dir);
  const auto back = load_container(dir);
  EXPECT_EQ(back.clamped_entries, 0u);
  ASSERT_EQ(back.manifest.videos.size(), 2u);
  EXPECT_EQ(back.layer_traces("pen")[0].values.rows(), 3u);
  EXPECT_EQ(back.layer_traces("pen")[1].values.rows(), 4u);
  EXPECT_EQ(back.layer_traces("pen")[0].values.cols(), 5u);
  EXPECT_TRUE(oracle::containers_bit_equal(c, back));
  EXPECT_FALSE(back.fingerprint.empty());
}

TEST(Container, NegativeActivationIsClampedAndCounted) {
  const auto dir = fixtures::scratch_dir("clamp");
  auto c = two_video_container();
  c.traces["pen"][1].values(2, 3) = -0.5f;
  // save_container validates, so poke the negative value into the file after saving.
  c.traces["pen"][1].values(2, 3) = 0.25f;
  save_container(c, dir);
  const auto file = dir / "traces" / "v0001_l00.f32bin";
  ASSERT_TRUE(fs::exists(file));
  auto values = decode_f32(read_file_bytes(file));
  values[2 * 5 + 3] = -0.5f;
  write_f32bin(file, values);
  const auto back = load_container(dir);
  EXPECT_EQ(back.clamped_entries, 1u);
  EXPECT_EQ(back.layer_traces("pen")[1].values(2, 3), 0.0f);
  EXPECT_FALSE(std::signbit(back.layer_traces("pen")[1].values(2, 3)));
}

TEST(Container, FrameCountMismatchNamesTheVideo) {
  const auto dir = fixtures::scratch_dir("mismatch");
  auto c = two_video_container();
  save_container(c, dir);
  // Manifest claims 4 frames for vid0 while its files hold 3.
  auto j = json::parse(read_file_bytes(dir / kManifestFile));
  j["videos"][0]["frame_count"] = 4;
  write_file_bytes(dir / kManifestFile, j.dump());
  std::string msg;
  EXPECT_EQ(error_kind([&] { load_container(dir); }, &msg), ErrorKind::validation);
  EXPECT_NE(msg.find("vid0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("dimension mismatch"), std::string::npos) << msg;
}

TEST(Container, EmptyTensorIsRejected) {
  const auto dir = fixtures::scratch_dir("empty");
  auto c = two_video_container();
  c.manifest.videos[0].frame_count = 0;
  for (auto& [layer, per_video] : c.traces) per_video[0].values = MatrixF(0, per_video[0].values.cols());
  c.frame_embeddings[0].values = MatrixF(0, c.manifest.embedding_dim);
  std::string msg;
  EXPECT_EQ(error_kind([&] { save_container(c, dir); }, &msg), ErrorKind::validation);
  EXPECT_NE(msg.find("empty tensor"), std::string::npos) << msg;
}

TEST(Container, HeadRoundTripIsBitIdentical) {
  const auto dir = fixtures::scratch_dir("head");
  Rng rng(3);
  oracle::RandomContainerOptions o;
  o.neurons = 256;
  o.phases = 7;
  o.max_frames = 2;
  const auto c = oracle::random_container(rng, o);
  ASSERT_TRUE(c.head);
  EXPECT_EQ(c.head->weights.rows(), 7u);
  EXPECT_EQ(c.head->weights.cols(), 256u);
  save_container(c, dir);
  const auto back = load_container(dir);
  ASSERT_TRUE(back.head);
  EXPECT_TRUE(oracle::bit_equal(c.head->weights.data(), back.head->weights.data()));
  EXPECT_TRUE(oracle::bit_equal(c.head->bias, back.head->bias));
}

TEST(Container, RandomRoundTripsAreBitExact) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::RandomContainerOptions o;
    o.videos = 1 + rng.index(4);
    o.neurons = 1 + rng.index(9);
    o.dim = 1 + rng.index(6);
    o.phases = 1 + rng.index(4);
    o.head = rng.uniform() < 0.5;
    o.gradients = rng.uniform() < 0.5;
    const auto c = oracle::random_container(rng, o);
    const auto dir = fixtures::scratch_dir("rt" + std::to_string(trial));
    save_container(c, dir);
    const auto back = load_container(dir);
    EXPECT_TRUE(oracle::containers_bit_equal(c, back)) << "trial " << trial;
    EXPECT_EQ(back.clamped_entries, 0u);
  }
}

TEST(Container, MissingTensorFileIsMissingArtifact) {
  const auto dir = fixtures::scratch_dir("missing");
  save_container(two_video_container(), dir);
  fs::remove(dir / "embeddings" / "v0001.f32bin");
  EXPECT_EQ(error_kind([&] { load_container(dir); }), ErrorKind::missing_artifact);
  EXPECT_EQ(error_kind([&] { load_container(dir / "nope"); }), ErrorKind::missing_artifact);
}

TEST(Container, NonFiniteValueIsNumericError) {
  const auto dir = fixtures::scratch_dir("nan");
  save_container(two_video_container(), dir);
  const auto file = dir / "embeddings" / "v0000.f32bin";
  auto values = decode_f32(read_file_bytes(file));
  values[1] = std::numeric_limits<float>::quiet_NaN();
  write_f32bin(file, values);
  EXPECT_EQ(error_kind([&] { load_container(dir); }), ErrorKind::numeric);
}

TEST(Container, ZeroEmbeddingRowIsRejected) {
  const auto dir = fixtures::scratch_dir("zero_row");
  save_container(two_video_container(), dir);
  const auto file = dir / "embeddings" / "v0000.f32bin";
  auto values = decode_f32(read_file_bytes(file));
  const auto dim = load_container(dir).manifest.embedding_dim;
  std::fill(values.begin() + dim, values.begin() + 2 * dim, 0.0f);
  write_f32bin(file, values);
  std::string msg;
  EXPECT_EQ(error_kind([&] { load_container(dir); }, &msg), ErrorKind::validation);
  EXPECT_NE(msg.find("vid0"), std::string::npos) << msg;
}

TEST(Manifest, ValidationRejectsBadFields) {
  const auto base = two_video_container().manifest;
  const auto bad = [&](auto mutate) {
    auto m = base;
    mutate(m);
    return error_kind([&] { validate_manifest(m); });
  };
  EXPECT_EQ(bad([](DatasetManifest& m) { m.phase_names.clear(); }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.phase_names[1] = m.phase_names[0]; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.phase_names[0] = ""; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.fps = 0.0; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.videos[1].video_id = m.videos[0].video_id; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.layers[1].layer_id = m.layers[0].layer_id; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.layers[0].neuron_count = 0; }), ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.videos[0].phase_labels = std::vector<std::uint32_t>{0, 1}; }),
            ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.videos[0].phase_labels = std::vector<std::uint32_t>{0, 1, 99}; }),
            ErrorKind::validation);
  EXPECT_EQ(bad([](DatasetManifest& m) { m.videos[0].prediction_labels = std::vector<std::uint32_t>{0, 0, 7}; }),
            ErrorKind::validation);
}

TEST(Manifest, JsonRoundTripAndRationalFps) {
  auto m = two_video_container().manifest;
  m.videos[1].split = Split::test;
  m.videos[0].phase_labels = std::vector<std::uint32_t>{0, 1, 2};
  const auto back = parse_manifest(manifest_to_json(m));
  EXPECT_EQ(back.videos[1].split, Split::test);
  EXPECT_EQ(back.videos[0].split, Split::all);
  EXPECT_EQ(back.videos[0].phase_labels, m.videos[0].phase_labels);
  EXPECT_EQ(back.fps, m.fps);
  auto j = manifest_to_json(m);
  j["fps"] = "30000/1001";
  EXPECT_DOUBLE_EQ(parse_manifest(j).fps, 30000.0 / 1001.0);
  j["fps"] = "1/0";
  EXPECT_EQ(error_kind([&] { parse_manifest(j); }), ErrorKind::validation);
}

TEST(BinaryIo, LittleEndianEncoding) {
  const float one = 1.0f;  // 0x3f800000
  const auto bytes = encode_f32(std::span(&one, 1));
  ASSERT_EQ(bytes.size(), 4u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0x3f);
  EXPECT_EQ(decode_f32(bytes), std::vector<float>{1.0f});
}

TEST(BinaryIo, FingerprintIsFnv1a64) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fingerprint_of(""), "cbf29ce484222325");
  EXPECT_EQ(fingerprint_of("a"), "af63dc4c8601ec8c");
}
