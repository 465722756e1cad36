#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>

#include "fixtures.hpp"
#include "surgx/surgx.hpp"

using namespace surgx;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(SURGX_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Small planted fixture written once per process; ctest runs each test in
/// its own process, possibly in parallel.
struct FixtureDir {
  fs::path path;
  FixtureDir() : path(fixtures::scratch_dir("cli_fixture_" + std::to_string(getpid()))) {
    PlantSpec s;
    s.probe_videos = 4;
    s.test_videos = 2;
    write_fixture(generate(s), path);
  }
  ~FixtureDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const fs::path& fixture_dir() {
  static const FixtureDir dir;
  return dir.path;
}

std::string inputs() {
  const auto& d = fixture_dir();
  return "-c " + d.string() + " --concepts " + (d / kSynthConceptsFile).string() + " --phase-texts " +
         (d / kPhaseTextsFile).string();
}

}  // namespace

TEST(Cli, FullPipelineSmoke) {
  const auto out = fixtures::scratch_dir("cli_run");
  const auto r = run_cli("run " + inputs() + " -o " + out.string() + " --with-ablation --grid frame_selection");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"penultimate/representatives.json", "penultimate/annotations.json", "penultimate/scores.f32bin",
                        "final/representatives.json", "final/annotations.json", "final/scores.f32bin",
                        "explanations.jsonl", "metrics.json", "ablation.csv", "ablation.json", "report.md",
                        "report.html"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto metrics = json::parse(read_file_bytes(out / "metrics.json"));
  EXPECT_GT(metrics["concept_alignment"]["avg"].get<double>(), 0.0);
  const auto ann = json::parse(read_file_bytes(out / "penultimate/annotations.json"));
  const auto n = ann["scores_shape"][0].get<std::size_t>(), c = ann["scores_shape"][1].get<std::size_t>();
  EXPECT_EQ(fs::file_size(out / "penultimate/scores.f32bin"), 4 * n * c);
}

TEST(Cli, StagesRunIndividually) {
  const auto out = fixtures::scratch_dir("cli_stages");
  const auto io = inputs() + " -o " + out.string();
  ASSERT_EQ(run_cli("select " + io).code, 0);
  ASSERT_EQ(run_cli("annotate " + io).code, 0);
  ASSERT_EQ(run_cli("select --layer final " + io).code, 0);
  ASSERT_EQ(run_cli("annotate --layer final " + io).code, 0);
  ASSERT_EQ(run_cli("explain " + io).code, 0);
  const auto ev = run_cli("evaluate " + io);
  ASSERT_EQ(ev.code, 0) << ev.output;
  const auto inv = run_cli("involvement " + io + " --concept c000 --gt 0");
  ASSERT_EQ(inv.code, 0) << inv.output;
  const auto j = json::parse(read_file_bytes(out / kInvolvementFile));
  const double f = j["fraction"].get<double>();
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
  EXPECT_EQ(run_cli("report " + io).code, 0);
}

TEST(Cli, ExplainWithoutAnnotationsNamesAnnotate) {
  const auto out = fixtures::scratch_dir("cli_no_ann");
  const auto io = inputs() + " -o " + out.string();
  ASSERT_EQ(run_cli("select " + io).code, 0);
  const auto r = run_cli("explain " + io);
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("surgx annotate"), std::string::npos) << r.output;
}

TEST(Cli, ChangedConfigMakesArtifactsStale) {
  const auto out = fixtures::scratch_dir("cli_stale");
  const auto io = inputs() + " -o " + out.string();
  ASSERT_EQ(run_cli("select " + io).code, 0);
  ASSERT_EQ(run_cli("annotate " + io).code, 0);
  auto r = run_cli("explain " + io + " --theta 0.2");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("stale"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("surgx annotate"), std::string::npos) << r.output;
  r = run_cli("annotate " + io + " --strategy global-topk");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("surgx select"), std::string::npos) << r.output;
}

TEST(Cli, ErrorExitCodes) {
  const auto out = fixtures::scratch_dir("cli_errors");
  EXPECT_EQ(run_cli("validate " + (out / "absent").string()).code, 3);
  EXPECT_EQ(run_cli("select -c " + fixture_dir().string() + " -o " + out.string() + " --strategy sideways").code, 2);
  EXPECT_EQ(run_cli("select -c " + fixture_dir().string() + " -o " + out.string() + " --n-prev 3 --dilation-s 0.1").code, 2);
  EXPECT_EQ(run_cli("bogus").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
  const auto v = run_cli("validate " + fixture_dir().string());
  EXPECT_EQ(v.code, 0) << v.output;
  EXPECT_NE(v.output.find("ok"), std::string::npos);

  // A NaN in a tensor is a numeric error.
  const auto broken = fixtures::scratch_dir("cli_nan");
  fs::copy(fixture_dir(), broken, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  const auto file = broken / "embeddings" / "v0000.f32bin";
  auto values = decode_f32(read_file_bytes(file));
  values[0] = std::numeric_limits<float>::infinity();
  write_f32bin(file, values);
  EXPECT_EQ(run_cli("validate " + broken.string()).code, 4);
}

TEST(Cli, SynthWithSpecFile) {
  const auto dir = fixtures::scratch_dir("cli_synth");
  write_file_bytes(dir / "spec.json", R"({"neurons": 16, "concepts": 20, "dim": 8, "probe_videos": 2, "test_videos": 1})");
  const auto r = run_cli("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "fx").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(load_container(dir / "fx").manifest.layers[0].neuron_count, 16u);
  write_file_bytes(dir / "bad.json", R"({"neurons": 2})");
  EXPECT_EQ(run_cli("synth --spec " + (dir / "bad.json").string() + " --out " + (dir / "fx2").string()).code, 2);
}

TEST(Cli, SampleDataFiles) {
  const auto dir = fixtures::scratch_dir("cli_samples_" + std::to_string(getpid()));
  const fs::path data = SURGX_DATA_DIR;
  auto r = run_cli("synth --spec " + (data / "plant_spec_small.json").string() + " --out " + (dir / "fx").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string io = "-c " + (dir / "fx").string() + " --concepts " + (dir / "fx" / kSynthConceptsFile).string() +
                         " -o " + (dir / "out").string();
  r = run_cli("run " + io + " --backend gradient");
  ASSERT_EQ(r.code, 0) << r.output;
  r = run_cli("ablate " + io + " --grid-file " + (data / "grid_custom.json").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = json::parse(read_file_bytes(dir / "out" / kAblationJson));
  EXPECT_EQ(rows["rows"].size(), 5u);
  fs::remove_all(dir);
}

TEST(Report, CardsShowPlantedConcept) {
  const auto out = fixtures::scratch_dir("report_planted");
  RunConfig cfg;
  cfg.container = fixture_dir();
  cfg.concepts = {fixture_dir() / kSynthConceptsFile};
  cfg.out = out;
  cfg.deterministic = true;
  Workspace ws(cfg);
  cmd_run(ws);
  const auto truth = json::parse(read_file_bytes(fixture_dir() / kPlantTruthFile));
  const auto md = read_file_bytes(out / kReportMd);
  std::vector<json> records;
  std::istringstream lines(read_file_bytes(out / kExplanationsFile));
  for (std::string line; std::getline(lines, line);) records.push_back(json::parse(line));
  const auto cards = detail::pick_cards(records, cfg.max_cards);
  ASSERT_FALSE(cards.empty());
  for (const auto& card : cards) {
    const auto& top = card.record["neurons"][0];
    ASSERT_TRUE(top["annotated"].get<bool>());
    const auto planted = truth["penultimate_neurons"][top["neuron"].get<std::size_t>()]["concept_id"].get<std::string>();
    EXPECT_EQ(top["concepts"][0]["concept_id"].get<std::string>(), planted)
        << card.record["video_id"] << " frame " << card.record["frame_index"];
    EXPECT_NE(md.find(top["concepts"][0]["text"].get<std::string>()), std::string::npos);
  }
  EXPECT_EQ(md.find("Generated:"), std::string::npos);
}
