#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtft/cli.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("mtft");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return mtft::run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const {
    return (path / leaf).string();
  }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

const std::vector<std::string> kTinySynth{
    "synth", "--count", "8",  "--t-h",  "8", "--t-f",
    "4",     "--mix",   "cv=1,lane=1", "--seed", "3"};

}  // namespace

TEST_CASE("argument errors exit with 2, runtime errors with 1") {
  CHECK(cli({"--help"}) == 0);
  CHECK(cli({"synth", "--count", "4", "--out", "x"}) == 2);  // missing --seed
  CHECK(cli({"synth", "--bogus-flag", "--seed", "1", "--out", "x"}) == 2);
  CHECK(cli({"no-such-command"}) == 2);
  TempDir dir("mtft_cli_err");
  CHECK(cli({"train", "--data", dir / "missing_dataset", "--seed", "1",
             "--out", dir / "out", "--epochs", "1"}) == 1);
  CHECK(cli({"eval", "--data", dir / "missing", "--model", dir / "no.ckpt",
             "--seed", "1", "--out", dir / "out"}) == 1);
}

TEST_CASE("synth is reproducible and snapshots its configuration") {
  TempDir dir("mtft_cli_synth");
  auto args = kTinySynth;
  args.insert(args.end(), {"--out", dir / "a"});
  REQUIRE(cli(args) == 0);
  REQUIRE(fs::exists(dir / "a/scenes.csv"));
  REQUIRE(fs::exists(dir / "a/manifest.txt"));
  REQUIRE(fs::exists(dir / "a/config_resolved.txt"));
  std::string first = slurp(dir / "a/scenes.csv");

  auto again = kTinySynth;
  again.insert(again.end(), {"--out", dir / "b"});
  REQUIRE(cli(again) == 0);
  CHECK(slurp(dir / "b/scenes.csv") == first);

  // The snapshot alone reproduces the dataset byte for byte.
  REQUIRE(cli({"synth", "--config", dir / "a/config_resolved.txt", "--out",
               dir / "c"}) == 0);
  CHECK(slurp(dir / "c/scenes.csv") == first);
}

TEST_CASE("mask dump writes one bit row per vehicle") {
  TempDir dir("mtft_cli_mask");
  auto args = kTinySynth;
  args.insert(args.end(), {"--out", dir / "data"});
  REQUIRE(cli(args) == 0);
  REQUIRE(cli({"mask", "--data", dir / "data", "--interval", "30-60",
               "--seed", "5", "--out", dir / "masks"}) == 0);
  std::ifstream in(dir / "masks/masks.csv");
  REQUIRE(in);
  std::string header;
  std::getline(in, header);
  CHECK(header == "scene_id,vehicle_id,t0,t1,t2,t3,t4,t5,t6,t7");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows >= 8);  // at least one vehicle per scene
}

TEST_CASE("train, eval, and dumps run end to end") {
  TempDir dir("mtft_cli_pipeline");
  auto args = kTinySynth;
  args.insert(args.end(), {"--out", dir / "data"});
  REQUIRE(cli(args) == 0);

  REQUIRE(cli({"train",   "--data",   dir / "data", "--seed",  "2",
               "--out",   dir / "run", "--epochs",  "2",       "--batch",
               "4",       "--d-model", "12",        "--scales", "3",
               "--layers", "2"}) == 0);
  REQUIRE(fs::exists(dir / "run/model.ckpt"));
  REQUIRE(fs::exists(dir / "run/loss_curve.csv"));
  REQUIRE(fs::exists(dir / "run/checkpoints/epoch_2.ckpt"));

  REQUIRE(cli({"eval", "--data", dir / "data", "--model", dir / "run/model.ckpt",
               "--seed", "4", "--out", dir / "ev"}) == 0);
  REQUIRE(fs::exists(dir / "ev/metrics.csv"));
  std::string metrics = slurp(dir / "ev/metrics.csv");
  CHECK(metrics.rfind("variant,interval,horizon,rmse,ade,fde,mr,seed\n", 0) ==
        0);
  CHECK(metrics.find("mtft,none,") != std::string::npos);

  REQUIRE(cli({"eval", "--data", dir / "data", "--model", dir / "run/model.ckpt",
               "--seed", "4", "--out", dir / "ev2", "--interval", "30-60"}) ==
          0);
  CHECK(slurp(dir / "ev2/metrics.csv").find("mtft,30-60,") !=
        std::string::npos);

  // Byte-identical on rerun with the same seed.
  REQUIRE(cli({"eval", "--data", dir / "data", "--model", dir / "run/model.ckpt",
               "--seed", "4", "--out", dir / "ev3", "--interval", "30-60"}) ==
          0);
  CHECK(slurp(dir / "ev3/metrics.csv") == slurp(dir / "ev2/metrics.csv"));

  REQUIRE(cli({"dump-attention", "--data", dir / "data", "--model",
               dir / "run/model.ckpt", "--seed", "6", "--out",
               dir / "attn"}) == 0);
  std::string attn = slurp(dir / "attn/attention.csv");
  CHECK(attn.rfind("vehicle,layer,head,row,col,weight\n", 0) == 0);

  REQUIRE(cli({"dump-continuity", "--data", dir / "data", "--model",
               dir / "run/model.ckpt", "--seed", "6", "--interval", "60-90",
               "--out", dir / "cont"}) == 0);
  CHECK(fs::exists(dir / "cont/across_weights.csv"));
  CHECK(fs::exists(dir / "cont/continuity.csv"));
  CHECK(fs::exists(dir / "cont/fusion_attention.csv"));
}

TEST_CASE("continuity dump requires the fusion variant") {
  TempDir dir("mtft_cli_vtf");
  auto args = kTinySynth;
  args.insert(args.end(), {"--out", dir / "data"});
  REQUIRE(cli(args) == 0);
  REQUIRE(cli({"train", "--data", dir / "data", "--seed", "2", "--out",
               dir / "run", "--epochs", "1", "--batch", "8", "--d-model", "12",
               "--scales", "3", "--layers", "1", "--variant", "vtf"}) == 0);
  CHECK(cli({"dump-continuity", "--data", dir / "data", "--model",
             dir / "run/model.ckpt", "--seed", "1", "--out",
             dir / "cont"}) == 1);
}

TEST_CASE("gradcheck subcommand passes at its defaults") {
  TempDir dir("mtft_cli_gradcheck");
  REQUIRE(cli({"gradcheck", "--seed", "11", "--out", dir / "gc"}) == 0);
  std::string report = slurp(dir / "gc/report.txt");
  CHECK(report.find("max_rel_err") != std::string::npos);
  // An impossible tolerance must flip the exit code.
  CHECK(cli({"gradcheck", "--seed", "11", "--tolerance", "1e-18"}) == 1);
}

TEST_CASE("ablation writes a study table over the split") {
  TempDir dir("mtft_cli_ablate");
  std::vector<std::string> synth{"synth", "--count", "10",  "--t-h", "8",
                                 "--t-f", "4",       "--mix", "cv=1", "--seed",
                                 "9",     "--out",   dir / "data"};
  REQUIRE(cli(synth) == 0);
  REQUIRE(cli({"ablate",    "--data", dir / "data", "--variants", "vtf,mtft",
               "--intervals", "0-30", "--seeds",    "1",          "--epochs",
               "1",         "--batch", "8",         "--d-model",  "12",
               "--scales",  "3",      "--layers",   "1",          "--seed",
               "1",         "--out",  dir / "study"}) == 0);
  std::string csv = slurp(dir / "study/ablation.csv");
  CHECK(csv.rfind("variant,interval,horizon,rmse,ade,fde,mr,seed\n", 0) == 0);
  CHECK(csv.find("vtf,0-30,") != std::string::npos);
  CHECK(csv.find("mtft,0-30,") != std::string::npos);
  CHECK(fs::exists(dir / "study/loss_curves/loss_vtf_0-30_s1.csv"));
}
