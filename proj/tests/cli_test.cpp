#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kws/model.hpp"
#include "kws/toy.hpp"
#include "kws/wav.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd =
      std::string(KWS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "kws_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("help exits zero and lists subcommands") {
  CHECK(run("--help") == 0);
  CHECK(run("features --help") == 0);
  CHECK(run("pretrain --help") == 0);
  CHECK(run("experiment --help") == 0);
}

TEST_CASE("unknown subcommand is a usage error") {
  CHECK(run("bogus") == 2);
}

TEST_CASE("features on a 1 s wav writes one context grid") {
  const fs::path dir = temp_dir();
  const fs::path wav = dir / "one.wav";
  kws::save_wav(wav.string(), std::vector<float>(16000, 0.1f));
  const fs::path out = dir / "one.kwsf";
  REQUIRE(run("features --wav " + wav.string() + " --out " + out.string()) ==
          0);
  const auto bytes = slurp(out);
  REQUIRE(bytes.size() == 12 + 6336);  // header + 198*32
  CHECK(bytes[0] == 'K');
  CHECK(bytes[1] == 'W');
  CHECK(bytes[2] == 'S');
  CHECK(bytes[3] == 'F');
  // count field
  CHECK(bytes[8] == 1);
  fs::remove_all(dir);
}

TEST_CASE("features with a missing file exits 2") {
  CHECK(run("features --wav /nonexistent.wav --out /tmp/x.kwsf") == 2);
}

TEST_CASE("features on an empty manifest writes an empty container") {
  const fs::path dir = temp_dir();
  const fs::path manifest = dir / "empty.csv";
  std::ofstream(manifest) << "path,label,source,split\n";
  const fs::path out = dir / "empty.kwsf";
  REQUIRE(run("features --manifest " + manifest.string() + " --out " +
              out.string()) == 0);
  const auto bytes = slurp(out);
  REQUIRE(bytes.size() == 12);
  CHECK(bytes[8] == 0);
  fs::remove_all(dir);
}

TEST_CASE("gen-toy-corpus produces a usable manifest") {
  const fs::path dir = temp_dir() / "corpus";
  REQUIRE(run("gen-toy-corpus --out " + dir.string() +
              " --classes 2 --train-per-class 2 --test-per-class 1 "
              "--synthetic-per-class 1 --seed 3") == 0);
  CHECK(fs::exists(dir / "manifest.csv"));
  const fs::path out = dir / "all.kwsf";
  CHECK(run("features --manifest " + (dir / "manifest.csv").string() +
            " --out " + out.string()) == 0);
  CHECK(slurp(out).size() == 12 + 8u * 6336);
  fs::remove_all(temp_dir());
}

TEST_CASE("pretrain rejects zero groups") {
  const fs::path dir = temp_dir();
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << "{}";
  CHECK(run("pretrain --config " + cfg.string() +
            " --groups 0 --out /tmp/t.kwsw") == 2);
  fs::remove_all(dir);
}

TEST_CASE("config with unknown keys exits 2") {
  const fs::path dir = temp_dir();
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"trainn": {}})";
  CHECK(run("pretrain --config " + cfg.string() +
            " --groups 1 --out /tmp/t.kwsw") == 2);
  fs::remove_all(dir);
}

TEST_CASE("experiment config with an invalid kind names the token") {
  const fs::path dir = temp_dir();
  const fs::path cfg = dir / "exp.json";
  std::ofstream(cfg)
      << R"({"experiment": {"kind": "bogus_kind", "grid": [1]}})";
  const std::string cmd = std::string(KWS_CLI_PATH) + " experiment --config " +
                          cfg.string() + " --out " + (dir / "out").string() +
                          " 2>" + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
  std::ifstream err(dir / "err.txt");
  std::string text((std::istreambuf_iterator<char>(err)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("bogus_kind") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("eval rejects a head whose class count mismatches the manifest") {
  const fs::path dir = temp_dir() / "eval";
  kws::ToyCorpusConfig tcfg;
  tcfg.num_classes = 2;
  tcfg.train_per_class = 1;
  tcfg.test_per_class = 1;
  tcfg.synthetic_per_class = 0;
  kws::gen_toy_corpus(dir.string(), tcfg);

  const fs::path trunk = dir / "trunk.kwsw";
  const fs::path head = dir / "head.kwsw";
  kws::save_embedding(kws::build_embedding(1), trunk.string());
  kws::save_head(kws::build_head(3, kws::HeadMode::pooled_dense, 1),
                 head.string());
  CHECK(run("eval --trunk " + trunk.string() + " --head " + head.string() +
            " --manifest " + (dir / "manifest.csv").string()) == 2);
  fs::remove_all(temp_dir());
}
