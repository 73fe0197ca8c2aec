#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kws/experiments.hpp"

using namespace kws;
namespace fs = std::filesystem;

namespace {

ExperimentPools stub_pools() {
  ExperimentPools pools;
  for (const std::string w : {"a", "b"}) {
    for (int i = 0; i < 50; ++i) {
      pools.real_train.push_back(
          {"r/" + w + std::to_string(i), w, Source::real, Split::train});
      pools.synthetic_train.push_back(
          {"s/" + w + std::to_string(i), w, Source::synthetic, Split::train});
    }
  }
  pools.words = {"a", "b"};
  return pools;
}

// fixed accuracies keyed on (point, trial)
TrainEvalFn fixed_stub(double base) {
  return [base](const DatasetView& view, std::uint64_t) {
    return TrialOutcome{base + 0.001 * static_cast<double>(view.entries.size() % 7),
                        0.25};
  };
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("run_experiment produces repeats x grid trials") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::size_sweep;
  cfg.grid = {1, 5, 10};
  cfg.repeats = 20;
  cfg.base_seed = 9;
  const auto results = run_experiment(cfg, stub_pools(), fixed_stub(0.5));
  CHECK(results.size() == 60);
  for (double point : cfg.grid) {
    const long count = std::count_if(
        results.begin(), results.end(),
        [point](const TrialResult& r) { return r.point == point; });
    CHECK(count == 20);
  }
}

TEST_CASE("repeats 1 gives one result per point") {
  ExperimentConfig cfg;
  cfg.grid = {2, 4};
  cfg.repeats = 1;
  const auto results = run_experiment(cfg, stub_pools(), fixed_stub(0.4));
  CHECK(results.size() == 2);
}

TEST_CASE("identical reruns are identical") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::replacement;
  cfg.grid = {0.0, 0.5, 1.0};
  cfg.repeats = 3;
  cfg.base_seed = 77;
  auto stub = [](const DatasetView& view, std::uint64_t seed) {
    double acc = 0.0;
    for (const auto& e : view.entries) acc += e.source == Source::real;
    return TrialOutcome{acc / view.entries.size() + 1e-9 * (seed % 97), 0.1};
  };
  const auto a = run_experiment(cfg, stub_pools(), stub);
  const auto b = run_experiment(cfg, stub_pools(), stub);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].accuracy == b[i].accuracy);
  }
}

TEST_CASE("threaded runs produce the same rows as single-threaded") {
  ExperimentConfig cfg;
  cfg.grid = {1, 2, 3};
  cfg.repeats = 5;
  const auto a = run_experiment(cfg, stub_pools(), fixed_stub(0.3));
  cfg.threads = 4;
  const auto b = run_experiment(cfg, stub_pools(), fixed_stub(0.3));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].point == b[i].point);
    CHECK(a[i].trial == b[i].trial);
    CHECK(a[i].accuracy == b[i].accuracy);
  }
}

TEST_CASE("errors are annotated with point and trial") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::size_sweep;
  cfg.grid = {1000};  // more than the pool holds
  cfg.repeats = 1;
  CHECK_THROWS_WITH_AS(run_experiment(cfg, stub_pools(), fixed_stub(0.5)),
                       doctest::Contains("point 1000"), std::runtime_error);
}

TEST_CASE("summarize computes mean and sample std") {
  std::vector<TrialResult> results = {
      {"size_sweep", 5, 0, 1, 0.5, 1.0},
      {"size_sweep", 5, 1, 2, 0.7, 1.0},
  };
  const auto summaries = summarize(results);
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].mean_accuracy == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(summaries[0].std_accuracy ==
        doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
  CHECK(summaries[0].repeats == 2);

  SUBCASE("identical accuracies give zero std") {
    results[1].accuracy = 0.5;
    CHECK(summarize(results)[0].std_accuracy == 0.0);
  }
  SUBCASE("single trial gives zero std and repeats 1") {
    results.pop_back();
    const auto s = summarize(results);
    CHECK(s[0].std_accuracy == 0.0);
    CHECK(s[0].repeats == 1);
  }
  SUBCASE("permutation invariant") {
    std::swap(results[0], results[1]);
    const auto s = summarize(results);
    CHECK(s[0].mean_accuracy == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(s[0].std_accuracy ==
          doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
  }
  SUBCASE("empty input rejected") {
    CHECK_THROWS(summarize({}));
  }
}

TEST_CASE("stubbed accuracies match closed-form statistics to 1e-9") {
  ExperimentConfig cfg;
  cfg.grid = {1, 2};
  cfg.repeats = 4;
  int call = 0;
  const double accs[8] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  auto stub = [&call, &accs](const DatasetView&, std::uint64_t) {
    return TrialOutcome{accs[call++], 0.0};
  };
  const auto results = run_experiment(cfg, stub_pools(), stub);
  const auto summaries = summarize(results);
  REQUIRE(summaries.size() == 2);
  // point 1: {0.1,0.2,0.3,0.4}; point 2: {0.5,0.6,0.7,0.8}
  CHECK(std::abs(summaries[0].mean_accuracy - 0.25) < 1e-9);
  CHECK(std::abs(summaries[1].mean_accuracy - 0.65) < 1e-9);
  const double expect_std = std::sqrt((0.0225 + 0.0025 + 0.0025 + 0.0225) / 3);
  CHECK(std::abs(summaries[0].std_accuracy - expect_std) < 1e-9);
  CHECK(std::abs(summaries[1].std_accuracy - expect_std) < 1e-9);
}

TEST_CASE("write_results emits the pinned CSV schema") {
  const std::string dir =
      (fs::temp_directory_path() / "kws_results_test").string();
  ExperimentConfig cfg;
  cfg.grid = {1, 5, 10};
  cfg.repeats = 20;
  const auto results = run_experiment(cfg, stub_pools(), fixed_stub(0.5));
  const auto summaries = summarize(results);
  write_results(results, summaries, dir);

  const auto trials = read_lines(dir + "/trials.csv");
  REQUIRE(trials.size() == 61);
  CHECK(trials[0] == "experiment,point,trial,seed,accuracy,train_seconds");

  const auto summary = read_lines(dir + "/summary.csv");
  REQUIRE(summary.size() == 4);
  CHECK(summary[0] == "experiment,point,mean_accuracy,std_accuracy,repeats");

  SUBCASE("summary round-trips to 6 decimals") {
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      std::stringstream ss(summary[i + 1]);
      std::string experiment, point, mean, stdev, repeats;
      std::getline(ss, experiment, ',');
      std::getline(ss, point, ',');
      std::getline(ss, mean, ',');
      std::getline(ss, stdev, ',');
      std::getline(ss, repeats, ',');
      CHECK(experiment == summaries[i].experiment);
      CHECK(std::abs(std::stod(mean) - summaries[i].mean_accuracy) < 5e-7);
      CHECK(std::abs(std::stod(stdev) - summaries[i].std_accuracy) < 5e-7);
      CHECK(std::stoi(repeats) == summaries[i].repeats);
    }
  }
  SUBCASE("empty results write headers only") {
    write_results({}, {}, dir);
    CHECK(read_lines(dir + "/trials.csv").size() == 1);
    CHECK(read_lines(dir + "/summary.csv").size() == 1);
  }
  fs::remove_all(dir);
}
