#ifndef KWS_EXPERIMENTS_HPP
#define KWS_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kws/data.hpp"
#include "kws/trainer.hpp"

namespace kws {

enum class ExperimentKind { size_sweep, replacement, augmentation };
enum class ModelMode { full, head_on_frozen_trunk };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::size_sweep;
  std::vector<double> grid;  // n per word, fraction real, or n real per word
  int repeats = 20;
  std::uint64_t base_seed = 1;
  ModelMode mode = ModelMode::head_on_frozen_trunk;
  std::string trunk_path;  // head_on_frozen_trunk mode
  TrainConfig train;
  int threads = 1;
};

struct ExperimentPools {
  std::vector<ManifestEntry> real_train;
  std::vector<ManifestEntry> synthetic_train;
  std::vector<ManifestEntry> test;
  std::vector<std::string> words;
};

struct TrialResult {
  std::string experiment;
  double point = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double train_seconds = 0.0;
};

struct TrialSummary {
  std::string experiment;
  double point = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std, n-1 denominator; 0 for repeats=1
  int repeats = 0;
};

struct TrialOutcome {
  double accuracy = 0.0;
  double train_seconds = 0.0;
};

// Trains and evaluates one selection; tests substitute a stub.
using TrainEvalFn =
    std::function<TrialOutcome(const DatasetView&, std::uint64_t seed)>;

const char* experiment_name(ExperimentKind kind);
std::uint64_t trial_seed(std::uint64_t base_seed, double point, int trial);

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg,
                                        const ExperimentPools& pools,
                                        TrainEvalFn train_eval = nullptr);

std::vector<TrialSummary> summarize(const std::vector<TrialResult>& results);

void write_results(const std::vector<TrialResult>& results,
                   const std::vector<TrialSummary>& summaries,
                   const std::string& dir);

}  // namespace kws

#endif
