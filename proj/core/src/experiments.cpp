#include "kws/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "kws/model.hpp"
#include "kws/util.hpp"

namespace kws {

const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::size_sweep: return "size_sweep";
    case ExperimentKind::replacement: return "replacement";
    default: return "augmentation";
  }
}

std::uint64_t trial_seed(std::uint64_t base_seed, double point, int trial) {
  std::uint64_t h = kFnvOffset;
  h = fnv1a(h, &point, sizeof(point));
  h = fnv1a(h, &trial, sizeof(trial));
  return base_seed ^ h;
}

namespace {

std::string format_point(double point) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", point);
  return buf;
}

DatasetView build_view(const ExperimentConfig& cfg,
                       const ExperimentPools& pools, double point,
                       std::uint64_t seed) {
  switch (cfg.kind) {
    case ExperimentKind::size_sweep:
      return select_n_per_word(pools.real_train, static_cast<int>(point),
                               pools.words, seed);
    case ExperimentKind::replacement:
      return mix_replacement(pools.real_train, pools.synthetic_train, point,
                             seed);
    default:
      return mix_augmentation(pools.synthetic_train, pools.real_train,
                              static_cast<int>(point), seed);
  }
}

class DefaultRunner {
 public:
  DefaultRunner(const ExperimentConfig& cfg, const ExperimentPools& pools)
      : cfg_(cfg), pools_(pools) {
    if (cfg.mode == ModelMode::head_on_frozen_trunk) {
      trunk_ = load_embedding(cfg.trunk_path);
    }
    test_examples_ = materialize(pools.test, pools.words, cache_);
  }

  TrialOutcome operator()(const DatasetView& view, std::uint64_t seed) {
    std::vector<AudioExample> train_examples =
        materialize(view, pools_.words, cache_);
    TrainConfig tc = cfg_.train;
    tc.seed = seed;
    const int num_classes = static_cast<int>(pools_.words.size());
    if (cfg_.mode == ModelMode::head_on_frozen_trunk) {
      tc.freeze_trunk = true;
      HeadModel head = build_head(num_classes, HeadMode::pooled_dense, seed);
      TrainReport rep = train_head(trunk_, head, train_examples, tc);
      return {evaluate_accuracy(trunk_, head, test_examples_),
              rep.wall_seconds};
    }
    tc.freeze_trunk = false;
    EmbeddingModel trunk = build_embedding(seed);
    std::vector<HeadGroup> groups(1);
    groups[0].group_id = 0;
    groups[0].target_labels = pools_.words;
    groups[0].head = build_head(num_classes, HeadMode::pooled_dense, seed ^ 1);
    groups[0].examples = std::move(train_examples);
    TrainReport rep = train_multihead(trunk, groups, tc);
    return {evaluate_accuracy(trunk, groups[0].head, test_examples_),
            rep.wall_seconds};
  }

 private:
  ExperimentConfig cfg_;
  const ExperimentPools& pools_;
  EmbeddingModel trunk_;
  FeatureCache cache_;
  std::vector<AudioExample> test_examples_;
};

}  // namespace

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg,
                                        const ExperimentPools& pools,
                                        TrainEvalFn train_eval) {
  if (cfg.grid.empty()) throw std::invalid_argument("experiment: empty grid");
  if (cfg.repeats < 1) {
    throw std::invalid_argument("experiment: repeats must be >= 1");
  }
  std::shared_ptr<DefaultRunner> runner;
  if (!train_eval) {
    runner = std::make_shared<DefaultRunner>(cfg, pools);
    train_eval = [runner](const DatasetView& v, std::uint64_t s) {
      return (*runner)(v, s);
    };
  }

  struct Task {
    double point;
    int trial;
  };
  std::vector<Task> tasks;
  for (double point : cfg.grid) {
    for (int t = 0; t < cfg.repeats; ++t) tasks.push_back({point, t});
  }
  std::vector<TrialResult> results(tasks.size());

  auto run_one = [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::uint64_t seed = trial_seed(cfg.base_seed, task.point, task.trial);
    TrialResult r;
    r.experiment = experiment_name(cfg.kind);
    r.point = task.point;
    r.trial = task.trial;
    r.seed = seed;
    try {
      const DatasetView view = build_view(cfg, pools, task.point, seed);
      const TrialOutcome out = train_eval(view, seed);
      r.accuracy = out.accuracy;
      r.train_seconds = out.train_seconds;
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(e.what()) + " (point " +
                               format_point(task.point) + ", trial " +
                               std::to_string(task.trial) + ")");
    }
    results[i] = std::move(r);
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size();
             i = next.fetch_add(1)) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }
  return results;
}

std::vector<TrialSummary> summarize(const std::vector<TrialResult>& results) {
  if (results.empty()) throw std::invalid_argument("summarize: no results");
  std::vector<TrialSummary> out;
  for (const auto& r : results) {
    TrialSummary* group = nullptr;
    for (auto& s : out) {
      if (s.experiment == r.experiment && s.point == r.point) {
        group = &s;
        break;
      }
    }
    if (!group) {
      out.push_back({r.experiment, r.point, 0.0, 0.0, 0});
      group = &out.back();
    }
    group->mean_accuracy += r.accuracy;  // running sum for now
    group->repeats += 1;
  }
  for (auto& s : out) {
    s.mean_accuracy /= s.repeats;
    if (s.repeats > 1) {
      double ss = 0.0;
      for (const auto& r : results) {
        if (r.experiment == s.experiment && r.point == s.point) {
          const double d = r.accuracy - s.mean_accuracy;
          ss += d * d;
        }
      }
      s.std_accuracy = std::sqrt(ss / (s.repeats - 1));
    }
  }
  return out;
}

void write_results(const std::vector<TrialResult>& results,
                   const std::vector<TrialSummary>& summaries,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string trials_path = (fs::path(dir) / "trials.csv").string();
  const std::string summary_path = (fs::path(dir) / "summary.csv").string();

  std::ofstream trials(trials_path, std::ios::binary);
  if (!trials) throw std::runtime_error("cannot write " + trials_path);
  trials << "experiment,point,trial,seed,accuracy,train_seconds\n";
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy);
    trials << r.experiment << ',' << format_point(r.point) << ',' << r.trial
           << ',' << r.seed << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.3f", r.train_seconds);
    trials << buf << '\n';
  }
  if (!trials) throw std::runtime_error("write failed: " + trials_path);

  std::ofstream summary(summary_path, std::ios::binary);
  if (!summary) throw std::runtime_error("cannot write " + summary_path);
  summary << "experiment,point,mean_accuracy,std_accuracy,repeats\n";
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.mean_accuracy);
    summary << s.experiment << ',' << format_point(s.point) << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", s.std_accuracy);
    summary << buf << ',' << s.repeats << '\n';
  }
  if (!summary) throw std::runtime_error("write failed: " + summary_path);
}

}  // namespace kws
