#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "kws/data.hpp"
#include "kws/experiments.hpp"
#include "kws/frontend.hpp"
#include "kws/model.hpp"
#include "kws/toy.hpp"
#include "kws/trainer.hpp"
#include "kws/util.hpp"
#include "kws/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string manifest;
  kws::FrontendConfig frontend;
  kws::TrainConfig train;
  kws::ExperimentConfig experiment;
  fs::path base_dir;
};

void reject_unknown(const json& obj, const std::vector<std::string>& known,
                    const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw UsageError("config: unknown key '" + it.key() + "' in " + section);
    }
  }
}

std::string resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  RunConfig cfg;
  cfg.base_dir = fs::path(path).parent_path();
  reject_unknown(doc, {"data", "frontend", "train", "experiment"}, "top level");

  if (doc.contains("data")) {
    const json& d = doc["data"];
    reject_unknown(d, {"manifest"}, "data");
    if (d.contains("manifest")) {
      cfg.manifest = resolve(cfg.base_dir, d["manifest"].get<std::string>());
    }
  }
  if (doc.contains("frontend")) {
    const json& f = doc["frontend"];
    reject_unknown(f,
                   {"sample_rate_hz", "window_ms", "hop_ms", "fft_size",
                    "num_mel_bins", "fmin_hz", "fmax_hz", "log_floor",
                    "log_ceil"},
                   "frontend");
    auto& fc = cfg.frontend;
    if (f.contains("sample_rate_hz")) fc.sample_rate_hz = f["sample_rate_hz"];
    if (f.contains("window_ms")) fc.window_ms = f["window_ms"];
    if (f.contains("hop_ms")) fc.hop_ms = f["hop_ms"];
    if (f.contains("fft_size")) fc.fft_size = f["fft_size"];
    if (f.contains("num_mel_bins")) fc.num_mel_bins = f["num_mel_bins"];
    if (f.contains("fmin_hz")) fc.fmin_hz = f["fmin_hz"];
    if (f.contains("fmax_hz")) fc.fmax_hz = f["fmax_hz"];
    if (f.contains("log_floor")) fc.log_floor = f["log_floor"];
    if (f.contains("log_ceil")) fc.log_ceil = f["log_ceil"];
    fc.validate();
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t,
                   {"batch_size", "epochs", "learning_rate", "warmup_steps",
                    "seed", "non_target_class"},
                   "train");
    auto& tc = cfg.train;
    if (t.contains("batch_size")) tc.batch_size = t["batch_size"];
    if (t.contains("epochs")) tc.epochs = t["epochs"];
    if (t.contains("learning_rate")) tc.learning_rate = t["learning_rate"];
    if (t.contains("warmup_steps")) tc.warmup_steps = t["warmup_steps"];
    if (t.contains("seed")) tc.seed = t["seed"].get<std::uint64_t>();
    if (t.contains("non_target_class"))
      tc.non_target_class = t["non_target_class"];
    if (tc.batch_size < 1 || tc.epochs < 1) {
      throw UsageError("config: batch_size and epochs must be >= 1");
    }
  }
  if (doc.contains("experiment")) {
    const json& e = doc["experiment"];
    reject_unknown(e, {"kind", "grid", "repeats", "base_seed", "mode", "trunk"},
                   "experiment");
    auto& ec = cfg.experiment;
    if (e.contains("kind")) {
      const std::string kind = e["kind"];
      if (kind == "size_sweep") {
        ec.kind = kws::ExperimentKind::size_sweep;
      } else if (kind == "replacement") {
        ec.kind = kws::ExperimentKind::replacement;
      } else if (kind == "augmentation") {
        ec.kind = kws::ExperimentKind::augmentation;
      } else {
        throw UsageError("config: unknown experiment kind '" + kind + "'");
      }
    }
    if (e.contains("grid")) ec.grid = e["grid"].get<std::vector<double>>();
    if (e.contains("repeats")) ec.repeats = e["repeats"];
    if (e.contains("base_seed")) ec.base_seed = e["base_seed"].get<std::uint64_t>();
    if (e.contains("mode")) {
      const std::string mode = e["mode"];
      if (mode == "full") {
        ec.mode = kws::ModelMode::full;
      } else if (mode == "head") {
        ec.mode = kws::ModelMode::head_on_frozen_trunk;
      } else {
        throw UsageError("config: unknown model mode '" + mode + "'");
      }
    }
    if (e.contains("trunk")) {
      ec.trunk_path = resolve(cfg.base_dir, e["trunk"].get<std::string>());
    }
  }

  if (const char* env_seed = std::getenv("KWS_SEED")) {
    const std::uint64_t s = std::strtoull(env_seed, nullptr, 10);
    cfg.train.seed = s;
    cfg.experiment.base_seed = s;
  }
  cfg.experiment.train = cfg.train;
  return cfg;
}

void write_kwsf(const std::string& path,
                const std::vector<kws::FeatureContext>& contexts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write: " + path);
  auto wr_u32 = [&os](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  os.write("KWSF", 4);
  wr_u32(1);
  wr_u32(static_cast<std::uint32_t>(contexts.size()));
  for (const auto& ctx : contexts) {
    os.write(reinterpret_cast<const char*>(&ctx.frames[0][0]),
             kws::kContextFrames * kws::kNumMelBins);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<kws::ManifestEntry> split_entries(
    const std::vector<kws::ManifestEntry>& all, kws::Split split) {
  std::vector<kws::ManifestEntry> out;
  for (const auto& e : all) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

int cmd_features(const std::string& wav, const std::string& manifest,
                 const std::string& out) {
  kws::FrontendConfig cfg;
  std::vector<kws::FeatureContext> contexts;
  if (!wav.empty()) {
    auto frames = kws::extract_log_mel(kws::load_wav(wav), cfg);
    if (frames.empty()) throw UsageError("audio too short: " + wav);
    contexts.push_back(kws::window_to_context(frames));
  } else {
    for (const auto& e : kws::load_manifest(manifest)) {
      auto frames = kws::extract_log_mel(kws::load_wav(e.path), cfg);
      if (frames.empty()) throw UsageError("audio too short: " + e.path);
      contexts.push_back(kws::window_to_context(frames));
    }
  }
  write_kwsf(out, contexts);
  std::cout << "contexts=" << contexts.size() << "\n";
  return 0;
}

void print_report(const kws::TrainReport& report) {
  for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
    std::fprintf(stderr, "epoch %zu mean_loss %.6f\n", i + 1,
                 report.epoch_loss[i]);
  }
  std::printf("steps=%lld train_accuracy=%.6f wall_seconds=%.3f\n",
              static_cast<long long>(report.steps),
              report.final_train_accuracy, report.wall_seconds);
}

int cmd_pretrain(const std::string& config_path, int num_groups,
                 const std::string& out) {
  if (num_groups < 1) throw UsageError("--groups must be >= 1");
  RunConfig cfg = load_config(config_path);
  if (cfg.manifest.empty()) throw UsageError("config: data.manifest required");
  auto entries = kws::load_manifest(cfg.manifest);
  auto train_entries = split_entries(entries, kws::Split::train);
  auto words = kws::collect_words(train_entries);
  if (static_cast<int>(words.size()) < 2 * num_groups) {
    throw UsageError("pretrain: need at least 2 words per group, have " +
                     std::to_string(words.size()) + " words for " +
                     std::to_string(num_groups) + " groups");
  }

  // seeded shuffle, then round-robin split into K label groups
  kws::Rng rng(cfg.train.seed);
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    const std::size_t j =
        i + rng.next_below(static_cast<std::uint32_t>(words.size() - i));
    std::swap(words[i], words[j]);
  }
  std::vector<kws::HeadGroup> groups(num_groups);
  for (std::size_t i = 0; i < words.size(); ++i) {
    groups[i % num_groups].target_labels.push_back(words[i]);
  }

  kws::FeatureCache cache(cfg.frontend);
  for (int gi = 0; gi < num_groups; ++gi) {
    auto& g = groups[gi];
    g.group_id = gi;
    std::sort(g.target_labels.begin(), g.target_labels.end());
    const int base_classes = static_cast<int>(g.target_labels.size());
    const int num_classes = base_classes + (cfg.train.non_target_class ? 1 : 0);
    g.head = kws::build_head(num_classes, kws::HeadMode::pooled_dense,
                             cfg.train.seed ^ (0x1000ull + gi));
    std::vector<kws::ManifestEntry> own;
    std::vector<kws::ManifestEntry> other;
    for (const auto& e : train_entries) {
      const bool mine =
          std::binary_search(g.target_labels.begin(), g.target_labels.end(),
                             e.label);
      (mine ? own : other).push_back(e);
    }
    g.examples = kws::materialize(own, g.target_labels, cache);
    if (cfg.train.non_target_class && !other.empty()) {
      // non-targets drawn from the other groups' words, one per own example
      kws::Rng pick(cfg.train.seed ^ (0x2000ull + gi));
      const std::size_t n_other = std::min(other.size(), own.size());
      for (std::size_t k = 0; k < n_other; ++k) {
        const auto& e = other[pick.next_below(
            static_cast<std::uint32_t>(other.size()))];
        kws::AudioExample ex;
        ex.features = cache.get(e.path);
        ex.label = base_classes;
        g.examples.push_back(ex);
      }
    }
  }

  kws::EmbeddingModel trunk = kws::build_embedding(cfg.train.seed);
  kws::TrainConfig tc = cfg.train;
  tc.freeze_trunk = false;
  kws::TrainReport report = kws::train_multihead(trunk, groups, tc);
  kws::save_embedding(trunk, out);
  print_report(report);
  std::fprintf(stderr, "trunk written to %s (%zu params)\n", out.c_str(),
               kws::param_count(trunk));
  return 0;
}

int cmd_train_head(const std::string& trunk_path, const std::string& manifest,
                   const std::string& out, const std::string& config_path) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  kws::EmbeddingModel trunk = kws::load_embedding(trunk_path);
  auto entries = kws::load_manifest(manifest);
  auto train_entries = split_entries(entries, kws::Split::train);
  if (train_entries.empty()) throw UsageError("manifest has no train entries");
  auto words = kws::collect_words(train_entries);
  if (words.size() < 2) throw UsageError("need at least 2 words to train");

  kws::FeatureCache cache(cfg.frontend);
  auto examples = kws::materialize(train_entries, words, cache);
  kws::HeadModel head =
      kws::build_head(static_cast<int>(words.size()),
                      kws::HeadMode::pooled_dense, cfg.train.seed);
  kws::TrainConfig tc = cfg.train;
  tc.freeze_trunk = true;
  kws::TrainReport report = kws::train_head(trunk, head, examples, tc);
  kws::save_head(head, out);
  print_report(report);
  return 0;
}

int cmd_eval(const std::string& trunk_path, const std::string& head_path,
             const std::string& manifest) {
  kws::EmbeddingModel trunk = kws::load_embedding(trunk_path);
  kws::HeadModel head = kws::load_head(head_path);
  auto entries = kws::load_manifest(manifest);
  auto test_entries = split_entries(entries, kws::Split::test);
  if (test_entries.empty()) throw UsageError("manifest has no test entries");
  auto words = kws::collect_words(split_entries(entries, kws::Split::train));
  if (words.empty()) words = kws::collect_words(test_entries);
  if (static_cast<int>(words.size()) != head.num_classes) {
    throw UsageError("head has " + std::to_string(head.num_classes) +
                     " classes but manifest has " +
                     std::to_string(words.size()) + " words");
  }
  kws::FeatureCache cache;
  auto examples = kws::materialize(test_entries, words, cache);
  const double acc = kws::evaluate_accuracy(trunk, head, examples);
  std::printf("accuracy=%.6f\n", acc);
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   int threads) {
  RunConfig cfg = load_config(config_path);
  if (cfg.manifest.empty()) throw UsageError("config: data.manifest required");
  if (cfg.experiment.grid.empty()) {
    throw UsageError("config: experiment.grid required");
  }
  if (cfg.experiment.mode == kws::ModelMode::head_on_frozen_trunk &&
      cfg.experiment.trunk_path.empty()) {
    throw UsageError("config: experiment.trunk required for head mode");
  }
  auto entries = kws::load_manifest(cfg.manifest);
  kws::ExperimentPools pools;
  for (const auto& e : entries) {
    if (e.split == kws::Split::train) {
      (e.source == kws::Source::real ? pools.real_train
                                     : pools.synthetic_train)
          .push_back(e);
    } else if (e.split == kws::Split::test && e.source == kws::Source::real) {
      pools.test.push_back(e);
    }
  }
  pools.words = kws::collect_words(pools.real_train);
  cfg.experiment.threads = threads;

  auto results = kws::run_experiment(cfg.experiment, pools);
  auto summaries = kws::summarize(results);
  kws::write_results(results, summaries, out_dir);
  std::printf("trials=%zu summary_points=%zu out=%s\n", results.size(),
              summaries.size(), out_dir.c_str());
  return 0;
}

int cmd_gen_toy(const std::string& out_dir, const kws::ToyCorpusConfig& cfg) {
  auto entries = kws::gen_toy_corpus(out_dir, cfg);
  std::printf("entries=%zu manifest=%s\n", entries.size(),
              (fs::path(out_dir) / "manifest.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword-spotting toolkit: quantized log-mel frontend, shared "
               "embedding trunk, transferable heads, data-ablation harness"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for experiment trials");

  std::string wav, manifest, out, config_path, trunk_path, head_path, out_dir;
  int num_groups = 0;

  auto* features = app.add_subcommand("features", "Extract feature contexts");
  auto* f_wav = features->add_option("--wav", wav, "Single WAV input");
  auto* f_man = features->add_option("--manifest", manifest, "Manifest input");
  features->add_option("--out", out, "Output KWSF container")->required();
  f_wav->excludes(f_man);

  auto* pretrain =
      app.add_subcommand("pretrain", "Multi-head pretraining of the trunk");
  pretrain->add_option("--config", config_path, "JSON run config")->required();
  pretrain->add_option("--groups", num_groups, "Number of head groups")
      ->required();
  pretrain->add_option("--out", out, "Output trunk weights file")->required();

  auto* train_head =
      app.add_subcommand("train-head", "Train a head on a frozen trunk");
  train_head->add_option("--trunk", trunk_path, "Trunk weights")->required();
  train_head->add_option("--manifest", manifest, "Data manifest")->required();
  train_head->add_option("--out", out, "Output head weights file")->required();
  train_head->add_option("--config", config_path, "JSON run config");

  auto* eval = app.add_subcommand("eval", "Evaluate trunk+head on test split");
  eval->add_option("--trunk", trunk_path, "Trunk weights")->required();
  eval->add_option("--head", head_path, "Head weights")->required();
  eval->add_option("--manifest", manifest, "Data manifest")->required();

  auto* experiment =
      app.add_subcommand("experiment", "Run a data-ablation experiment grid");
  experiment->add_option("--config", config_path, "JSON run config")
      ->required();
  experiment->add_option("--out", out_dir, "Output directory")->required();

  kws::ToyCorpusConfig toy_cfg;
  auto* gen_toy = app.add_subcommand("gen-toy-corpus",
                                     "Generate the procedural toy corpus");
  gen_toy->add_option("--out", out_dir, "Output directory")->required();
  gen_toy->add_option("--classes", toy_cfg.num_classes, "Number of classes");
  gen_toy->add_option("--train-per-class", toy_cfg.train_per_class,
                      "Real train clips per class");
  gen_toy->add_option("--test-per-class", toy_cfg.test_per_class,
                      "Real test clips per class");
  gen_toy->add_option("--synthetic-per-class", toy_cfg.synthetic_per_class,
                      "Synthetic train clips per class");
  std::uint64_t toy_seed = 1;
  gen_toy->add_option("--seed", toy_seed, "Corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (features->parsed()) {
      if (wav.empty() && manifest.empty()) {
        throw UsageError("features: need --wav or --manifest");
      }
      return cmd_features(wav, manifest, out);
    }
    if (pretrain->parsed()) return cmd_pretrain(config_path, num_groups, out);
    if (train_head->parsed()) {
      return cmd_train_head(trunk_path, manifest, out, config_path);
    }
    if (eval->parsed()) return cmd_eval(trunk_path, head_path, manifest);
    if (experiment->parsed()) {
      return cmd_experiment(config_path, out_dir, threads);
    }
    if (gen_toy->parsed()) {
      toy_cfg.seed = toy_seed;
      if (const char* env_seed = std::getenv("KWS_SEED")) {
        toy_cfg.seed = std::strtoull(env_seed, nullptr, 10);
      }
      return cmd_gen_toy(out_dir, toy_cfg);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
