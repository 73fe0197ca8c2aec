#include "kws/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kws/util.hpp"
#include "kws/wav.hpp"

namespace kws {

namespace {

[[noreturn]] void parse_fail(const std::string& name, int line,
                             const std::string& what) {
  throw std::runtime_error("manifest " + name + " line " +
                           std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

const char* source_name(Source s) {
  return s == Source::real ? "real" : "synthetic";
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    default: return "test";
  }
}

// Seeded partial Fisher-Yates: first n positions of a shuffle of [0, size).
std::vector<std::size_t> sample_without_replacement(std::size_t size,
                                                    std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j =
        i + rng.next_below(static_cast<std::uint32_t>(size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

std::map<std::string, std::vector<std::size_t>> group_by_label(
    std::span<const ManifestEntry> entries) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    by_label[entries[i].label].push_back(i);
  }
  return by_label;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::istream& is,
                                          const std::string& name) {
  std::string line;
  if (!std::getline(is, line)) parse_fail(name, 1, "missing header row");
  if (split_csv(line) !=
      std::vector<std::string>{"path", "label", "source", "split"}) {
    parse_fail(name, 1, "header must be 'path,label,source,split'");
  }
  std::vector<ManifestEntry> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 4) parse_fail(name, lineno, "expected 4 columns");
    ManifestEntry e;
    e.path = cols[0];
    e.label = cols[1];
    if (e.label.empty()) parse_fail(name, lineno, "empty label");
    if (cols[2] == "real") {
      e.source = Source::real;
    } else if (cols[2] == "synthetic") {
      e.source = Source::synthetic;
    } else {
      parse_fail(name, lineno, "unknown source '" + cols[2] + "'");
    }
    if (cols[3] == "train") {
      e.split = Split::train;
    } else if (cols[3] == "validation") {
      e.split = Split::validation;
    } else if (cols[3] == "test") {
      e.split = Split::test;
    } else {
      parse_fail(name, lineno, "unknown split '" + cols[3] + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries = parse_manifest(is, path);
  // relative audio paths are relative to the manifest's directory
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (auto& e : entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative() && !base.empty()) e.path = (base / p).string();
  }
  return entries;
}

void write_manifest(const std::string& path,
                    std::span<const ManifestEntry> entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << "path,label,source,split\n";
  for (const auto& e : entries) {
    os << e.path << ',' << e.label << ',' << source_name(e.source) << ','
       << split_name(e.split) << '\n';
  }
}

FeatureContext window_to_context(std::span<const FeatureFrame> frames) {
  if (frames.empty()) {
    throw std::invalid_argument("window_to_context: empty input");
  }
  FeatureContext ctx{};
  const int n = static_cast<int>(frames.size());
  if (n >= kContextFrames) {
    const int off = (n - kContextFrames) / 2;
    for (int i = 0; i < kContextFrames; ++i) {
      ctx.frames[i] = frames[off + i].values;
    }
  } else {
    const int left = (kContextFrames - n) / 2;
    for (int i = 0; i < n; ++i) ctx.frames[left + i] = frames[i].values;
  }
  return ctx;
}

DatasetView select_n_per_word(std::span<const ManifestEntry> entries, int n,
                              std::span<const std::string> words,
                              std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("select_n_per_word: n must be >= 0");
  auto by_label = group_by_label(entries);
  DatasetView view;
  view.seed = seed;
  view.provenance = "select_n_per_word(n=" + std::to_string(n) + ")";
  Rng rng(seed);
  for (const auto& word : words) {
    auto it = by_label.find(word);
    const std::size_t avail = it == by_label.end() ? 0 : it->second.size();
    if (avail < static_cast<std::size_t>(n)) {
      throw std::runtime_error("select_n_per_word: word '" + word + "' has " +
                               std::to_string(avail) + " examples, need " +
                               std::to_string(n));
    }
    if (n == 0) continue;
    for (std::size_t k : sample_without_replacement(avail, n, rng)) {
      view.entries.push_back(entries[it->second[k]]);
    }
  }
  return view;
}

DatasetView mix_replacement(std::span<const ManifestEntry> real_pool,
                            std::span<const ManifestEntry> synthetic_pool,
                            double fraction_real, std::uint64_t seed) {
  if (!(fraction_real >= 0.0 && fraction_real <= 1.0)) {
    throw std::invalid_argument("mix_replacement: fraction must be in [0,1]");
  }
  auto real_by = group_by_label(real_pool);
  auto syn_by = group_by_label(synthetic_pool);
  DatasetView view;
  view.seed = seed;
  view.provenance = "mix_replacement(fraction_real=" +
                    std::to_string(fraction_real) + ")";
  Rng rng(seed);
  for (const auto& [word, syn_idx] : syn_by) {
    auto it = real_by.find(word);
    if (it == real_by.end()) {
      throw std::runtime_error("mix_replacement: word '" + word +
                               "' missing from real pool");
    }
    const std::size_t count = syn_idx.size();
    const std::size_t n_real = static_cast<std::size_t>(
        std::floor(fraction_real * static_cast<double>(count) + 0.5));
    if (it->second.size() < n_real) {
      throw std::runtime_error("mix_replacement: word '" + word +
                               "' has too few real examples");
    }
    for (std::size_t k :
         sample_without_replacement(it->second.size(), n_real, rng)) {
      view.entries.push_back(real_pool[it->second[k]]);
    }
    for (std::size_t k :
         sample_without_replacement(count, count - n_real, rng)) {
      view.entries.push_back(synthetic_pool[syn_idx[k]]);
    }
  }
  return view;
}

DatasetView mix_augmentation(std::span<const ManifestEntry> synthetic_pool,
                             std::span<const ManifestEntry> real_entries,
                             int n_real_per_word, std::uint64_t seed) {
  std::vector<std::string> words = collect_words(synthetic_pool);
  DatasetView view = select_n_per_word(real_entries, n_real_per_word, words, seed);
  view.provenance = "mix_augmentation(n_real=" +
                    std::to_string(n_real_per_word) + ")";
  view.entries.insert(view.entries.begin(), synthetic_pool.begin(),
                      synthetic_pool.end());
  return view;
}

std::vector<std::string> collect_words(std::span<const ManifestEntry> entries) {
  std::set<std::string> words;
  for (const auto& e : entries) words.insert(e.label);
  return {words.begin(), words.end()};
}

const FeatureContext& FeatureCache::get(const std::string& path) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
  }
  std::vector<float> samples = load_wav(path);
  std::vector<FeatureFrame> frames = extract_log_mel(samples, cfg_);
  if (frames.empty()) {
    throw std::runtime_error("audio too short for one frame: " + path);
  }
  FeatureContext ctx = window_to_context(frames);
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(path, ctx).first->second;
}

std::vector<AudioExample> materialize(std::span<const ManifestEntry> entries,
                                      std::span<const std::string> words,
                                      FeatureCache& cache) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < words.size(); ++i) {
    index[words[i]] = static_cast<int>(i);
  }
  std::vector<AudioExample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    auto it = index.find(e.label);
    if (it == index.end()) {
      throw std::runtime_error("label '" + e.label + "' not in word list");
    }
    out.push_back({cache.get(e.path), it->second});
  }
  return out;
}

std::vector<AudioExample> materialize(const DatasetView& view,
                                      std::span<const std::string> words,
                                      FeatureCache& cache) {
  return materialize(std::span<const ManifestEntry>(view.entries), words,
                     cache);
}

}  // namespace kws
