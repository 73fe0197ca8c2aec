#ifndef KWS_DATA_HPP
#define KWS_DATA_HPP

#include <cstdint>
#include <istream>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kws/frontend.hpp"

namespace kws {

enum class Source { real, synthetic };
enum class Split { train, validation, test };

struct ManifestEntry {
  std::string path;
  std::string label;
  Source source = Source::real;
  Split split = Split::train;
};

// Ordered selection of manifest entries plus the seed and protocol that
// produced it.
struct DatasetView {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::string provenance;
};

struct AudioExample {
  FeatureContext features;
  int label = 0;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
std::vector<ManifestEntry> parse_manifest(std::istream& is,
                                          const std::string& name);
void write_manifest(const std::string& path,
                    std::span<const ManifestEntry> entries);

// Center pad (zero bytes) or center crop to exactly 198 frames; odd padding
// puts the extra frame on the right.
FeatureContext window_to_context(std::span<const FeatureFrame> frames);

DatasetView select_n_per_word(std::span<const ManifestEntry> entries, int n,
                              std::span<const std::string> words,
                              std::uint64_t seed);

DatasetView mix_replacement(std::span<const ManifestEntry> real_pool,
                            std::span<const ManifestEntry> synthetic_pool,
                            double fraction_real, std::uint64_t seed);

DatasetView mix_augmentation(std::span<const ManifestEntry> synthetic_pool,
                             std::span<const ManifestEntry> real_entries,
                             int n_real_per_word, std::uint64_t seed);

// Sorted unique labels of a pool.
std::vector<std::string> collect_words(std::span<const ManifestEntry> entries);

// Thread-safe path -> FeatureContext cache over load_wav + extract_log_mel +
// window_to_context.
class FeatureCache {
 public:
  explicit FeatureCache(FrontendConfig cfg = {}) : cfg_(cfg) {}
  const FeatureContext& get(const std::string& path);

 private:
  FrontendConfig cfg_;
  std::mutex mu_;
  std::unordered_map<std::string, FeatureContext> cache_;
};

// Materializes a view into training examples; label indices come from the
// given word order.
std::vector<AudioExample> materialize(const DatasetView& view,
                                      std::span<const std::string> words,
                                      FeatureCache& cache);
std::vector<AudioExample> materialize(std::span<const ManifestEntry> entries,
                                      std::span<const std::string> words,
                                      FeatureCache& cache);

}  // namespace kws

#endif
