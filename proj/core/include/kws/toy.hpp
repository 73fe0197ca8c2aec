#ifndef KWS_TOY_HPP
#define KWS_TOY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kws/data.hpp"

namespace kws {

// Procedurally generated stand-in corpus: each class is a tone-pair signature
// rendered in two acoustic variants ("real" and a domain-shifted "synthetic"),
// with per-example variation in onset, pitch, level, vibrato and noise.
struct ToyCorpusConfig {
  int num_classes = 8;
  int train_per_class = 200;       // real variant
  int test_per_class = 50;         // real variant
  int synthetic_per_class = 92;    // train split, synthetic variant
  std::uint64_t seed = 1;
};

// Writes WAVs under <dir>/wavs and a manifest at <dir>/manifest.csv;
// returns the manifest entries (paths relative to dir).
std::vector<ManifestEntry> gen_toy_corpus(const std::string& dir,
                                          const ToyCorpusConfig& cfg);

// Renders one clip without touching the filesystem (used by tests).
std::vector<float> render_toy_clip(int class_index, int num_classes,
                                   Source variant, std::uint64_t seed);

}  // namespace kws

#endif
