#include "kws/toy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "kws/util.hpp"
#include "kws/wav.hpp"

namespace kws {

namespace {

constexpr int kSampleRate = 16000;
constexpr double kClipSeconds = 1.0;

struct ClassSignature {
  double r1;
  double r2;
};

// A class is an ordered pair of frequency ratios: each clip plays three tone
// segments at (base, base*r1, base*r2) with the base pitch randomized per
// example over a wide range. Absolute spectral position is therefore a
// nuisance variable; class identity lives in the interval pattern, which a
// model only generalizes over once it has seen many transpositions.
ClassSignature signature(int class_index, int num_classes) {
  if (num_classes > 12) {
    throw std::invalid_argument("toy corpus supports at most 12 classes");
  }
  static constexpr double steps[4] = {1.3, 1.7, 2.2, 2.85};
  const int i = class_index % 4;
  const int j = class_index / 4;
  return {steps[i], steps[(i + 1 + j) % 4]};
}

double gauss(Rng& rng) {
  // Box-Muller from the pinned uniform source
  double u1 = rng.next_double();
  while (u1 <= 1e-12) u1 = rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<float> render_toy_clip(int class_index, int num_classes,
                                   Source variant, std::uint64_t seed) {
  if (class_index < 0 || class_index >= num_classes) {
    throw std::invalid_argument("render_toy_clip: class index out of range");
  }
  Rng rng(seed);
  const ClassSignature sig = signature(class_index, num_classes);
  const bool synthetic = (variant == Source::synthetic);

  // base pitch: the transposition nuisance, drawn log-uniform from a wide
  // window. The window is weakly class-dependent (shifted by a quarter of the
  // global range across all classes) so a fresh model has an easy, shallow
  // cue to latch onto before it learns intervals; neighboring classes overlap
  // almost entirely, so the cue alone cannot separate them. Synthetic renders
  // cover a narrower band — one axis of the domain shift.
  const double lo = std::log(260.0), hi = std::log(820.0);
  const double span = hi - lo;
  const double shift =
      num_classes > 1
          ? 0.25 * span * class_index / static_cast<double>(num_classes - 1)
          : 0.0;
  const double base =
      synthetic ? std::exp(rng.uniform(std::log(380.0), std::log(650.0)))
                : std::exp(lo + shift + rng.uniform(0.0, 0.75 * span));
  const double ratios[3] = {1.0, sig.r1, sig.r2};
  double detune[3];
  for (double& d : detune) d = 1.0 + rng.uniform(-0.03, 0.03);

  const double onset = synthetic ? rng.uniform(0.1, 0.2)
                                 : rng.uniform(0.05, 0.3);
  const double total = synthetic ? rng.uniform(0.6, 0.7)
                                 : rng.uniform(0.55, 0.85);
  const double seg = total / 3.0;
  const double amp = synthetic ? 0.6 : rng.uniform(0.4, 0.9);
  const double vibrato_rate = rng.uniform(4.0, 7.0);
  const double vibrato_depth = synthetic ? 0.004 : 0.012;
  // broadband floor keeps every mel bin above the quantization floor
  const double noise_amp = synthetic ? 0.01 : rng.uniform(0.02, 0.05);
  // harmonic weights (fundamental, 2f, 3f); the synthetic timbre is hollow
  const double w[3] = {synthetic ? 0.6 : 1.0, synthetic ? 0.7 : 0.5,
                       synthetic ? 0.1 : 0.3};

  const int n = static_cast<int>(kSampleRate * kClipSeconds);
  std::vector<float> out(n, 0.0f);
  double phase[3] = {rng.uniform(0.0, 2.0 * std::numbers::pi),
                     rng.uniform(0.0, 2.0 * std::numbers::pi),
                     rng.uniform(0.0, 2.0 * std::numbers::pi)};
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    double env = 0.0;
    double freq = base;
    if (t >= onset && t <= onset + total) {
      const int k = std::min(2, static_cast<int>((t - onset) / seg));
      const double rel = (t - onset - k * seg) / seg;
      env = std::sin(std::numbers::pi * rel);  // smooth attack/decay per segment
      freq = base * ratios[k] * detune[k];
    }
    const double vib =
        1.0 + vibrato_depth *
                  std::sin(2.0 * std::numbers::pi * vibrato_rate * t);
    double s = 0.0;
    for (int p = 0; p < 3; ++p) {
      phase[p] += 2.0 * std::numbers::pi * (p + 1) * freq * vib / kSampleRate;
      s += w[p] * std::sin(phase[p]);
    }
    s = env * amp * s + noise_amp * gauss(rng);
    out[i] = static_cast<float>(s);
  }
  return out;
}

std::vector<ManifestEntry> gen_toy_corpus(const std::string& dir,
                                          const ToyCorpusConfig& cfg) {
  if (cfg.num_classes < 1) {
    throw std::invalid_argument("gen_toy_corpus: need at least one class");
  }
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "wavs");

  std::vector<ManifestEntry> entries;
  auto emit = [&](int cls, Source src, Split split, int index) {
    const std::uint64_t clip_seed =
        fnv1a(fnv1a(cfg.seed ^ kFnvOffset,
                    src == Source::real ? "real" : "synthetic", 4),
              &index, sizeof(index)) ^
        (static_cast<std::uint64_t>(cls) << 32) ^
        (split == Split::test ? 0x9e3779b97f4a7c15ull : 0);
    char name[64];
    std::snprintf(name, sizeof(name), "wavs/c%02d_%s_%s_%04d.wav", cls,
                  src == Source::real ? "real" : "syn",
                  split == Split::train ? "train" : "test", index);
    const std::string rel = name;
    save_wav((fs::path(dir) / rel).string(),
             render_toy_clip(cls, cfg.num_classes, src, clip_seed));
    char label[32];
    std::snprintf(label, sizeof(label), "word%02d", cls);
    entries.push_back({rel, label, src, split});
  };

  for (int cls = 0; cls < cfg.num_classes; ++cls) {
    for (int i = 0; i < cfg.train_per_class; ++i) {
      emit(cls, Source::real, Split::train, i);
    }
    for (int i = 0; i < cfg.test_per_class; ++i) {
      emit(cls, Source::real, Split::test, i);
    }
    for (int i = 0; i < cfg.synthetic_per_class; ++i) {
      emit(cls, Source::synthetic, Split::train, i);
    }
  }
  write_manifest((fs::path(dir) / "manifest.csv").string(), entries);
  return entries;
}

}  // namespace kws
