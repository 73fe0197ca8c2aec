#ifndef KWS_FRONTEND_HPP
#define KWS_FRONTEND_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace kws {

constexpr int kNumMelBins = 32;
constexpr int kContextFrames = 198;

struct FrontendConfig {
  int sample_rate_hz = 16000;
  int window_ms = 25;
  int hop_ms = 10;
  int fft_size = 512;
  int num_mel_bins = kNumMelBins;
  double fmin_hz = 60.0;
  double fmax_hz = 3800.0;
  double log_floor = -13.8155;
  double log_ceil = 0.0;

  int window_samples() const { return window_ms * sample_rate_hz / 1000; }
  int hop_samples() const { return hop_ms * sample_rate_hz / 1000; }
  void validate() const;  // throws std::invalid_argument on violation
};

struct FeatureFrame {
  std::array<std::uint8_t, kNumMelBins> values{};
};

// 198 x 32 grid of quantized log-mel bytes, the unit of model input.
struct FeatureContext {
  std::array<std::array<std::uint8_t, kNumMelBins>, kContextFrames> frames{};
};

double hz_to_mel(double f);

// Rows are FFT bins (fft_size/2 + 1), columns are mel filters. Triangular
// filters over 34 mel-equally-spaced edges between fmin and fmax.
std::vector<double> build_mel_filterbank(const FrontendConfig& cfg);

std::uint8_t quantize_value(double x, const FrontendConfig& cfg);

std::vector<FeatureFrame> extract_log_mel(std::span<const float> audio,
                                          const FrontendConfig& cfg);

}  // namespace kws

#endif
