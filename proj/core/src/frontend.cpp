#include "kws/frontend.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace kws {

void FrontendConfig::validate() const {
  if (sample_rate_hz <= 0 || window_ms <= 0 || hop_ms <= 0 || fft_size <= 0 ||
      num_mel_bins <= 0) {
    throw std::invalid_argument("FrontendConfig: sizes must be positive");
  }
  if (!(fmin_hz < fmax_hz && fmax_hz <= sample_rate_hz / 2.0)) {
    throw std::invalid_argument(
        "FrontendConfig: need fmin < fmax <= sample_rate/2");
  }
  if (fft_size < window_samples()) {
    throw std::invalid_argument("FrontendConfig: fft_size < window samples");
  }
  if (!(log_floor < log_ceil)) {
    throw std::invalid_argument("FrontendConfig: log_floor must be < log_ceil");
  }
}

double hz_to_mel(double f) {
  if (f < 0.0) throw std::domain_error("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

namespace {

// Iterative radix-2 FFT, in place. n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  }
  return w;
}

}  // namespace

std::vector<double> build_mel_filterbank(const FrontendConfig& cfg) {
  cfg.validate();
  const int bins = cfg.fft_size / 2 + 1;
  const int filters = cfg.num_mel_bins;
  const int edges = filters + 2;

  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edge(edges);
  for (int i = 0; i < edges; ++i) {
    edge[i] = mel_lo + (mel_hi - mel_lo) * i / (edges - 1);
  }

  // Require at least one FFT bin inside the band per filter on average.
  const double hz_per_bin =
      static_cast<double>(cfg.sample_rate_hz) / cfg.fft_size;
  const int bins_in_band = static_cast<int>((cfg.fmax_hz - cfg.fmin_hz) / hz_per_bin);
  if (bins_in_band < filters) {
    throw std::invalid_argument(
        "build_mel_filterbank: fewer FFT bins than filters in band");
  }

  std::vector<double> fb(static_cast<std::size_t>(bins) * filters, 0.0);
  for (int b = 0; b < bins; ++b) {
    const double f = b * hz_per_bin;
    if (f < cfg.fmin_hz || f > cfg.fmax_hz) continue;
    const double m = hz_to_mel(f);
    for (int k = 0; k < filters; ++k) {
      const double lo = edge[k], center = edge[k + 1], hi = edge[k + 2];
      double w = 0.0;
      if (m >= lo && m <= center && center > lo) {
        w = (m - lo) / (center - lo);
      } else if (m > center && m <= hi && hi > center) {
        w = (hi - m) / (hi - center);
      }
      fb[static_cast<std::size_t>(b) * filters + k] = w;
    }
  }
  return fb;
}

std::uint8_t quantize_value(double x, const FrontendConfig& cfg) {
  double u = (x - cfg.log_floor) / (cfg.log_ceil - cfg.log_floor);
  u = std::min(1.0, std::max(0.0, u));
  return static_cast<std::uint8_t>(std::floor(255.0 * u + 0.5));
}

std::vector<FeatureFrame> extract_log_mel(std::span<const float> audio,
                                          const FrontendConfig& cfg) {
  cfg.validate();
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  if (static_cast<int>(audio.size()) < win) return {};
  const int num_frames = (static_cast<int>(audio.size()) - win) / hop + 1;

  const std::vector<double> window = hann_window(win);
  double wsum = 0.0;
  for (double w : window) wsum += w;
  // Full-scale sinusoid peaks at (wsum/2)^2 in the raw power spectrum.
  const double power_norm = 1.0 / ((wsum / 2.0) * (wsum / 2.0));

  const std::vector<double> fb = build_mel_filterbank(cfg);
  const int bins = cfg.fft_size / 2 + 1;
  const int filters = cfg.num_mel_bins;

  std::vector<FeatureFrame> out(num_frames);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  std::vector<double> mel(filters);
  for (int fr = 0; fr < num_frames; ++fr) {
    const int off = fr * hop;
    for (int i = 0; i < win; ++i) {
      buf[i] = std::complex<double>(audio[off + i] * window[i], 0.0);
    }
    for (int i = win; i < cfg.fft_size; ++i) buf[i] = {0.0, 0.0};
    fft_inplace(buf);

    std::fill(mel.begin(), mel.end(), 0.0);
    for (int b = 0; b < bins; ++b) {
      const double p = std::norm(buf[b]) * power_norm;
      const double* fbrow = &fb[static_cast<std::size_t>(b) * filters];
      for (int k = 0; k < filters; ++k) mel[k] += p * fbrow[k];
    }
    for (int k = 0; k < filters; ++k) {
      out[fr].values[k] = quantize_value(std::log(mel[k] + 1e-6), cfg);
    }
  }
  return out;
}

}  // namespace kws
