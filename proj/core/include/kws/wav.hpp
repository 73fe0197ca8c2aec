#ifndef KWS_WAV_HPP
#define KWS_WAV_HPP

#include <span>
#include <string>
#include <vector>

namespace kws {

// Reads RIFF/WAVE, PCM 16-bit, mono, 16 kHz. Samples scaled by 1/32768.
std::vector<float> load_wav(const std::string& path);

// Writes 16 kHz mono 16-bit PCM; samples clamped to [-1, 1].
void save_wav(const std::string& path, std::span<const float> samples);

}  // namespace kws

#endif
