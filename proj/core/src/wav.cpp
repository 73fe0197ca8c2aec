#include "kws/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kws {

namespace {

constexpr int kSampleRate = 16000;

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("wav " + path + ": " + what);
}

}  // namespace

std::vector<float> load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail(path, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  std::vector<float> samples;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t chunk_len = rd_u32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > buf.size()) fail(path, "truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_len < 16) fail(path, "fmt chunk too short");
      const std::uint16_t format = rd_u16(buf.data() + body);
      const std::uint16_t channels = rd_u16(buf.data() + body + 2);
      const std::uint32_t rate = rd_u32(buf.data() + body + 4);
      const std::uint16_t bits = rd_u16(buf.data() + body + 14);
      if (format != 1) fail(path, "encoding must be PCM (format tag 1)");
      if (channels != 1) fail(path, "channels must be 1 (mono)");
      if (rate != kSampleRate) fail(path, "sample rate must be 16000 Hz");
      if (bits != 16) fail(path, "bits per sample must be 16");
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) fail(path, "data chunk before fmt chunk");
      if (chunk_len % 2 != 0) fail(path, "odd data chunk length");
      samples.resize(chunk_len / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::int16_t v = static_cast<std::int16_t>(
            rd_u16(buf.data() + body + 2 * i));
        samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return samples;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  fail(path, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

void save_wav(const std::string& path, std::span<const float> samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for write");
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  auto wr_u32 = [&os](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  auto wr_u16 = [&os](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  };
  os.write("RIFF", 4);
  wr_u32(36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wr_u32(16);
  wr_u16(1);   // PCM
  wr_u16(1);   // mono
  wr_u32(kSampleRate);
  wr_u32(kSampleRate * 2);  // byte rate
  wr_u16(2);   // block align
  wr_u16(16);  // bits
  os.write("data", 4);
  wr_u32(data_len);
  for (float s : samples) {
    const float clamped = std::clamp(s, -1.0f, 1.0f);
    int v = static_cast<int>(std::lrintf(clamped * 32768.0f));
    v = std::clamp(v, -32768, 32767);
    wr_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  if (!os) fail(path, "write failed");
}

}  // namespace kws
