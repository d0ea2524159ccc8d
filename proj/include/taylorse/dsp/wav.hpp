// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// RIFF/WAVE reader and writer for 16-bit PCM mono. Sample v maps to
// v / 32768; writing clamps to [-1, 1] and rounds to nearest.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "taylorse/dsp/waveform.hpp"

namespace taylorse::dsp {

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xFF));
  b.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace detail

inline double pcm16_to_double(std::int16_t v) { return static_cast<double>(v) / 32768.0; }

inline std::int16_t double_to_pcm16(double x) {
  const double s = std::nearbyint(std::clamp(x, -1.0, 1.0) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

// Reads a PCM16 mono file. expected_rate <= 0 accepts any rate.
inline Waveform read_wav(const std::filesystem::path& path,
                         int expected_rate = kDefaultSampleRate) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open WAV file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw DataError(where + "not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* h = buf.data() + pos;
    const std::size_t len = detail::le32(h + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, buf.size() - body);
    if (std::memcmp(h, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError(where + "truncated fmt chunk");
      format = detail::le16(buf.data() + body);
      channels = detail::le16(buf.data() + body + 2);
      rate = detail::le32(buf.data() + body + 4);
      bits = detail::le16(buf.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE: take the sub-format tag.
      if (format == 0xFFFE && avail >= 26) format = detail::le16(buf.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(h, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw DataError(where + "missing fmt chunk");
  if (!data) throw DataError(where + "missing data chunk");
  if (format != 1)
    throw DataError(where + "unsupported audio format " + std::to_string(format) +
                    " (only PCM is supported)");
  if (bits != 16)
    throw DataError(where + "unsupported bit depth " + std::to_string(bits) +
                    " (only 16-bit PCM is supported)");
  if (channels != 1)
    throw DataError(where + "expected mono audio, found " + std::to_string(channels) +
                    " channels");
  if (expected_rate > 0 && rate != static_cast<std::uint32_t>(expected_rate))
    throw DataError(where + "sample rate " + std::to_string(rate) + " Hz, expected " +
                    std::to_string(expected_rate) + " Hz (no resampling is done)");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = pcm16_to_double(static_cast<std::int16_t>(detail::le16(data + 2 * i)));
  return w;
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string b;
  b.reserve(44 + data_len);
  b += "RIFF";
  detail::put32(b, 36 + data_len);
  b += "WAVEfmt ";
  detail::put32(b, 16);
  detail::put16(b, 1);  // PCM
  detail::put16(b, 1);  // mono
  detail::put32(b, static_cast<std::uint32_t>(w.sample_rate));
  detail::put32(b, static_cast<std::uint32_t>(w.sample_rate) * 2);
  detail::put16(b, 2);
  detail::put16(b, 16);
  b += "data";
  detail::put32(b, data_len);
  for (double x : w.samples) detail::put16(b, static_cast<std::uint16_t>(double_to_pcm16(x)));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file " + path.string());
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw DataError("short write on " + path.string());
}

}  // namespace taylorse::dsp
