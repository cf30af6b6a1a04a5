#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "polyfs/audio/buffer.hpp"

namespace polyfs {

enum class WavEncoding { kPcm16, kFloat32 };

namespace wav_detail {

inline uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}
inline uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace wav_detail

/// Decodes a mono RIFF/WAVE byte image: PCM 16/24/32-bit or IEEE float 32/64.
inline AudioBuffer decode_wav(const std::vector<uint8_t>& bytes, const std::string& name = "wav") {
  using namespace wav_detail;
  auto bad = [&](const std::string& why) { fail(ErrorKind::kFormat, name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = read_u32(chunk + 4);
    const size_t body = pos + 8;
    const size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) bad("short fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == 0xFFFE && size >= 26 && avail >= 26) {
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<size_t>(size, avail);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0) bad("missing fmt chunk");
  if (data == nullptr) bad("missing data chunk");
  if (channels != 1) bad("only mono audio is supported (got " + std::to_string(channels) + " channels)");
  if (rate == 0) bad("zero sample rate");

  const size_t width = bits / 8;
  if (width == 0) bad("zero sample width");
  const size_t n = data_size / width;
  std::vector<double> samples(n);
  if (format == 1 && bits == 16) {
    for (size_t i = 0; i < n; ++i) {
      samples[i] = static_cast<int16_t>(read_u16(data + 2 * i)) / 32768.0;
    }
  } else if (format == 1 && bits == 24) {
    for (size_t i = 0; i < n; ++i) {
      const uint8_t* p = data + 3 * i;
      int32_t v = int32_t(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      samples[i] = v / 8388608.0;
    }
  } else if (format == 1 && bits == 32) {
    for (size_t i = 0; i < n; ++i) {
      samples[i] = static_cast<int32_t>(read_u32(data + 4 * i)) / 2147483648.0;
    }
  } else if (format == 3 && bits == 32) {
    for (size_t i = 0; i < n; ++i) {
      const uint32_t u = read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      samples[i] = f;
    }
  } else if (format == 3 && bits == 64) {
    for (size_t i = 0; i < n; ++i) {
      const uint64_t u = uint64_t(read_u32(data + 8 * i)) | (uint64_t(read_u32(data + 8 * i + 4)) << 32);
      double d;
      std::memcpy(&d, &u, 8);
      samples[i] = d;
    }
  } else {
    bad("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
        " bits)");
  }
  for (double v : samples) {
    if (!std::isfinite(v)) bad("non-finite sample");
  }
  return {std::move(samples), static_cast<int>(rate)};
}

inline std::string encode_wav(const AudioBuffer& buf, WavEncoding enc = WavEncoding::kFloat32) {
  using namespace wav_detail;
  const bool is_float = enc == WavEncoding::kFloat32;
  const uint16_t bits = is_float ? 32 : 16;
  const uint32_t data_size = static_cast<uint32_t>(buf.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, is_float ? 3 : 1);
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(buf.sample_rate));
  put_u32(out, static_cast<uint32_t>(buf.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);
  for (double v : buf.samples) {
    if (is_float) {
      const float f = static_cast<float>(v);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    } else {
      const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
      put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(clipped * 32768.0))));
    }
  }
  return out;
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

inline void write_wav(const std::filesystem::path& path, const AudioBuffer& buf,
                      WavEncoding enc = WavEncoding::kFloat32) {
  const std::string bytes = encode_wav(buf, enc);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace polyfs
