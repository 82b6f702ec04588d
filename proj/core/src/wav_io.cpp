#include "visemeforge/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "visemeforge/errors.hpp"

namespace vf::io {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  if (sample_rate <= 0) throw InvalidArgument("write_wav: sample_rate must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(sample_rate));
  put_u32(os, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (double s : samples) {
    const double c = std::min(std::max(s, -1.0), 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(os, static_cast<std::uint16_t>(v));
  }
  if (!os) throw IoError("failed writing " + path);
}

std::pair<std::vector<double>, int> read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);

  char tag[5] = {0};
  is.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) throw IoError("not a RIFF file: " + path);
  get_u32(is);
  is.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) throw IoError("not a WAVE file: " + path);

  int sample_rate = 0;
  int bits = 0;
  int channels = 0;
  std::vector<double> samples;
  while (is.read(tag, 4)) {
    const std::uint32_t size = get_u32(is);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t fmt = get_u16(is);
      channels = get_u16(is);
      sample_rate = static_cast<int>(get_u32(is));
      get_u32(is);
      get_u16(is);
      bits = get_u16(is);
      if (fmt != 1 || channels != 1 || bits != 16)
        throw IoError("read_wav: only mono PCM16 is supported: " + path);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
    } else if (std::strncmp(tag, "data", 4) == 0) {
      const std::size_t n = size / 2;
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(get_u16(is));
        samples[i] = static_cast<double>(v) / 32767.0;
      }
      break;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (sample_rate == 0) throw IoError("read_wav: missing fmt chunk: " + path);
  return {std::move(samples), sample_rate};
}

}  // namespace vf::io
