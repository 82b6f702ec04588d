#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vf::io {

// Mono PCM16 WAV. Samples are doubles in [-1,1]; values outside are clipped.
void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);
std::pair<std::vector<double>, int> read_wav(const std::string& path);

}  // namespace vf::io
