#pragma once

#include <string>

#include "visemeforge/tensor.hpp"

namespace vf::io {

// 8-bit PNG round-trip for [C,H,W] tensors with values in [0,1].
// C=1 writes grayscale, C=3 writes RGB.
void write_png(const std::string& path, const Tensor& chw);
Tensor read_png(const std::string& path);

}  // namespace vf::io
