#pragma once

#include <filesystem>

#include "advs/tensor.hpp"

// Binary portable pixmaps with 8-bit samples. Samples map to [0,1] by v/255
// on read; on write, values are clamped to [0,1] and rounded to the nearest
// 8-bit level.

namespace advs {

/// Reads a P6 file as a 3×H×W tensor.
Tensor read_ppm(const std::filesystem::path& path);
/// Reads a P5 file as a 1×H×W tensor.
Tensor read_pgm(const std::filesystem::path& path);

/// Writes a 3×H×W tensor as P6.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
/// Writes a 1×H×W tensor as P5.
void write_pgm(const std::filesystem::path& path, const Tensor& image);

/// The 8-bit level a [0,1] value is written as.
unsigned char quantize(double v);

}  // namespace advs
