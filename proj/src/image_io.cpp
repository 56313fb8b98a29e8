#include "advs/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace advs {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw FormatError(path.string() + ": truncated header at offset " + std::to_string(start));
  return bytes.substr(start, pos - start);
}

long header_number(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  const std::size_t at = pos;
  const std::string tok = header_token(bytes, pos, path);
  if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }) || tok.size() > 9) {
    throw FormatError(path.string() + ": malformed header number '" + tok + "' near offset " + std::to_string(at));
  }
  return std::stol(tok);
}

Tensor read_netpbm(const std::filesystem::path& path, const char* magic, Index planes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  const std::string got = header_token(bytes, pos, path);
  if (got != magic) throw FormatError(path.string() + ": expected magic " + magic + ", found '" + got + "'");
  const long width = header_number(bytes, pos, path);
  const long height = header_number(bytes, pos, path);
  const long maxval = header_number(bytes, pos, path);
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": non-positive image extents");
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit samples (maxval 255) are supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(path.string() + ": missing separator after header at offset " + std::to_string(pos));
  }
  ++pos;

  const Index pixels = static_cast<Index>(width) * height;
  const std::size_t expected = static_cast<std::size_t>(pixels * planes);
  if (bytes.size() - pos < expected) {
    throw FormatError(path.string() + ": pixel data truncated at offset " + std::to_string(bytes.size()) +
                      ", expected " + std::to_string(expected) + " bytes after offset " + std::to_string(pos));
  }
  Tensor image(Shape{planes, height, width});
  // Interleaved samples on disk, planar in memory.
  for (Index p = 0; p < pixels; ++p) {
    for (Index c = 0; c < planes; ++c) {
      image[c * pixels + p] = static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(p * planes + c)]) / 255.0;
    }
  }
  return image;
}

void write_netpbm(const std::filesystem::path& path, const Tensor& image, const char* magic, Index planes) {
  if (image.rank() != 3 || image.dim(0) != planes) {
    throw ShapeError(std::string(magic) + " output expects " + std::to_string(planes) + "×H×W, got " +
                     shape_string(image.shape()));
  }
  const Index height = image.dim(1), width = image.dim(2), pixels = height * width;
  std::string bytes = std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(pixels * planes));
  for (Index p = 0; p < pixels; ++p) {
    for (Index c = 0; c < planes; ++c) bytes.push_back(static_cast<char>(quantize(image[c * pixels + p])));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Tensor read_ppm(const std::filesystem::path& path) { return read_netpbm(path, "P6", 3); }
Tensor read_pgm(const std::filesystem::path& path) { return read_netpbm(path, "P5", 1); }
void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_netpbm(path, image, "P6", 3); }
void write_pgm(const std::filesystem::path& path, const Tensor& image) { write_netpbm(path, image, "P5", 1); }

}  // namespace advs
