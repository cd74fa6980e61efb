#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace sgrf {

/// Row-major RGB image with linear real-valued channels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, double fill = 0.0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t index(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * width + x); }
  double& at(int x, int y, int c) { return data[index(x, y) + c]; }
  double at(int x, int y, int c) const { return data[index(x, y) + c]; }
  bool same_shape(const ImageBuffer& other) const { return width == other.width && height == other.height; }
};

/// [0,1] -> 8-bit, clamped, round-half-up.
std::uint8_t to_byte(double v);

/// Binary PPM (P6, maxval 255).
void write_ppm(const ImageBuffer& image, const std::filesystem::path& path);
ImageBuffer read_ppm(const std::filesystem::path& path);

}  // namespace sgrf
