#include "sgrf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "sgrf/error.hpp"

namespace sgrf {

ImageBuffer::ImageBuffer(int w, int h, double fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw DimensionError("image dimensions must be non-negative");
  data.assign(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

void write_ppm(const ImageBuffer& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(),
                 [](double v) { return static_cast<char>(to_byte(v)); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

ImageBuffer read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (next_token(in) != "P6") throw FormatError(path.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (maxval != 255 || w <= 0 || h <= 0) throw FormatError(path.string() + ": unsupported PPM header");
  in.get();
  ImageBuffer image(w, h);
  std::vector<unsigned char> bytes(image.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError(path.string() + ": truncated");
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data[i] = bytes[i] / 255.0;
  return image;
}

}  // namespace sgrf
