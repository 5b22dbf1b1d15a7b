#include "sgt/netpbm.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "sgt/errors.hpp"

namespace sgt::data {

namespace {

unsigned char quantize(double v) {
  double q = std::round(v * 255.0);
  if (q < 0.0) q = 0.0;
  if (q > 255.0) q = 255.0;
  return static_cast<unsigned char>(q);
}

[[noreturn]] void parse_fail(const std::istream& is, const std::string& msg) {
  const auto pos = is.rdbuf() ? static_cast<long>(const_cast<std::istream&>(is).tellg()) : -1;
  throw DataError("netpbm parse error at byte " + std::to_string(pos) + ": " + msg);
}

int read_header_int(std::istream& is) {
  // Skips whitespace and '#' comment lines, then reads a decimal integer.
  int ch = is.peek();
  while (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '#') {
    if (ch == '#') {
      std::string comment;
      std::getline(is, comment);
    } else {
      is.get();
    }
    ch = is.peek();
  }
  if (ch < '0' || ch > '9') parse_fail(is, "expected integer");
  int value = 0;
  while (ch >= '0' && ch <= '9') {
    is.get();
    value = value * 10 + (ch - '0');
    ch = is.peek();
  }
  return value;
}

void read_magic(std::istream& is, const char* expect) {
  char m[2];
  if (!is.read(m, 2)) parse_fail(is, "missing magic number");
  if (m[0] != expect[0] || m[1] != expect[1]) {
    parse_fail(is, std::string("expected ") + expect + ", got '" + m[0] + m[1] + "'");
  }
}

num::Tensor read_pixels(std::istream& is, std::size_t h, std::size_t w, std::size_t channels) {
  if (h == 0 || w == 0) parse_fail(is, "zero image dimension");
  // Single whitespace byte separates the header from the raster.
  is.get();
  std::vector<unsigned char> raw(h * w * channels);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (is.gcount() != static_cast<std::streamsize>(raw.size())) parse_fail(is, "truncated raster");
  num::Tensor t(channels == 1 ? std::vector<std::size_t>{h, w}
                              : std::vector<std::size_t>{h, w, channels});
  for (std::size_t i = 0; i < raw.size(); ++i) t[i] = static_cast<double>(raw[i]) / 255.0;
  return t;
}

}  // namespace

void write_ppm(std::ostream& os, const num::Tensor& image) {
  if (image.rank() != 3 || image.shape()[2] != 3) {
    throw ShapeError("write_ppm: expected H×W×3 image, got " + image.shape_str());
  }
  const std::size_t h = image.shape()[0], w = image.shape()[1];
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) raw[i] = quantize(image[i]);
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

num::Tensor read_ppm(std::istream& is) {
  read_magic(is, "P6");
  const int w = read_header_int(is);
  const int h = read_header_int(is);
  const int maxval = read_header_int(is);
  if (maxval != 255) parse_fail(is, "unsupported maxval " + std::to_string(maxval));
  return read_pixels(is, static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3);
}

void write_pgm(std::ostream& os, const num::Tensor& gray) {
  if (gray.rank() != 2) throw ShapeError("write_pgm: expected H×W image, got " + gray.shape_str());
  const std::size_t h = gray.shape()[0], w = gray.shape()[1];
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) raw[i] = quantize(gray[i]);
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

num::Tensor read_pgm(std::istream& is) {
  read_magic(is, "P5");
  const int w = read_header_int(is);
  const int h = read_header_int(is);
  const int maxval = read_header_int(is);
  if (maxval != 255) parse_fail(is, "unsupported maxval " + std::to_string(maxval));
  return read_pixels(is, static_cast<std::size_t>(h), static_cast<std::size_t>(w), 1);
}

namespace {

template <typename WriteFn>
void save_atomic(const std::filesystem::path& path, WriteFn&& fn) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open '" + tmp.string() + "' for writing");
    fn(os);
    if (!os) throw DataError("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void save_ppm(const std::filesystem::path& path, const num::Tensor& image) {
  save_atomic(path, [&](std::ostream& os) { write_ppm(os, image); });
}

num::Tensor load_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image '" + path.string() + "'");
  return read_ppm(is);
}

void save_pgm(const std::filesystem::path& path, const num::Tensor& gray) {
  save_atomic(path, [&](std::ostream& os) { write_pgm(os, gray); });
}

num::Tensor load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image '" + path.string() + "'");
  return read_pgm(is);
}

}  // namespace sgt::data
