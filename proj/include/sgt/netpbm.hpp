#pragma once

#include <filesystem>
#include <iosfwd>

#include "sgt/tensor.hpp"

namespace sgt::data {

// Binary netpbm I/O, 8-bit only. Images are H×W×3 (PPM P6) or H×W (PGM P5)
// tensors with values in [0,1]; writing quantizes to round(v·255), so a
// round trip moves a value by at most 1/255.

void write_ppm(std::ostream& os, const num::Tensor& image);
num::Tensor read_ppm(std::istream& is);
void write_pgm(std::ostream& os, const num::Tensor& gray);
num::Tensor read_pgm(std::istream& is);

void save_ppm(const std::filesystem::path& path, const num::Tensor& image);
num::Tensor load_ppm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const num::Tensor& gray);
num::Tensor load_pgm(const std::filesystem::path& path);

}  // namespace sgt::data
