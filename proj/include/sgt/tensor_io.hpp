#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgt/tensor.hpp"

namespace sgt::num {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Tensor stream format: one JSON header line per tensor
// ({"name":...,"shape":[...],"dtype":"f64"}), a blank line, then the raw
// little-endian float64 payloads concatenated in header order.
void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& is);

// File helpers; writes go through a temp file + rename so a crash never
// leaves a truncated checkpoint behind.
void write_tensors_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors_file(const std::filesystem::path& path);

// Atomic text-file write used for manifests, CSVs and dumps.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace sgt::num
