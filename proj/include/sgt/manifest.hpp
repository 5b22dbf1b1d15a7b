#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgt/synth.hpp"

namespace sgt::data {

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label = 0;
  std::optional<std::string> mask_path;  // absent for real samples
};

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

// Writes images (PPM) and patch-resolution masks (PGM) under dir and returns
// the manifest entries. File names carry the given prefix.
std::vector<ManifestEntry> save_samples(const std::filesystem::path& dir,
                                        const std::string& prefix,
                                        const std::vector<Sample>& samples);

// Loads images (and masks where present) back into samples. Mask tensors for
// entries without a mask are sized from the patch grid and left at zero.
std::vector<Sample> load_samples(const std::filesystem::path& manifest_path,
                                 std::size_t patch_size);

}  // namespace sgt::data
