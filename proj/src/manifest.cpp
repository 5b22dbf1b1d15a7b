#include "sgt/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "sgt/errors.hpp"
#include "sgt/netpbm.hpp"
#include "sgt/tensor_io.hpp"

namespace sgt::data {

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json obj;
    obj["path"] = e.path;
    obj["label"] = e.label;
    if (e.mask_path) obj["mask_path"] = *e.mask_path;
    arr.push_back(std::move(obj));
  }
  num::write_text_file(path, arr.dump(2) + "\n");
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest '" + path.string() + "'");
  nlohmann::json arr = nlohmann::json::parse(is, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) {
    throw DataError("manifest '" + path.string() + "' is not a JSON array");
  }
  std::vector<ManifestEntry> out;
  for (const auto& obj : arr) {
    if (!obj.contains("path") || !obj.contains("label")) {
      throw DataError("manifest entry missing path/label in '" + path.string() + "'");
    }
    ManifestEntry e;
    e.path = obj["path"].get<std::string>();
    e.label = obj["label"].get<int>();
    if (obj.contains("mask_path")) e.mask_path = obj["mask_path"].get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> save_samples(const std::filesystem::path& dir,
                                        const std::string& prefix,
                                        const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  entries.reserve(samples.size());
  char name[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "%s_%05zu.ppm", prefix.c_str(), i);
    save_ppm(dir / name, samples[i].image);
    ManifestEntry e;
    e.path = name;
    e.label = samples[i].label;
    if (samples[i].label == 1) {
      std::snprintf(name, sizeof(name), "%s_%05zu_mask.pgm", prefix.c_str(), i);
      save_pgm(dir / name, samples[i].mask);
      e.mask_path = name;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Sample> load_samples(const std::filesystem::path& manifest_path,
                                 std::size_t patch_size) {
  const auto entries = load_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  std::vector<Sample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s;
    s.image = load_ppm(dir / e.path);
    s.label = e.label;
    if (e.mask_path) {
      s.mask = load_pgm(dir / *e.mask_path);
      for (std::size_t i = 0; i < s.mask.size(); ++i) s.mask[i] = s.mask[i] >= 0.5 ? 1.0 : 0.0;
    } else {
      const std::size_t grid = s.image.shape()[0] / patch_size;
      s.mask = num::Tensor({grid, grid});
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace sgt::data
