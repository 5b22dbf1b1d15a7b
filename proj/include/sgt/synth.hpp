#pragma once

#include <cstdint>
#include <vector>

#include "sgt/tensor.hpp"

namespace sgt::data {

// One synthetic sample. Real images are smooth multi-sinusoid fields; fakes
// are a real image whose masked patch region is replaced by high-frequency
// noise texture, feathered one pixel at the region boundary.
struct Sample {
  num::Tensor image;  // H×W×3 in [0,1]
  int label = 0;      // 0 = real, 1 = fake
  num::Tensor mask;   // patch-grid rows×cols, 0/1; all-zero for reals
};

struct GenConfig {
  std::size_t count = 0;  // must be even: classes are balanced 50/50
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::uint64_t seed = 0;
};

// Deterministic given the seed; sample i draws from stream (seed, "sample/i").
// Even indices are real, odd indices fake.
std::vector<Sample> gen_dataset(const GenConfig& cfg);

// Single-sample generators, exposed for the harness tests.
num::Tensor gen_real_image(std::size_t image_size, std::uint64_t sample_seed);
Sample gen_sample(const GenConfig& cfg, std::size_t index);

}  // namespace sgt::data
