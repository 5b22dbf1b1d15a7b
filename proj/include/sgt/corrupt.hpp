#pragma once

#include <cstdint>
#include <string>

#include "sgt/tensor.hpp"

namespace sgt::data {

enum class Corruption { saturation, contrast, blur, noise, pixelation, block };

Corruption corruption_from_string(const std::string& name);
const char* corruption_name(Corruption kind);
inline constexpr int kCorruptionLevels = 5;
inline constexpr int kCorruptionKinds = 6;

// Applies a corruption at the given intensity level. Level 0 returns the
// input bit-exactly; levels 1..5 escalate per fixed parameter tables. The
// seed drives the stochastic kinds (noise, block occlusion); for a fixed
// seed the per-pixel distortion is non-decreasing in level. Output in [0,1].
num::Tensor corrupt(const num::Tensor& image, Corruption kind, int level, std::uint64_t seed);

}  // namespace sgt::data
