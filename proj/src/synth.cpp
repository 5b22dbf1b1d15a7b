#include "sgt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sgt/errors.hpp"
#include "sgt/patch_graph.hpp"
#include "sgt/rng.hpp"

namespace sgt::data {

namespace {

using num::Rng;
using num::Tensor;

// Sum of 3..6 low-frequency sinusoids per channel, min-max normalized.
Tensor smooth_field(std::size_t size, Rng& rng) {
  Tensor img({size, size, 3});
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t c = 0; c < 3; ++c) {
    const int waves = static_cast<int>(rng.range(3, 6));
    std::vector<double> kx(waves), ky(waves), phase(waves), amp(waves);
    for (int wv = 0; wv < waves; ++wv) {
      // Integer cycle counts up to 3 per axis, never both zero.
      do {
        kx[wv] = static_cast<double>(rng.range(-3, 3));
        ky[wv] = static_cast<double>(rng.range(-3, 3));
      } while (kx[wv] == 0.0 && ky[wv] == 0.0);
      phase[wv] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      amp[wv] = rng.uniform(0.5, 1.5);
    }
    double lo = 1e300, hi = -1e300;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        double v = 0.0;
        for (int wv = 0; wv < waves; ++wv) {
          v += amp[wv] * std::sin(2.0 * std::numbers::pi *
                                      (kx[wv] * static_cast<double>(x) +
                                       ky[wv] * static_cast<double>(y)) *
                                      inv +
                                  phase[wv]);
        }
        img[(y * size + x) * 3 + c] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < size * size; ++i) {
      double& v = img[i * 3 + c];
      v = (v - lo) / span;
    }
  }
  return img;
}

// Grows a 4-connected patch region of the requested size by uniform frontier
// expansion. Candidate order is ascending patch index, so growth is
// deterministic for a given rng state.
Tensor grow_region(std::size_t grid, std::size_t target, Rng& rng) {
  Tensor mask({grid, grid});
  std::vector<std::uint8_t> in(grid * grid, 0);
  std::size_t start = rng.below(grid * grid);
  in[start] = 1;
  std::size_t count = 1;
  while (count < target) {
    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < grid * grid; ++i) {
      if (in[i]) continue;
      const std::size_t r = i / grid, c = i % grid;
      const bool adjacent = (r > 0 && in[i - grid]) || (r + 1 < grid && in[i + grid]) ||
                            (c > 0 && in[i - 1]) || (c + 1 < grid && in[i + 1]);
      if (adjacent) frontier.push_back(i);
    }
    in[frontier[rng.below(frontier.size())]] = 1;
    ++count;
  }
  for (std::size_t i = 0; i < in.size(); ++i) mask[i] = in[i] ? 1.0 : 0.0;
  return mask;
}

}  // namespace

num::Tensor gen_real_image(std::size_t image_size, std::uint64_t sample_seed) {
  Rng rng(sample_seed);
  return smooth_field(image_size, rng);
}

Sample gen_sample(const GenConfig& cfg, std::size_t index) {
  const std::uint64_t sample_seed = num::split_seed(cfg.seed, "sample/" + std::to_string(index));
  Rng rng(sample_seed);
  const std::size_t size = cfg.image_size;
  const std::size_t grid = size / cfg.patch_size;

  Sample s;
  s.image = smooth_field(size, rng);
  s.label = static_cast<int>(index % 2);
  s.mask = Tensor({grid, grid});
  if (s.label == 0) return s;

  // Manipulated region: 5–30% of patches, 4-connected.
  const std::size_t n_patches = grid * grid;
  const double coverage = rng.uniform(0.05, 0.30);
  const std::size_t target =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::round(coverage * n_patches)));
  s.mask = grow_region(grid, target, rng);

  // Pixel-level alpha: 1 inside the region, 0.5 on the 1-pixel inner boundary.
  const std::size_t ps = cfg.patch_size;
  std::vector<std::uint8_t> px(size * size, 0);
  for (std::size_t pr = 0; pr < grid; ++pr)
    for (std::size_t pc = 0; pc < grid; ++pc)
      if (s.mask.at(pr, pc) != 0.0)
        for (std::size_t y = 0; y < ps; ++y)
          for (std::size_t x = 0; x < ps; ++x) px[(pr * ps + y) * size + pc * ps + x] = 1;

  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      if (!px[y * size + x]) continue;
      const bool boundary = (y == 0 || !px[(y - 1) * size + x]) ||
                            (y + 1 == size || !px[(y + 1) * size + x]) ||
                            (x == 0 || !px[y * size + x - 1]) ||
                            (x + 1 == size || !px[y * size + x + 1]);
      const double alpha = boundary ? 0.5 : 1.0;
      for (std::size_t c = 0; c < 3; ++c) {
        double& v = s.image[(y * size + x) * 3 + c];
        const double noise = rng.uniform();  // high-frequency texture
        v = alpha * noise + (1.0 - alpha) * v;
      }
    }
  }
  return s;
}

std::vector<Sample> gen_dataset(const GenConfig& cfg) {
  if (cfg.count < 2 || cfg.count % 2 != 0) {
    throw ConfigError("gen_dataset: count must be even and >= 2 for balanced classes");
  }
  graph::make_grid(cfg.image_size, cfg.image_size, cfg.patch_size);  // validates divisibility
  std::vector<Sample> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) out.push_back(gen_sample(cfg, i));
  return out;
}

}  // namespace sgt::data
