#include "sgt/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sgt/errors.hpp"
#include "sgt/rng.hpp"

namespace sgt::data {

namespace {

using num::Rng;
using num::Tensor;

constexpr double kSaturation[5] = {0.8, 0.6, 0.4, 0.2, 0.0};
constexpr double kContrast[5] = {0.85, 0.7, 0.55, 0.4, 0.25};
constexpr int kBlurKernel[5] = {3, 5, 7, 9, 11};
constexpr double kNoiseSigma[5] = {0.02, 0.04, 0.08, 0.12, 0.16};
constexpr int kPixelFactor[5] = {2, 4, 8, 16, 32};
constexpr int kBlockCount[5] = {2, 4, 8, 12, 16};
constexpr int kBlockSize = 8;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void require_image(const Tensor& t) {
  if (t.rank() != 3 || t.shape()[2] != 3) {
    throw ShapeError("corrupt: expected H×W×3 image, got " + t.shape_str());
  }
}

Tensor saturation(const Tensor& img, double factor) {
  Tensor out = img;
  for (std::size_t i = 0; i < img.size(); i += 3) {
    const double luma = 0.299 * img[i] + 0.587 * img[i + 1] + 0.114 * img[i + 2];
    for (std::size_t c = 0; c < 3; ++c) out[i + c] = clamp01(luma + factor * (img[i + c] - luma));
  }
  return out;
}

Tensor contrast(const Tensor& img, double factor) {
  Tensor out = img;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01(0.5 + factor * (img[i] - 0.5));
  return out;
}

Tensor box_blur(const Tensor& img, int kernel) {
  const std::size_t h = img.shape()[0], w = img.shape()[1];
  const int r = kernel / 2;
  auto clampi = [](long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); };
  // Separable passes with edge replication.
  Tensor mid({h, w, 3});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          const long xx = clampi(static_cast<long>(x) + d, 0, static_cast<long>(w) - 1);
          acc += img[(y * w + static_cast<std::size_t>(xx)) * 3 + c];
        }
        mid[(y * w + x) * 3 + c] = acc / kernel;
      }
  Tensor out({h, w, 3});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          const long yy = clampi(static_cast<long>(y) + d, 0, static_cast<long>(h) - 1);
          acc += mid[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        out[(y * w + x) * 3 + c] = clamp01(acc / kernel);
      }
  return out;
}

Tensor gaussian_noise(const Tensor& img, double sigma, std::uint64_t seed) {
  // The noise field is drawn independently of the level, so raising sigma
  // moves every pixel further along the same direction.
  Rng rng = Rng::stream(seed, "corrupt/noise");
  Tensor out = img;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp01(img[i] + sigma * rng.normal());
  return out;
}

Tensor pixelate(const Tensor& img, int factor) {
  const std::size_t h = img.shape()[0], w = img.shape()[1];
  const std::size_t f = static_cast<std::size_t>(factor);
  Tensor out({h, w, 3});
  for (std::size_t by = 0; by < h; by += f) {
    for (std::size_t bx = 0; bx < w; bx += f) {
      const std::size_t ey = std::min(by + f, h), ex = std::min(bx + f, w);
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t x = bx; x < ex; ++x) acc += img[(y * w + x) * 3 + c];
        acc /= static_cast<double>((ey - by) * (ex - bx));
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t x = bx; x < ex; ++x) out[(y * w + x) * 3 + c] = acc;
      }
    }
  }
  return out;
}

Tensor block_occlude(const Tensor& img, int count, std::uint64_t seed) {
  const std::size_t h = img.shape()[0], w = img.shape()[1];
  if (h < kBlockSize || w < kBlockSize) throw ConfigError("block occlusion needs >= 8x8 images");
  // All levels share one position sequence; level l blacks out a prefix of
  // it, so the occluded pixel set only grows with the level.
  Rng rng = Rng::stream(seed, "corrupt/block");
  Tensor out = img;
  for (int b = 0; b < count; ++b) {
    const std::size_t y0 = rng.below(h - kBlockSize + 1);
    const std::size_t x0 = rng.below(w - kBlockSize + 1);
    for (std::size_t y = y0; y < y0 + kBlockSize; ++y)
      for (std::size_t x = x0; x < x0 + kBlockSize; ++x)
        for (std::size_t c = 0; c < 3; ++c) out[(y * w + x) * 3 + c] = 0.0;
  }
  return out;
}

}  // namespace

Corruption corruption_from_string(const std::string& name) {
  if (name == "saturation") return Corruption::saturation;
  if (name == "contrast") return Corruption::contrast;
  if (name == "blur") return Corruption::blur;
  if (name == "noise") return Corruption::noise;
  if (name == "pixelation") return Corruption::pixelation;
  if (name == "block") return Corruption::block;
  throw ConfigError("unknown corruption kind '" + name + "'");
}

const char* corruption_name(Corruption kind) {
  switch (kind) {
    case Corruption::saturation: return "saturation";
    case Corruption::contrast: return "contrast";
    case Corruption::blur: return "blur";
    case Corruption::noise: return "noise";
    case Corruption::pixelation: return "pixelation";
    case Corruption::block: return "block";
  }
  throw ConfigError("unknown corruption kind");
}

num::Tensor corrupt(const num::Tensor& image, Corruption kind, int level, std::uint64_t seed) {
  require_image(image);
  if (level < 0 || level > kCorruptionLevels) {
    throw ConfigError("corruption level " + std::to_string(level) + " outside [0, 5]");
  }
  if (level == 0) return image;
  const int i = level - 1;
  switch (kind) {
    case Corruption::saturation: return saturation(image, kSaturation[i]);
    case Corruption::contrast: return contrast(image, kContrast[i]);
    case Corruption::blur: return box_blur(image, kBlurKernel[i]);
    case Corruption::noise: return gaussian_noise(image, kNoiseSigma[i], seed);
    case Corruption::pixelation: return pixelate(image, kPixelFactor[i]);
    case Corruption::block: return block_occlude(image, kBlockCount[i], seed);
  }
  throw ConfigError("unknown corruption kind");
}

}  // namespace sgt::data
