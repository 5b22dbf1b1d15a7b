#include "sgt/patch_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "sgt/errors.hpp"

namespace sgt::graph {

PatchGrid make_grid(std::size_t image_h, std::size_t image_w, std::size_t patch) {
  if (patch == 0 || image_h == 0 || image_w == 0) {
    throw ConfigError("patch grid: sizes must be positive");
  }
  if (image_h % patch != 0 || image_w % patch != 0) {
    throw ConfigError("patch grid: image " + std::to_string(image_h) + "x" +
                      std::to_string(image_w) + " is not divisible by patch size " +
                      std::to_string(patch));
  }
  return PatchGrid{image_h, image_w, patch, image_h / patch, image_w / patch};
}

std::vector<num::Tensor> partition_image(const num::Tensor& image, std::size_t patch,
                                         PatchGrid* grid_out) {
  if (image.rank() != 3) {
    throw ShapeError("partition_image: expected H×W×C image, got " + image.shape_str());
  }
  const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  const PatchGrid grid = make_grid(h, w, patch);
  if (grid_out) *grid_out = grid;

  std::vector<num::Tensor> patches;
  patches.reserve(grid.count());
  for (std::size_t pr = 0; pr < grid.rows; ++pr) {
    for (std::size_t pc = 0; pc < grid.cols; ++pc) {
      num::Tensor p({patch, patch, c});
      for (std::size_t y = 0; y < patch; ++y) {
        const std::size_t src = ((pr * patch + y) * w + pc * patch) * c;
        std::copy(image.data() + src, image.data() + src + patch * c, p.data() + y * patch * c);
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

num::Tensor build_knn_adjacency(const PatchGrid& grid, std::size_t k) {
  const std::size_t n = grid.count();
  if (k < 1 || k > n - 1) {
    throw ConfigError("knn adjacency: K=" + std::to_string(k) + " outside [1, " +
                      std::to_string(n - 1) + "]");
  }
  num::Tensor a({n, n});
  std::vector<std::pair<double, std::size_t>> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [yi, xi] = grid.center(i);
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto [yj, xj] = grid.center(j);
      const double dy = yi - yj, dx = xi - xj;
      order[m++] = {dy * dy + dx * dx, j};
    }
    // Distances are exact in f64 (small integer arithmetic), so the
    // (distance, index) sort is fully deterministic.
    std::sort(order.begin(), order.end());
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t j = order[t].second;
      a.at(i, j) = 1.0;
      a.at(j, i) = 1.0;  // union symmetrization
    }
  }
  return a;
}

num::Tensor normalize_adjacency(const num::Tensor& a) {
  num::require_matrix(a, "normalize_adjacency");
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("normalize_adjacency: adjacency must be square");
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    deg[i] = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) deg[i] += a.at(i, j);
  }
  num::Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double atil = a.at(i, j) + (i == j ? 1.0 : 0.0);
      // Single sqrt of the exact integer product keeps the result symmetric
      // bit for bit and exact on perfect squares.
      if (atil != 0.0) out.at(i, j) = atil / std::sqrt(deg[i] * deg[j]);
    }
  }
  return out;
}

Graph assemble_graph(const num::Tensor& features, const num::Tensor& adjacency) {
  num::require_matrix(features, "assemble_graph features");
  num::require_matrix(adjacency, "assemble_graph adjacency");
  if (features.rows() != adjacency.rows()) {
    throw ShapeError("assemble_graph: feature rows " + features.shape_str() +
                     " do not match adjacency " + adjacency.shape_str());
  }
  Graph g;
  g.n = adjacency.rows();
  g.adjacency = adjacency;
  g.normalized = normalize_adjacency(adjacency);
  g.features = features;
  return g;
}

void write_graph_dump(std::ostream& os, const Graph& g, std::size_t k) {
  os << g.n << " " << k << "\n";
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) os << (g.adjacency.at(i, j) != 0.0 ? '1' : '0');
    os << "\n";
  }
  const std::size_t d = g.features.cols();
  char buf[32];
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.features.at(i, j));
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
}

}  // namespace sgt::graph
