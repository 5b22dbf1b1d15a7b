#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "sgt/tensor.hpp"

namespace sgt::graph {

// Fixed row-major partition geometry of an image into square patches.
// Patch i occupies grid cell (i / cols, i % cols).
struct PatchGrid {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t patch = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t count() const { return rows * cols; }
  // Patch center in pixel units.
  std::pair<double, double> center(std::size_t i) const {
    const double r = static_cast<double>(i / cols);
    const double c = static_cast<double>(i % cols);
    const double s = static_cast<double>(patch);
    return {(r + 0.5) * s, (c + 0.5) * s};
  }
};

// Throws ConfigError if the image dimensions are not multiples of patch.
PatchGrid make_grid(std::size_t image_h, std::size_t image_w, std::size_t patch);

// Splits an H×W×C image into N s×s×C patch tensors in row-major patch order.
// The patches tile the image exactly.
std::vector<num::Tensor> partition_image(const num::Tensor& image, std::size_t patch,
                                         PatchGrid* grid_out = nullptr);

// K-nearest-neighbor adjacency over patch centers (Euclidean distance, ties
// broken by ascending patch index), symmetrized by union. Zero diagonal.
num::Tensor build_knn_adjacency(const PatchGrid& grid, std::size_t k);

// Â = D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ᵢᵢ = Σⱼ(A+I)ᵢⱼ.
num::Tensor normalize_adjacency(const num::Tensor& a);

struct Graph {
  std::size_t n = 0;
  num::Tensor adjacency;   // A: N×N booleans stored as 0/1, zero diagonal
  num::Tensor normalized;  // Â
  num::Tensor features;    // F: N×D, rows aligned with patch order
};

Graph assemble_graph(const num::Tensor& features, const num::Tensor& adjacency);

// Text dump: "N K" line, N adjacency-row bitstrings, N feature rows.
void write_graph_dump(std::ostream& os, const Graph& g, std::size_t k);

}  // namespace sgt::graph
