#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace sigrec {

using Series = std::vector<std::vector<double>>;
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Alignment between two sequences. Pairs are 1-based, start at (1,1) and
/// end at (n,m); every step advances i, j or both by one.
struct WarpingPath {
  std::vector<IndexPair> pairs;
  double total_cost = 0.0;
};

/// Accumulated squared-Euclidean DTW costs, row-major n x m.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

/// Globally optimal DTW under squared Euclidean pointwise cost. Backtracking
/// prefers the diagonal step, then the step that advanced j, then i.
/// Throws std::invalid_argument on empty input or dimension mismatch.
WarpingPath dtw_exact(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

/// Coarsen/project/refine approximation (FastDTW). Falls back to the exact
/// solver once either sequence is no longer than radius + 2, so a radius of
/// at least max(|a|, |b|) reproduces dtw_exact.
WarpingPath dtw_fast(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                     std::size_t radius = 1);

CostMatrix accumulated_costs(std::span<const std::vector<double>> a,
                             std::span<const std::vector<double>> b);
void write_cost_matrix_csv(std::ostream& os, const CostMatrix& costs);

/// For every first index i (1..n) the smallest j paired with it, as (i, j).
std::vector<IndexPair> first_occurrence_map(const WarpingPath& path);

/// Boundary, monotonicity and unit-step checks.
bool is_valid_warping_path(const WarpingPath& path, std::size_t n, std::size_t m);

}  // namespace sigrec
