#include "sigrec/dtw.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "sigrec/signature.hpp"

namespace sigrec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw: empty input sequence");
  const std::size_t d = a.front().size();
  for (const auto& v : a)
    if (v.size() != d) throw std::invalid_argument("dtw: dimension mismatch inside first sequence");
  for (const auto& v : b)
    if (v.size() != d) throw std::invalid_argument("dtw: dimension mismatch between sequences");
}

// Inclusive column range [lo[i], hi[i]] for each row i.
struct Window {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;

  static Window full(std::size_t n, std::size_t m) {
    return {std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, m - 1)};
  }
};

// Accumulated costs restricted to a window, stored row by row.
class BandedCosts {
public:
  explicit BandedCosts(const Window& w) : w_(w), offset_(w.lo.size() + 1, 0) {
    for (std::size_t i = 0; i < w.lo.size(); ++i) offset_[i + 1] = offset_[i] + (w.hi[i] - w.lo[i] + 1);
    data_.assign(offset_.back(), kInf);
  }

  double get(std::size_t i, std::size_t j) const {
    if (j < w_.lo[i] || j > w_.hi[i]) return kInf;
    return data_[offset_[i] + (j - w_.lo[i])];
  }
  void set(std::size_t i, std::size_t j, double v) { data_[offset_[i] + (j - w_.lo[i])] = v; }

private:
  const Window& w_;
  std::vector<std::size_t> offset_;
  std::vector<double> data_;
};

WarpingPath windowed_dtw(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                         const Window& window) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  BandedCosts acc(window);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = window.lo[i]; j <= window.hi[i]; ++j) {
      const double c = squared_distance(a[i], b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0 && j > 0) best = std::min(best, acc.get(i - 1, j - 1));
        if (j > 0) best = std::min(best, acc.get(i, j - 1));
        if (i > 0) best = std::min(best, acc.get(i - 1, j));
      }
      acc.set(i, j, c + best);
    }
  }

  WarpingPath path;
  path.total_cost = acc.get(n - 1, m - 1);
  if (!(path.total_cost < kInf)) throw std::logic_error("dtw: end cell unreachable inside window");

  std::size_t i = n - 1;
  std::size_t j = m - 1;
  path.pairs.emplace_back(i + 1, j + 1);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc.get(i - 1, j - 1);
      const double left = acc.get(i, j - 1);
      const double up = acc.get(i - 1, j);
      if (diag <= left && diag <= up) {
        --i;
        --j;
      } else if (left <= up) {
        --j;
      } else {
        --i;
      }
    }
    path.pairs.emplace_back(i + 1, j + 1);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

Series coarsen(std::span<const std::vector<double>> s) {
  Series out;
  out.reserve((s.size() + 1) / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    if (i + 1 < s.size()) {
      std::vector<double> v(s[i].size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.5 * (s[i][k] + s[i + 1][k]);
      out.push_back(std::move(v));
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// Projects a coarse path onto the fine grid and widens it by `radius` coarse cells.
Window project_window(const WarpingPath& coarse, std::size_t coarse_n, std::size_t coarse_m,
                      std::size_t n, std::size_t m, std::size_t radius) {
  Window w{std::vector<std::size_t>(n, m), std::vector<std::size_t>(n, 0)};
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (const auto& [ci1, cj1] : coarse.pairs) {
    const auto ci = static_cast<std::ptrdiff_t>(ci1 - 1);
    const auto cj = static_cast<std::ptrdiff_t>(cj1 - 1);
    const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, ci - r);
    const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(coarse_n) - 1, ci + r);
    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, cj - r);
    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(coarse_m) - 1, cj + r);
    const auto col_lo = static_cast<std::size_t>(2 * j0);
    const auto col_hi = std::min(m - 1, static_cast<std::size_t>(2 * j1 + 1));
    for (std::ptrdiff_t ii = i0; ii <= i1; ++ii) {
      for (std::size_t row = static_cast<std::size_t>(2 * ii);
           row <= static_cast<std::size_t>(2 * ii + 1) && row < n; ++row) {
        w.lo[row] = std::min(w.lo[row], col_lo);
        w.hi[row] = std::max(w.hi[row], col_hi);
      }
    }
  }
  return w;
}

WarpingPath fast_recursive(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                           std::size_t radius) {
  const std::size_t min_size = radius + 2;
  if (a.size() <= min_size || b.size() <= min_size)
    return windowed_dtw(a, b, Window::full(a.size(), b.size()));
  const Series ca = coarsen(a);
  const Series cb = coarsen(b);
  const WarpingPath coarse = fast_recursive(ca, cb, radius);
  const Window w = project_window(coarse, ca.size(), cb.size(), a.size(), b.size(), radius);
  return windowed_dtw(a, b, w);
}

}  // namespace

WarpingPath dtw_exact(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  check_inputs(a, b);
  return windowed_dtw(a, b, Window::full(a.size(), b.size()));
}

WarpingPath dtw_fast(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                     std::size_t radius) {
  check_inputs(a, b);
  return fast_recursive(a, b, radius);
}

CostMatrix accumulated_costs(std::span<const std::vector<double>> a,
                             std::span<const std::vector<double>> b) {
  check_inputs(a, b);
  CostMatrix cm{a.size(), b.size(), std::vector<double>(a.size() * b.size(), 0.0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double best = 0.0;
      if (i > 0 || j > 0) {
        best = kInf;
        if (i > 0 && j > 0) best = std::min(best, cm(i - 1, j - 1));
        if (j > 0) best = std::min(best, cm(i, j - 1));
        if (i > 0) best = std::min(best, cm(i - 1, j));
      }
      cm.entries[i * cm.cols + j] = squared_distance(a[i], b[j]) + best;
    }
  }
  return cm;
}

void write_cost_matrix_csv(std::ostream& os, const CostMatrix& costs) {
  for (std::size_t i = 0; i < costs.rows; ++i) {
    for (std::size_t j = 0; j < costs.cols; ++j) os << (j ? "," : "") << costs(i, j);
    os << '\n';
  }
}

std::vector<IndexPair> first_occurrence_map(const WarpingPath& path) {
  std::vector<IndexPair> out;
  for (const auto& [i, j] : path.pairs) {
    if (out.empty() || out.back().first != i) {
      out.emplace_back(i, j);
    } else if (j < out.back().second) {
      out.back().second = j;
    }
  }
  return out;
}

bool is_valid_warping_path(const WarpingPath& path, std::size_t n, std::size_t m) {
  const auto& p = path.pairs;
  if (p.empty() || p.front() != IndexPair{1, 1} || p.back() != IndexPair{n, m}) return false;
  for (std::size_t s = 1; s < p.size(); ++s) {
    const std::size_t di = p[s].first - p[s - 1].first;
    const std::size_t dj = p[s].second - p[s - 1].second;
    if (p[s].first < p[s - 1].first || p[s].second < p[s - 1].second) return false;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return path.total_cost >= 0.0;
}

}  // namespace sigrec
