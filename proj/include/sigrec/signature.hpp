#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

namespace sigrec {

/// Ordered sequence of d-dimensional states, stored row-major.
class Trajectory {
public:
  Trajectory() = default;
  explicit Trajectory(std::size_t dim);
  Trajectory(std::size_t dim, std::vector<double> flat);

  static Trajectory from_points(const std::vector<std::vector<double>>& points);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> point);
  const std::vector<double>& flat() const noexcept { return data_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Number of terms of a depth-k signature over R^d: 1 + d + d^2 + ... + d^k.
/// Throws std::invalid_argument for d == 0 or k == 0.
std::size_t signature_length(std::size_t dim, std::size_t depth);

/// Offset of the first level-m term inside the flat term vector.
std::size_t level_offset(std::size_t dim, std::size_t level);

/// Truncated path signature. Terms are level-major; inside a level the
/// multi-indices run in lexicographic order, so term (i1,...,im) of level m
/// sits at level_offset(d, m) + sum_l i_l * d^(m-l) (0-based indices).
class PathSignature {
public:
  /// The trivial signature [1, 0, ..., 0].
  PathSignature(std::size_t dim, std::size_t depth);
  PathSignature(std::size_t dim, std::size_t depth, std::vector<double> terms);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return terms_.size(); }

  std::span<const double> terms() const noexcept { return terms_; }
  std::span<double> terms() noexcept { return terms_; }
  std::span<const double> level(std::size_t m) const;
  std::span<double> level(std::size_t m);

  double operator[](std::size_t i) const { return terms_[i]; }

  /// Term for a 0-based multi-index; an empty word returns the level-0 term.
  double at(std::initializer_list<std::size_t> word) const;

  const std::vector<double>& values() const noexcept { return terms_; }
  std::vector<double> release() && { return std::move(terms_); }

  friend bool operator==(const PathSignature&, const PathSignature&) = default;

private:
  std::size_t dim_;
  std::size_t depth_;
  std::vector<double> terms_;
};

/// Signature of the straight segment with the given increment: level m is
/// the m-fold tensor power of delta divided by m!.
PathSignature segment_signature(std::span<const double> delta, std::size_t depth);

/// Truncated tensor product (Chen's identity). Throws std::invalid_argument on
/// dimension or depth mismatch.
PathSignature concat(const PathSignature& a, const PathSignature& b);

/// In-place right multiplication by the signature of a single segment.
void extend_by_segment(PathSignature& sig, std::span<const double> delta);

/// Signature of the piecewise-linear interpolation of the trajectory.
PathSignature batch_signature(const Trajectory& traj, std::size_t depth);

/// [sig(traj[0..0]), sig(traj[0..1]), ..., sig(traj[0..n-1])].
std::vector<PathSignature> prefix_signatures(const Trajectory& traj, std::size_t depth);

/// Incremental signature of a growing point sequence. Single writer.
class SignatureStream {
public:
  SignatureStream(std::size_t dim, std::size_t depth);

  void extend(std::span<const double> point);

  const PathSignature& signature() const noexcept { return sig_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return sig_.dim(); }
  std::size_t depth() const noexcept { return sig_.depth(); }
  std::span<const double> last_point() const noexcept { return last_; }

private:
  PathSignature sig_;
  std::vector<double> last_;
  std::vector<double> delta_;
  std::size_t count_ = 0;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Throws std::invalid_argument if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

/// Text form: "SIG <d> <k> <n>" followed by n terms, written with enough
/// digits to round-trip exactly.
void write_signature(std::ostream& os, const PathSignature& sig);
PathSignature read_signature(std::istream& is);

}  // namespace sigrec
