#include "sigrec/signature.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sigrec {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

// Fills `seg` (full term layout) with the signature of one straight segment.
void fill_segment_levels(std::span<double> seg, std::span<const double> delta,
                         std::size_t depth) {
  const std::size_t d = delta.size();
  seg[0] = 1.0;
  if (depth == 0) return;
  std::copy(delta.begin(), delta.end(), seg.begin() + 1);
  std::size_t prev_off = 1;
  std::size_t prev_len = d;
  for (std::size_t m = 2; m <= depth; ++m) {
    const std::size_t off = prev_off + prev_len;
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t a = 0; a < prev_len; ++a) {
      const double base = seg[prev_off + a] * inv;
      double* out = seg.data() + off + a * d;
      for (std::size_t i = 0; i < d; ++i) out[i] = base * delta[i];
    }
    prev_off = off;
    prev_len *= d;
  }
}

// sig <- sig (x) seg, truncated. Levels are updated from the top down so that
// lower levels still hold their old values when they are read.
void multiply_in_place(std::span<double> sig, std::span<const double> seg, std::size_t dim,
                       std::size_t depth) {
  for (std::size_t m = depth; m >= 1; --m) {
    const std::size_t out_off = level_offset(dim, m);
    double* out = sig.data() + out_off;
    // j = 0 term: 1 (x) seg_m
    const std::size_t len_m = ipow(dim, m);
    for (std::size_t i = 0; i < len_m; ++i) out[i] += seg[out_off + i];
    for (std::size_t j = 1; j < m; ++j) {
      const std::size_t r = m - j;
      const std::size_t len_j = ipow(dim, j);
      const std::size_t len_r = ipow(dim, r);
      const double* left = sig.data() + level_offset(dim, j);
      const double* right = seg.data() + level_offset(dim, r);
      for (std::size_t a = 0; a < len_j; ++a) {
        const double la = left[a];
        if (la == 0.0) continue;
        double* dst = out + a * len_r;
        for (std::size_t b = 0; b < len_r; ++b) dst[b] += la * right[b];
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("trajectory dimension must be positive");
}

Trajectory::Trajectory(std::size_t dim, std::vector<double> flat)
    : dim_(dim), data_(std::move(flat)) {
  if (dim == 0) throw std::invalid_argument("trajectory dimension must be positive");
  if (data_.size() % dim != 0)
    throw std::invalid_argument("flat trajectory size is not a multiple of the dimension");
  require_finite(data_, "trajectory");
}

Trajectory Trajectory::from_points(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw std::invalid_argument("trajectory needs at least one point");
  Trajectory t(points.front().size());
  for (const auto& p : points) t.push_back(p);
  return t;
}

void Trajectory::push_back(std::span<const double> point) {
  if (point.size() != dim_)
    throw std::invalid_argument("point dimension " + std::to_string(point.size()) +
                                " does not match trajectory dimension " +
                                std::to_string(dim_));
  require_finite(point, "trajectory point");
  data_.insert(data_.end(), point.begin(), point.end());
}

// ---------------------------------------------------------------------------
// Sizes

std::size_t signature_length(std::size_t dim, std::size_t depth) {
  if (dim == 0) throw std::invalid_argument("signature dimension must be >= 1");
  if (depth == 0) throw std::invalid_argument("signature depth must be >= 1");
  std::size_t total = 0;
  std::size_t term = 1;
  for (std::size_t i = 0; i <= depth; ++i) {
    total += term;
    term *= dim;
  }
  return total;
}

std::size_t level_offset(std::size_t dim, std::size_t level) {
  std::size_t off = 0;
  std::size_t term = 1;
  for (std::size_t i = 0; i < level; ++i) {
    off += term;
    term *= dim;
  }
  return off;
}

// ---------------------------------------------------------------------------
// PathSignature

PathSignature::PathSignature(std::size_t dim, std::size_t depth)
    : dim_(dim), depth_(depth), terms_(signature_length(dim, depth), 0.0) {
  terms_[0] = 1.0;
}

PathSignature::PathSignature(std::size_t dim, std::size_t depth, std::vector<double> terms)
    : dim_(dim), depth_(depth), terms_(std::move(terms)) {
  if (terms_.size() != signature_length(dim, depth))
    throw std::invalid_argument("signature term count does not match (d, k)");
}

std::span<const double> PathSignature::level(std::size_t m) const {
  if (m > depth_) throw std::out_of_range("signature level exceeds depth");
  return std::span<const double>(terms_).subspan(level_offset(dim_, m), ipow(dim_, m));
}

std::span<double> PathSignature::level(std::size_t m) {
  if (m > depth_) throw std::out_of_range("signature level exceeds depth");
  return std::span<double>(terms_).subspan(level_offset(dim_, m), ipow(dim_, m));
}

double PathSignature::at(std::initializer_list<std::size_t> word) const {
  if (word.size() > depth_) throw std::out_of_range("multi-index longer than depth");
  std::size_t idx = 0;
  for (std::size_t i : word) {
    if (i >= dim_) throw std::out_of_range("multi-index entry exceeds dimension");
    idx = idx * dim_ + i;
  }
  return terms_[level_offset(dim_, word.size()) + idx];
}

// ---------------------------------------------------------------------------
// Operations

PathSignature segment_signature(std::span<const double> delta, std::size_t depth) {
  require_finite(delta, "segment increment");
  PathSignature sig(delta.size(), depth);
  fill_segment_levels(sig.terms(), delta, depth);
  return sig;
}

PathSignature concat(const PathSignature& a, const PathSignature& b) {
  if (a.dim() != b.dim() || a.depth() != b.depth())
    throw std::invalid_argument("concat: signatures differ in dimension or depth");
  const std::size_t d = a.dim();
  const std::size_t k = a.depth();
  PathSignature out(d, k);
  auto o = out.terms();
  o[0] = a[0] * b[0];
  for (std::size_t m = 1; m <= k; ++m) {
    auto dst = out.level(m);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t j = 0; j <= m; ++j) {
      auto left = a.level(j);
      auto right = b.level(m - j);
      for (std::size_t ia = 0; ia < left.size(); ++ia) {
        const double la = left[ia];
        double* row = dst.data() + ia * right.size();
        for (std::size_t ib = 0; ib < right.size(); ++ib) row[ib] += la * right[ib];
      }
    }
  }
  return out;
}

void extend_by_segment(PathSignature& sig, std::span<const double> delta) {
  if (delta.size() != sig.dim())
    throw std::invalid_argument("segment dimension does not match signature dimension");
  std::vector<double> seg(sig.size());
  fill_segment_levels(seg, delta, sig.depth());
  multiply_in_place(sig.terms(), seg, sig.dim(), sig.depth());
}

PathSignature batch_signature(const Trajectory& traj, std::size_t depth) {
  if (traj.empty()) throw std::invalid_argument("batch_signature: empty trajectory");
  SignatureStream stream(traj.dim(), depth);
  for (std::size_t i = 0; i < traj.size(); ++i) stream.extend(traj[i]);
  return stream.signature();
}

std::vector<PathSignature> prefix_signatures(const Trajectory& traj, std::size_t depth) {
  if (traj.empty()) throw std::invalid_argument("prefix_signatures: empty trajectory");
  std::vector<PathSignature> out;
  out.reserve(traj.size());
  SignatureStream stream(traj.dim(), depth);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    stream.extend(traj[i]);
    out.push_back(stream.signature());
  }
  return out;
}

// ---------------------------------------------------------------------------
// SignatureStream

SignatureStream::SignatureStream(std::size_t dim, std::size_t depth)
    : sig_(dim, depth), last_(dim, 0.0), delta_(dim, 0.0) {}

void SignatureStream::extend(std::span<const double> point) {
  if (point.size() != sig_.dim())
    throw std::invalid_argument("stream point dimension " + std::to_string(point.size()) +
                                " does not match stream dimension " +
                                std::to_string(sig_.dim()));
  require_finite(point, "stream point");
  if (count_ > 0) {
    for (std::size_t i = 0; i < point.size(); ++i) delta_[i] = point[i] - last_[i];
    extend_by_segment(sig_, delta_);
  }
  std::copy(point.begin(), point.end(), last_.begin());
  ++count_;
}

// ---------------------------------------------------------------------------
// Utilities

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " has a non-finite entry");
}

void write_signature(std::ostream& os, const PathSignature& sig) {
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "SIG " << sig.dim() << ' ' << sig.depth() << ' ' << sig.size() << '\n';
  for (std::size_t i = 0; i < sig.size(); ++i) os << (i ? " " : "") << sig[i];
  os << '\n';
  os.precision(old_prec);
}

PathSignature read_signature(std::istream& is) {
  std::string tag;
  std::size_t d = 0, k = 0, n = 0;
  if (!(is >> tag >> d >> k >> n) || tag != "SIG")
    throw std::runtime_error("read_signature: bad header");
  if (n != signature_length(d, k))
    throw std::runtime_error("read_signature: term count does not match (d, k)");
  std::vector<double> terms(n);
  for (auto& t : terms)
    if (!(is >> t)) throw std::runtime_error("read_signature: truncated term list");
  return PathSignature(d, k, std::move(terms));
}

}  // namespace sigrec
