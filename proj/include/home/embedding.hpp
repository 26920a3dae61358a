#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "home/error.hpp"
#include "home/matrix.hpp"
#include "home/summation.hpp"

namespace home {

inline constexpr double kDefaultEpsilon = 1e-12;

// Raw projector outputs for one view: N samples (rows) by D features.
struct EmbeddingBatch {
  Matrix values;
  int view_id = 1;

  std::size_t samples() const { return values.rows(); }
  std::size_t features() const { return values.cols(); }
};

// Column-centered, unit-L2-norm embeddings. Columns whose centered norm is
// too small to normalize are zero and flagged degenerate.
struct NormalizedBatch {
  Matrix values;
  int view_id = 1;
  // sqrt(sum of squared centered values + epsilon), per column.
  std::vector<double> scale;
  std::vector<bool> degenerate;

  std::size_t samples() const { return values.rows(); }
  std::size_t features() const { return values.cols(); }
  std::size_t degenerate_count() const {
    std::size_t n = 0;
    for (bool d : degenerate) n += d ? 1 : 0;
    return n;
  }
};

namespace detail {

inline void check_batch(const Matrix& values, const char* what) {
  if (values.rows() < 2) {
    throw InvalidArgument(std::string(what) + ": need at least 2 samples, got " +
                          std::to_string(values.rows()));
  }
  if (values.cols() < 1) throw InvalidArgument(std::string(what) + ": no features");
  if (!values.all_finite()) {
    throw NonFiniteError(std::string(what) + ": batch contains non-finite values");
  }
}

inline double column_mean(const Matrix& m, std::size_t c) {
  CompensatedSum s;
  for (std::size_t r = 0; r < m.rows(); ++r) s.add(m(r, c));
  return s.value() / static_cast<double>(m.rows());
}

inline bool is_degenerate(double centered_norm, double epsilon) {
  return centered_norm <= std::sqrt(epsilon) * 10.0;
}

}  // namespace detail

inline NormalizedBatch normalize(const EmbeddingBatch& batch,
                                 double epsilon = kDefaultEpsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("normalize: epsilon must be positive");
  detail::check_batch(batch.values, "normalize");
  const std::size_t n = batch.samples();
  const std::size_t d = batch.features();

  NormalizedBatch out{Matrix(n, d), batch.view_id, std::vector<double>(d, 0.0),
                      std::vector<bool>(d, false)};
  std::vector<double> centered(n);
  for (std::size_t c = 0; c < d; ++c) {
    const double mean = detail::column_mean(batch.values, c);
    CompensatedSum sq;
    for (std::size_t r = 0; r < n; ++r) {
      centered[r] = batch.values(r, c) - mean;
      sq.add(centered[r] * centered[r]);
    }
    const double ss = sq.value();
    out.scale[c] = std::sqrt(ss + epsilon);
    if (detail::is_degenerate(std::sqrt(ss), epsilon)) {
      out.degenerate[c] = true;
      continue;
    }
    for (std::size_t r = 0; r < n; ++r) out.values(r, c) = centered[r] / out.scale[c];
  }
  return out;
}

// Given dL/dẑ, returns dL/dz. For column c with ẑ = (z - mean) / s:
//   dL/dc = (g - ẑ (ẑ . g)) / s,   dL/dz = dL/dc - mean(dL/dc).
// Degenerate columns have a constant (zero) output and get zero gradient.
inline Matrix normalize_backward(const NormalizedBatch& norm, const Matrix& upstream) {
  norm.values.require_same_shape(upstream, "normalize_backward");
  const std::size_t n = norm.samples();
  const std::size_t d = norm.features();
  Matrix grad(n, d);
  std::vector<double> gc(n);
  for (std::size_t c = 0; c < d; ++c) {
    if (norm.degenerate[c]) continue;
    CompensatedSum dot;
    for (std::size_t r = 0; r < n; ++r) dot.add(norm.values(r, c) * upstream(r, c));
    const double proj = dot.value();
    const double inv_scale = 1.0 / norm.scale[c];
    CompensatedSum mean;
    for (std::size_t r = 0; r < n; ++r) {
      gc[r] = (upstream(r, c) - norm.values(r, c) * proj) * inv_scale;
      mean.add(gc[r]);
    }
    const double mu = mean.value() / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) grad(r, c) = gc[r] - mu;
  }
  return grad;
}

inline Matrix normalize_backward(const EmbeddingBatch& batch, const Matrix& upstream,
                                 double epsilon = kDefaultEpsilon) {
  batch.values.require_same_shape(upstream, "normalize_backward");
  const NormalizedBatch norm = normalize(batch, epsilon);
  return normalize_backward(norm, upstream);
}

}  // namespace home
