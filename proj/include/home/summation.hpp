#pragma once

#include <cmath>
#include <cstddef>

namespace home {

// Neumaier's variant of Kahan summation. Exact for sums that fit in two
// doubles, and stable when terms vary widely in magnitude.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Pairwise (cascade) summation of a[i] * b[i]. Blocks of up to 64 products
// are summed with four interleaved accumulators; blocks are combined as a
// balanced binary tree, so the rounding error grows as O(log n).
inline double pairwise_dot(const double* a, const double* b, std::size_t n) {
  if (n <= 64) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += a[i] * b[i];
      s1 += a[i + 1] * b[i + 1];
      s2 += a[i + 2] * b[i + 2];
      s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
  }
  const std::size_t half = (n / 2 + 3) & ~std::size_t{3};
  return pairwise_dot(a, b, half) + pairwise_dot(a + half, b + half, n - half);
}

}  // namespace home
