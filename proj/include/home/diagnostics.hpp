#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "home/embedding.hpp"
#include "home/error.hpp"
#include "home/matrix.hpp"
#include "home/moments.hpp"
#include "home/rng.hpp"

namespace home {

// ---------------------------------------------------------------------------
// Linear probe: multinomial logistic regression on frozen representations,
// full-batch gradient descent, fixed iteration budget.
// ---------------------------------------------------------------------------

struct ProbeConfig {
  int iterations = 500;
  double lr = 0.1;
  // z-score features with training-split statistics before fitting.
  bool standardize = true;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  Matrix weights;             // classes x features
  std::vector<double> bias;   // classes
};

namespace detail {

inline int class_count(std::span<const int> labels) {
  int c = 0;
  for (int y : labels) {
    if (y < 0) throw InvalidArgument("linear_probe: negative label");
    c = std::max(c, y + 1);
  }
  return c;
}

inline void softmax_rows(Matrix& logits) {
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : row) v /= s;
  }
}

}  // namespace detail

inline ProbeResult linear_probe(const Matrix& train_x, std::span<const int> train_y,
                                const Matrix& test_x, std::span<const int> test_y,
                                const ProbeConfig& cfg = {}) {
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size()) {
    throw ShapeError("linear_probe: features and labels disagree");
  }
  if (train_x.cols() != test_x.cols()) throw ShapeError("linear_probe: feature width mismatch");
  if (train_x.rows() == 0 || test_x.rows() == 0) throw InvalidArgument("linear_probe: empty split");
  const int classes = std::max(detail::class_count(train_y), detail::class_count(test_y));
  {
    std::vector<bool> seen(static_cast<std::size_t>(classes), false);
    for (int y : train_y) seen[static_cast<std::size_t>(y)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2) {
      throw InvalidArgument("linear_probe: training labels contain a single class");
    }
  }
  const std::size_t n = train_x.rows();
  const std::size_t f = train_x.cols();
  const auto c = static_cast<std::size_t>(classes);

  std::vector<double> mean(f, 0.0), inv_std(f, 1.0);
  if (cfg.standardize) {
    for (std::size_t k = 0; k < f; ++k) {
      CompensatedSum s;
      for (std::size_t r = 0; r < n; ++r) s.add(train_x(r, k));
      mean[k] = s.value() / static_cast<double>(n);
      CompensatedSum sq;
      for (std::size_t r = 0; r < n; ++r) {
        const double d = train_x(r, k) - mean[k];
        sq.add(d * d);
      }
      const double sd = std::sqrt(sq.value() / static_cast<double>(n));
      inv_std[k] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
  }
  auto prepare = [&](const Matrix& x) {
    Matrix out(x.rows(), f);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t k = 0; k < f; ++k) out(r, k) = (x(r, k) - mean[k]) * inv_std[k];
    return out;
  };
  const Matrix xtr = cfg.standardize ? prepare(train_x) : train_x;
  const Matrix xte = cfg.standardize ? prepare(test_x) : test_x;

  ProbeResult res;
  res.weights = Matrix(c, f);
  res.bias.assign(c, 0.0);
  res.train_size = n;
  res.test_size = test_x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < cfg.iterations; ++it) {
    Matrix p = matmul_nt(xtr, res.weights);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < c; ++k) p(r, k) += res.bias[k];
    detail::softmax_rows(p);
    for (std::size_t r = 0; r < n; ++r) p(r, static_cast<std::size_t>(train_y[r])) -= 1.0;
    const Matrix gw = matmul_tn(p, xtr);
    for (std::size_t k = 0; k < c; ++k) {
      double gb = 0.0;
      for (std::size_t r = 0; r < n; ++r) gb += p(r, k);
      res.bias[k] -= cfg.lr * gb * inv_n;
      auto wrow = res.weights.row(k);
      const auto grow = gw.row(k);
      for (std::size_t j = 0; j < f; ++j) wrow[j] -= cfg.lr * grow[j] * inv_n;
    }
  }

  Matrix logits = matmul_nt(xte, res.weights);
  std::vector<std::size_t> correct(c, 0), total(c, 0);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < xte.rows(); ++r) {
    auto row = logits.row(r);
    for (std::size_t k = 0; k < c; ++k) row[k] += res.bias[k];
    const auto pred = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
    const auto y = static_cast<std::size_t>(test_y[r]);
    ++total[y];
    if (pred == y) {
      ++correct[y];
      ++hits;
    }
  }
  res.accuracy = static_cast<double>(hits) / static_cast<double>(xte.rows());
  for (std::size_t k = 0; k < c; ++k) {
    res.per_class_accuracy.push_back(
        total[k] ? static_cast<double>(correct[k]) / static_cast<double>(total[k]) : 0.0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Plug-in total correlation of a few small-alphabet discrete variables:
//   TC = sum_d H(Z_d) - H(Z_1, ..., Z_D), natural log.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxTcVariables = 4;
inline constexpr int kMaxTcAlphabet = 8;

struct TCEstimate {
  double value = 0.0;  // nats
  std::size_t variables = 0;
  std::size_t samples = 0;
  int alphabet = 0;
};

namespace detail {

inline double plugin_entropy(const std::vector<std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) * inv;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

// rows: N samples of D_tc variables, each value in [0, 8).
inline TCEstimate total_correlation_discrete(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw InvalidArgument("total_correlation: empty input");
  const std::size_t d = rows.front().size();
  if (d == 0 || d > kMaxTcVariables) {
    throw InvalidArgument("total_correlation: need 1.." + std::to_string(kMaxTcVariables) +
                          " variables");
  }
  std::size_t joint_size = 1;
  for (std::size_t k = 0; k < d; ++k) joint_size *= kMaxTcAlphabet;
  std::vector<std::size_t> joint(joint_size, 0);
  std::vector<std::vector<std::size_t>> marginal(d, std::vector<std::size_t>(kMaxTcAlphabet, 0));
  int alphabet = 0;
  for (const auto& r : rows) {
    if (r.size() != d) throw ShapeError("total_correlation: ragged rows");
    std::size_t code = 0;
    for (std::size_t k = 0; k < d; ++k) {
      if (r[k] < 0 || r[k] >= kMaxTcAlphabet) {
        throw InvalidArgument("total_correlation: value outside alphabet [0, 8)");
      }
      alphabet = std::max(alphabet, r[k] + 1);
      ++marginal[k][static_cast<std::size_t>(r[k])];
      code = code * kMaxTcAlphabet + static_cast<std::size_t>(r[k]);
    }
    ++joint[code];
  }
  const std::size_t n = rows.size();
  double sum_marginal = 0.0;
  for (const auto& m : marginal) sum_marginal += detail::plugin_entropy(m, n);
  return {sum_marginal - detail::plugin_entropy(joint, n), d, n, alphabet};
}

inline double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("mutual_information: length mismatch");
  std::vector<std::vector<int>> rows(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) rows[i] = {a[i], b[i]};
  return total_correlation_discrete(rows).value;
}

// Z3 = Z1 xor Z2 with fair independent bits: pairwise independent but
// mutually dependent. TC = log 2 while every pairwise MI is 0.
struct XorDiagnostic {
  std::size_t samples = 0;
  std::array<double, 3> pairwise_mi{};  // (1,2), (1,3), (2,3)
  double total_correlation = 0.0;
  double max_pairwise_mi() const {
    return *std::max_element(pairwise_mi.begin(), pairwise_mi.end());
  }
};

inline std::vector<std::vector<int>> xor_triple_samples(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x0A0BULL});
  std::vector<std::vector<int>> rows(n);
  for (auto& r : rows) {
    const int a = static_cast<int>(rng() >> 63);
    const int b = static_cast<int>(rng() >> 63);
    r = {a, b, a ^ b};
  }
  return rows;
}

inline XorDiagnostic xor_diagnostic(std::size_t n, std::uint64_t seed) {
  const auto rows = xor_triple_samples(n, seed);
  std::array<std::vector<int>, 3> cols;
  for (const auto& r : rows)
    for (std::size_t k = 0; k < 3; ++k) cols[k].push_back(r[k]);
  XorDiagnostic out;
  out.samples = n;
  out.pairwise_mi = {mutual_information(cols[0], cols[1]), mutual_information(cols[0], cols[2]),
                     mutual_information(cols[1], cols[2])};
  out.total_correlation = total_correlation_discrete(rows).value;
  return out;
}

// ---------------------------------------------------------------------------
// Moment audit: normalize a batch and summarize |mixed moment| per order.
// ---------------------------------------------------------------------------

struct OrderSummary {
  int order = 0;
  std::size_t tuples = 0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  // Decade histogram of |m|: bin 0 is |m| < 1e-15, bin k (1..15) covers
  // [10^(k-16), 10^(k-15)), the last bin is |m| >= 1.
  std::vector<std::size_t> histogram;
};

inline constexpr std::size_t kAuditBins = 17;

inline std::size_t audit_bin(double a) {
  if (a < 1e-15) return 0;
  if (a >= 1.0) return kAuditBins - 1;
  const auto decade = static_cast<long>(std::floor(std::log10(a)));  // -15..-1
  return static_cast<std::size_t>(std::clamp(decade + 16, 1L, 15L));
}

struct MomentAudit {
  MomentReport report;
  std::vector<OrderSummary> orders;

  const OrderSummary& for_order(int k) const {
    for (const auto& o : orders)
      if (o.order == k) return o;
    throw InvalidArgument("moment audit: order " + std::to_string(k) + " not audited");
  }
};

inline MomentAudit summarize_report(MomentReport report) {
  MomentAudit audit;
  for (int k : report.spec.orders) {
    OrderSummary s;
    s.order = k;
    s.histogram.assign(kAuditBins, 0);
    CompensatedSum sum;
    for (const auto& e : report.entries) {
      if (static_cast<int>(e.tuple.order()) != k) continue;
      const double a = std::abs(e.value);
      ++s.tuples;
      s.max_abs = std::max(s.max_abs, a);
      sum.add(a);
      ++s.histogram[audit_bin(a)];
    }
    s.mean_abs = s.tuples ? sum.value() / static_cast<double>(s.tuples) : 0.0;
    audit.orders.push_back(std::move(s));
  }
  audit.report = std::move(report);
  return audit;
}

// Self moments of one raw batch (rows = samples).
inline MomentAudit moment_audit(const Matrix& raw, const MomentSpec& spec,
                                double epsilon = kDefaultEpsilon) {
  const NormalizedBatch norm = normalize(EmbeddingBatch{raw, 1}, epsilon);
  return summarize_report(moment_report(norm, spec));
}

// CSV: order,tuples,max_abs,mean_abs
inline void write_audit_summary_csv(const MomentAudit& audit, std::ostream& os) {
  os << "order,tuples,max_abs,mean_abs\n";
  char buf[128];
  for (const auto& s : audit.orders) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g\n", s.order, s.tuples, s.max_abs,
                  s.mean_abs);
    os << buf;
  }
}

// CSV: order,bin_lo,bin_hi,count (decade bins of |m|)
inline void write_audit_histogram_csv(const MomentAudit& audit, std::ostream& os) {
  os << "order,bin_lo,bin_hi,count\n";
  for (const auto& s : audit.orders) {
    for (std::size_t b = 0; b < s.histogram.size(); ++b) {
      const double lo = b == 0 ? 0.0 : std::pow(10.0, static_cast<double>(b) - 16.0);
      const double hi = b + 1 == kAuditBins ? INFINITY
                                            : std::pow(10.0, static_cast<double>(b) - 15.0);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%g,%g,%zu\n", s.order, lo, hi, s.histogram[b]);
      os << buf;
    }
  }
}

}  // namespace home
