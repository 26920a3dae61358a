#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "home/embedding.hpp"
#include "home/error.hpp"
#include "home/matrix.hpp"
#include "home/parallel.hpp"
#include "home/rng.hpp"
#include "home/summation.hpp"

namespace home {

using Count = unsigned __int128;

inline std::string to_string(Count value) {
  if (value == 0) return "0";
  std::string s;
  while (value > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

// C(n, k), exact. Throws OverflowError instead of wrapping.
inline Count binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  Count result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // result * (n - k + i) is divisible by i after the multiplication.
    Count product;
    if (__builtin_mul_overflow(result, static_cast<Count>(n - k + i), &product)) {
      throw OverflowError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                          ") exceeds 128-bit range");
    }
    result = product / i;
  }
  return result;
}

inline std::uint64_t to_u64(Count value, const char* what) {
  if (value > static_cast<Count>(UINT64_MAX)) {
    throw OverflowError(std::string(what) + ": " + to_string(value) +
                        " exceeds 64-bit range");
  }
  return static_cast<std::uint64_t>(value);
}

inline void check_order(std::size_t dim, int order) {
  if (order < 2 || static_cast<std::size_t>(order) > dim) {
    throw InvalidArgument("moment order " + std::to_string(order) +
                          " outside [2, " + std::to_string(dim) + "]");
  }
}

// M = sum over configured orders of C(D, K).
inline Count count_combinations(std::size_t dim, std::span<const int> orders) {
  Count total = 0;
  for (int k : orders) {
    check_order(dim, k);
    const Count c = binomial(dim, static_cast<std::size_t>(k));
    if (__builtin_add_overflow(total, c, &total)) {
      throw OverflowError("combination count exceeds 128-bit range");
    }
  }
  return total;
}

inline Count count_combinations(std::size_t dim, std::initializer_list<int> orders) {
  return count_combinations(dim, std::span<const int>(orders.begin(), orders.size()));
}

// Strictly increasing feature indices, 0-based internally and 1-based in any
// text output.
class IndexTuple {
 public:
  IndexTuple() = default;
  IndexTuple(std::vector<std::size_t> indices, std::size_t dim)
      : indices_(std::move(indices)) {
    if (indices_.size() < 2) throw InvalidArgument("index tuple needs order >= 2");
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] >= dim) {
        throw InvalidArgument("index " + std::to_string(indices_[i] + 1) +
                              " out of range 1.." + std::to_string(dim));
      }
      if (i > 0 && indices_[i] <= indices_[i - 1]) {
        throw InvalidArgument("index tuple must be strictly increasing");
      }
    }
  }

  std::size_t order() const { return indices_.size(); }
  std::size_t operator[](std::size_t k) const { return indices_[k]; }
  std::span<const std::size_t> indices() const { return indices_; }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i) s += ':';
      s += std::to_string(indices_[i] + 1);
    }
    return s;
  }

  friend auto operator<=>(const IndexTuple&, const IndexTuple&) = default;

 private:
  std::vector<std::size_t> indices_;
};

// Advances `idx` to the next K-combination of [0, dim) in lexicographic
// order. Returns false after the last one.
inline bool next_combination(std::span<std::size_t> idx, std::size_t dim) {
  const std::size_t k = idx.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (idx[i] < dim - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// Lazily yields every K-combination of D features once, in lexicographic
// order, holding only the current tuple.
class CombinationStream {
 public:
  CombinationStream(std::size_t dim, int order) : dim_(dim) {
    check_order(dim, order);
    current_.resize(static_cast<std::size_t>(order));
    for (std::size_t i = 0; i < current_.size(); ++i) current_[i] = i;
  }

  bool next(IndexTuple& out) {
    if (done_) return false;
    out = IndexTuple(current_, dim_);
    done_ = !next_combination(current_, dim_);
    return true;
  }

 private:
  std::size_t dim_;
  std::vector<std::size_t> current_;
  bool done_ = false;
};

inline std::vector<IndexTuple> enumerate_tuples(std::size_t dim, int order) {
  std::vector<IndexTuple> out;
  out.reserve(static_cast<std::size_t>(
      to_u64(binomial(dim, static_cast<std::size_t>(order)), "enumerate_tuples")));
  CombinationStream stream(dim, order);
  IndexTuple t;
  while (stream.next(t)) out.push_back(t);
  return out;
}

// Lexicographic unranking: rank r in [0, C(D,K)) -> r-th K-combination.
inline IndexTuple unrank_combination(std::uint64_t rank, std::size_t dim, int order) {
  check_order(dim, order);
  const auto k = static_cast<std::size_t>(order);
  const Count total = binomial(dim, k);
  if (static_cast<Count>(rank) >= total) {
    throw InvalidArgument("rank " + std::to_string(rank) + " >= C(D,K)");
  }
  std::vector<std::size_t> idx(k);
  Count r = rank;
  std::size_t c = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (;; ++c) {
      const Count below = binomial(dim - 1 - c, k - 1 - i);
      if (r < below) break;
      r -= below;
    }
    idx[i] = c++;
  }
  return IndexTuple(std::move(idx), dim);
}

// Uniform sample of `count` distinct K-combinations without replacement.
// Partial Fisher-Yates over the rank space with a sparse swap table, then
// unranking; output is sorted lexicographically.
inline std::vector<IndexTuple> sample_tuples(std::size_t dim, int order,
                                             std::uint64_t count, std::uint64_t seed) {
  check_order(dim, order);
  const std::uint64_t total =
      to_u64(binomial(dim, static_cast<std::size_t>(order)), "sample_tuples");
  if (count < 1 || count > total) {
    throw InvalidArgument("sample count " + std::to_string(count) +
                          " outside [1, C(D,K) = " + std::to_string(total) + "]");
  }
  Rng rng = make_rng(seed, {dim, static_cast<std::uint64_t>(order)});
  std::unordered_map<std::uint64_t, std::uint64_t> swapped;
  auto value_at = [&](std::uint64_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::uint64_t> ranks(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t j = i + uniform_below(rng, total - i);
    const std::uint64_t vi = value_at(i);
    const std::uint64_t vj = value_at(j);
    swapped[j] = vi;
    ranks[i] = vj;
  }
  std::sort(ranks.begin(), ranks.end());
  std::vector<IndexTuple> out;
  out.reserve(count);
  for (std::uint64_t r : ranks) out.push_back(unrank_combination(r, dim, order));
  return out;
}

// (1/N) sum_n prod_k columns[k][n]. The factors are multiplied in a canonical
// (content-sorted) order so the result is exactly invariant under permutation
// of the inputs.
inline double mixed_moment(std::span<const std::span<const double>> columns) {
  if (columns.empty()) throw InvalidArgument("mixed_moment: no columns");
  const std::size_t n = columns.front().size();
  if (n == 0) throw InvalidArgument("mixed_moment: empty columns");
  std::vector<std::span<const double>> ordered(columns.begin(), columns.end());
  for (const auto& c : ordered) {
    if (c.size() != n) throw ShapeError("mixed_moment: column length mismatch");
    for (double v : c) {
      if (!std::isfinite(v)) throw NonFiniteError("mixed_moment: non-finite input");
    }
  }
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  CompensatedSum sum;
  for (std::size_t i = 0; i < n; ++i) {
    double p = ordered[0][i];
    for (std::size_t k = 1; k < ordered.size(); ++k) p *= ordered[k][i];
    sum.add(p);
  }
  return sum.value() / static_cast<double>(n);
}

inline double mixed_moment(std::initializer_list<std::span<const double>> columns) {
  return mixed_moment(std::span<const std::span<const double>>(columns.begin(), columns.size()));
}

struct Sampling {
  bool full = true;
  // Tuples drawn per order when not full.
  std::map<int, std::uint64_t> per_order_count;
  std::uint64_t seed = 0;

  static Sampling all() { return {}; }
  static Sampling sampled(std::map<int, std::uint64_t> counts, std::uint64_t seed) {
    return {false, std::move(counts), seed};
  }
};

struct MomentSpec {
  std::size_t dim = 0;
  std::vector<int> orders;
  Sampling sampling;

  void validate() const {
    if (orders.empty()) throw InvalidArgument("moment spec: no orders");
    for (int k : orders) {
      check_order(dim, k);
      if (!sampling.full) {
        auto it = sampling.per_order_count.find(k);
        if (it == sampling.per_order_count.end()) {
          throw InvalidArgument("moment spec: no sample count for order " +
                                std::to_string(k));
        }
        const Count c = binomial(dim, static_cast<std::size_t>(k));
        if (it->second < 1 || static_cast<Count>(it->second) > c) {
          throw InvalidArgument("moment spec: sample count for order " +
                                std::to_string(k) + " outside [1, " + to_string(c) + "]");
        }
      }
    }
  }

  int max_order() const { return *std::max_element(orders.begin(), orders.end()); }

  // Tuples for one order. `stream` separates independent draws that share
  // the spec seed (per iteration, per unit).
  std::vector<IndexTuple> tuples(int order, std::uint64_t stream = 0) const {
    if (sampling.full) return enumerate_tuples(dim, order);
    return sample_tuples(dim, order, sampling.per_order_count.at(order),
                         derive_seed(sampling.seed, {stream}));
  }
};

struct MomentEntry {
  IndexTuple tuple;
  std::vector<int> views;  // view_id read by each slot
  double value = 0.0;
};

struct MomentReport {
  MomentSpec spec;
  std::vector<MomentEntry> entries;
};

// Computes the mixed moment of every tuple in the spec. Slot k of a tuple
// reads columns from views[slot_views[k]]; self moments assign every slot
// the same view. slot_views must cover the highest order.
inline MomentReport moment_report(std::span<const NormalizedBatch> views,
                                  std::span<const int> slot_views, const MomentSpec& spec) {
  spec.validate();
  if (views.empty()) throw InvalidArgument("moment_report: no views");
  const std::size_t n = views.front().samples();
  for (const auto& v : views) {
    if (v.samples() != n) throw ShapeError("moment_report: views disagree on N");
    if (v.features() != spec.dim) throw ShapeError("moment_report: views disagree on D");
  }
  if (slot_views.size() != static_cast<std::size_t>(spec.max_order())) {
    throw InvalidArgument("moment_report: view assignment has " +
                          std::to_string(slot_views.size()) + " slots, need " +
                          std::to_string(spec.max_order()));
  }
  for (int s : slot_views) {
    if (s < 0 || static_cast<std::size_t>(s) >= views.size()) {
      throw InvalidArgument("moment_report: slot view index out of range");
    }
  }

  // Column-contiguous copies.
  std::vector<std::vector<std::vector<double>>> cols(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    cols[v].resize(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) cols[v][d] = views[v].values.column(d);
  }

  MomentReport report{spec, {}};
  std::vector<std::span<const double>> slot_cols;
  for (int order : spec.orders) {
    std::vector<int> ids;
    for (int k = 0; k < order; ++k) ids.push_back(views[slot_views[k]].view_id);
    for (auto& t : spec.tuples(order)) {
      slot_cols.clear();
      for (int k = 0; k < order; ++k) slot_cols.emplace_back(cols[slot_views[k]][t[k]]);
      const double m = mixed_moment(slot_cols);
      report.entries.push_back({std::move(t), ids, m});
    }
  }
  return report;
}

inline MomentReport moment_report(const NormalizedBatch& view, const MomentSpec& spec) {
  spec.validate();
  const std::vector<int> slots(static_cast<std::size_t>(spec.max_order()), 0);
  return moment_report(std::span<const NormalizedBatch>(&view, 1), slots, spec);
}

// CSV: order,indices,views,moment with colon-joined 1-based indices.
inline void write_csv(const MomentReport& report, std::ostream& os) {
  os << "order,indices,views,moment\n";
  char buf[64];
  for (const auto& e : report.entries) {
    os << e.tuple.order() << ',' << e.tuple.to_string() << ',';
    for (std::size_t i = 0; i < e.views.size(); ++i) os << (i ? ":" : "") << e.views[i];
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    os << ',' << buf << '\n';
  }
}

// Column-major copy of an N x D batch, so per-feature loops are contiguous.
class ColumnStore {
 public:
  ColumnStore() = default;
  ColumnStore(std::size_t samples, std::size_t features)
      : n_(samples), d_(features), data_(samples * features, 0.0) {}
  explicit ColumnStore(const Matrix& m) : ColumnStore(m.rows(), m.cols()) {
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < d_; ++c) data_[c * n_ + r] = m(r, c);
  }

  std::size_t samples() const { return n_; }
  std::size_t features() const { return d_; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * n_, n_}; }
  std::span<double> col(std::size_t c) { return {data_.data() + c * n_, n_}; }

  void zero_from(std::size_t first_col) {
    std::fill(data_.begin() + static_cast<std::ptrdiff_t>(first_col * n_), data_.end(), 0.0);
  }
  void add_from(const ColumnStore& other, std::size_t first_col) {
    for (std::size_t i = first_col * n_; i < data_.size(); ++i) data_[i] += other.data_[i];
  }

  Matrix to_matrix() const {
    Matrix m(n_, d_);
    for (std::size_t c = 0; c < d_; ++c)
      for (std::size_t r = 0; r < n_; ++r) m(r, c) = data_[c * n_ + r];
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Depth-first walk over the combination tree rooted at one first index,
// sharing prefix products between siblings. Gradients flow back through the
// prefix chain (adjoint per depth).
class CombinationTreeWalk {
 public:
  CombinationTreeWalk(std::span<const ColumnStore> views, std::span<const int> slots,
                      std::size_t order, double grad_coef, bool want_grad)
      : views_(views),
        slots_(slots),
        k_(order),
        n_(views.front().samples()),
        d_(views.front().features()),
        grad_coef_(grad_coef),
        want_grad_(want_grad),
        prefix_(order - 1, std::vector<double>(n_)),
        adjoint_(order - 1, std::vector<double>(n_)) {}

  // Returns the sum of squared moments of every tuple starting at `first`;
  // gradient contributions land in `grads` (indexed like views).
  double run(std::size_t first, std::span<ColumnStore> grads) {
    grads_ = grads;
    sum_ = CompensatedSum{};
    const auto col = view_col(0, first);
    std::copy(col.begin(), col.end(), prefix_[0].begin());
    std::fill(adjoint_[0].begin(), adjoint_[0].end(), 0.0);
    descend(1, first + 1);
    if (want_grad_) {
      auto g = grads_[static_cast<std::size_t>(slots_[0])].col(first);
      for (std::size_t n = 0; n < n_; ++n) g[n] += adjoint_[0][n];
    }
    return sum_.value();
  }

 private:
  std::span<const double> view_col(std::size_t slot, std::size_t c) const {
    return views_[static_cast<std::size_t>(slots_[slot])].col(c);
  }

  void descend(std::size_t depth, std::size_t start) {
    const auto& prev = prefix_[depth - 1];
    auto& prev_adj = adjoint_[depth - 1];
    const double inv_n = 1.0 / static_cast<double>(n_);
    if (depth == k_ - 1) {
      for (std::size_t c = start; c < d_; ++c) {
        const auto col = view_col(depth, c);
        const double m = pairwise_dot(prev.data(), col.data(), n_) * inv_n;
        sum_.add(m * m);
        if (want_grad_) {
          const double w = grad_coef_ * 2.0 * m * inv_n;
          auto g = grads_[static_cast<std::size_t>(slots_[depth])].col(c);
          for (std::size_t n = 0; n < n_; ++n) {
            g[n] += w * prev[n];
            prev_adj[n] += w * col[n];
          }
        }
      }
      return;
    }
    auto& cur = prefix_[depth];
    auto& cur_adj = adjoint_[depth];
    for (std::size_t c = start; c + (k_ - depth) <= d_; ++c) {
      const auto col = view_col(depth, c);
      for (std::size_t n = 0; n < n_; ++n) cur[n] = prev[n] * col[n];
      std::fill(cur_adj.begin(), cur_adj.end(), 0.0);
      descend(depth + 1, c + 1);
      if (want_grad_) {
        auto g = grads_[static_cast<std::size_t>(slots_[depth])].col(c);
        for (std::size_t n = 0; n < n_; ++n) {
          g[n] += cur_adj[n] * prev[n];
          prev_adj[n] += cur_adj[n] * col[n];
        }
      }
    }
  }

  std::span<const ColumnStore> views_;
  std::span<const int> slots_;
  std::size_t k_, n_, d_;
  double grad_coef_;
  bool want_grad_;
  std::vector<std::vector<double>> prefix_, adjoint_;
  std::span<ColumnStore> grads_;
  CompensatedSum sum_;
};

inline void check_engine_inputs(std::span<const ColumnStore> views,
                                std::span<const int> slots, std::size_t order,
                                std::span<ColumnStore> grads) {
  if (views.empty()) throw InvalidArgument("moment engine: no views");
  if (slots.size() < order) throw InvalidArgument("moment engine: too few slots");
  const std::size_t d = views.front().features();
  if (order < 2 || order > d) throw InvalidArgument("moment engine: bad order");
  for (const auto& v : views) {
    if (v.samples() != views.front().samples() || v.features() != d) {
      throw ShapeError("moment engine: views disagree on shape");
    }
  }
  for (std::size_t k = 0; k < order; ++k) {
    if (slots[k] < 0 || static_cast<std::size_t>(slots[k]) >= views.size()) {
      throw InvalidArgument("moment engine: slot view out of range");
    }
  }
  if (!grads.empty() && grads.size() != views.size()) {
    throw ShapeError("moment engine: gradient buffers do not match views");
  }
}

}  // namespace detail

// Sum of squared mixed moments over all K-combinations (slot k reading
// views[slots[k]]). When `grads` is non-empty, adds
// grad_coef * d(sum m^2)/dz into it. The reduction runs over first-index
// chunks in a fixed order, so the result is bitwise independent of `threads`.
inline double squared_moment_sum_full(std::span<const ColumnStore> views,
                                      std::span<const int> slots, int order,
                                      double grad_coef, std::span<ColumnStore> grads,
                                      int threads = 1) {
  const auto k = static_cast<std::size_t>(order);
  detail::check_engine_inputs(views, slots, k, grads);
  const std::size_t n = views.front().samples();
  const std::size_t d = views.front().features();
  const bool want_grad = !grads.empty();
  const std::size_t chunks = d - k + 1;

  CompensatedSum total;
  if (threads <= 1) {
    detail::CombinationTreeWalk walk(views, slots, k, grad_coef, want_grad);
    std::vector<ColumnStore> scratch(want_grad ? views.size() : 0, ColumnStore(n, d));
    for (std::size_t first = 0; first < chunks; ++first) {
      for (auto& s : scratch) s.zero_from(first);
      total.add(walk.run(first, scratch));
      for (std::size_t v = 0; v < scratch.size(); ++v) grads[v].add_from(scratch[v], first);
    }
    return total.value();
  }

  std::vector<double> partial(chunks, 0.0);
  std::vector<std::vector<ColumnStore>> chunk_grads(
      chunks, std::vector<ColumnStore>(want_grad ? views.size() : 0));
  parallel_for(chunks, threads, [&](std::size_t first) {
    detail::CombinationTreeWalk walk(views, slots, k, grad_coef, want_grad);
    auto& local = chunk_grads[first];
    for (auto& s : local) s = ColumnStore(n, d);
    partial[first] = walk.run(first, local);
  });
  for (std::size_t first = 0; first < chunks; ++first) {
    total.add(partial[first]);
    for (std::size_t v = 0; v < chunk_grads[first].size(); ++v) {
      grads[v].add_from(chunk_grads[first][v], first);
    }
  }
  return total.value();
}

// Same as above over an explicit tuple list (the sampled estimator).
inline double squared_moment_sum_tuples(std::span<const ColumnStore> views,
                                        std::span<const int> slots,
                                        std::span<const IndexTuple> tuples,
                                        double grad_coef, std::span<ColumnStore> grads) {
  if (tuples.empty()) throw InvalidArgument("moment engine: empty tuple set");
  const std::size_t k = tuples.front().order();
  detail::check_engine_inputs(views, slots, k, grads);
  const std::size_t n = views.front().samples();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::span<const double>> cols(k);
  std::vector<double> prod(n);
  CompensatedSum total;
  for (const auto& t : tuples) {
    if (t.order() != k) throw InvalidArgument("moment engine: mixed tuple orders");
    for (std::size_t j = 0; j < k; ++j) {
      cols[j] = views[static_cast<std::size_t>(slots[j])].col(t[j]);
    }
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
      double p = cols[0][i];
      for (std::size_t j = 1; j < k; ++j) p *= cols[j][i];
      prod[i] = p;
      s.add(p);
    }
    const double m = s.value() * inv_n;
    total.add(m * m);
    if (grads.empty()) continue;
    const double w = grad_coef * 2.0 * m * inv_n;
    for (std::size_t j = 0; j < k; ++j) {
      auto g = grads[static_cast<std::size_t>(slots[j])].col(t[j]);
      for (std::size_t i = 0; i < n; ++i) {
        double others = 1.0;
        for (std::size_t q = 0; q < k; ++q) {
          if (q != j) others *= cols[q][i];
        }
        g[i] += w * others;
      }
    }
  }
  return total.value();
}

}  // namespace home
