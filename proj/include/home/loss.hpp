#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "home/embedding.hpp"
#include "home/error.hpp"
#include "home/moments.hpp"
#include "home/summation.hpp"
#include "home/variants.hpp"

namespace home {

struct LossConfig {
  double lambda = 1.0;
  Sampling sampling = Sampling::all();
  double epsilon = kDefaultEpsilon;
  // Worker threads for full tuple enumeration; results do not depend on it.
  int threads = 1;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw InvalidArgument("loss: lambda must be finite and non-negative");
    }
    if (!(epsilon > 0.0)) throw InvalidArgument("loss: epsilon must be positive");
  }
};

struct LossValue {
  double total = 0.0;
  double invariance_term = 0.0;
  // One entry per redundancy unit of the plan, in plan order. For the
  // self-all plan this is one entry per view.
  std::vector<double> redundancy_per_unit;
  // dL/dz for each raw view; empty when gradients were not requested.
  std::vector<Matrix> gradients;

  double redundancy_mean() const {
    if (redundancy_per_unit.empty()) return 0.0;
    CompensatedSum s;
    for (double r : redundancy_per_unit) s.add(r);
    return s.value() / static_cast<double>(redundancy_per_unit.size());
  }
};

// A scalar term and its gradient with respect to every normalized view.
struct TermValue {
  double value = 0.0;
  std::vector<Matrix> grads;
};

namespace detail {

inline void check_views(std::span<const NormalizedBatch> views, const char* what) {
  if (views.empty()) throw InvalidArgument(std::string(what) + ": no views");
  for (const auto& v : views) {
    if (v.samples() != views.front().samples() ||
        v.features() != views.front().features()) {
      throw ShapeError(std::string(what) + ": views disagree on shape");
    }
  }
}

}  // namespace detail

// (1/D) sum_d 2/(T(T-1)) sum_{i != j} (1 - <ẑ^i_d, ẑ^j_d>)^2 over ordered
// view pairs. Per-column pair terms are summed in sorted order, so the value
// is exactly invariant under permutation of the views.
inline TermValue invariance_term(std::span<const NormalizedBatch> views,
                                 bool with_grad = true) {
  detail::check_views(views, "invariance_term");
  const std::size_t t = views.size();
  if (t < 2) throw InvalidArgument("invariance_term: need at least 2 views");
  const std::size_t n = views.front().samples();
  const std::size_t d = views.front().features();
  const double coef =
      (1.0 / static_cast<double>(d)) * (2.0 / static_cast<double>(t * (t - 1)));

  TermValue out;
  if (with_grad) out.grads.assign(t, Matrix(n, d));
  CompensatedSum total;
  std::vector<double> pair_terms;
  for (std::size_t c = 0; c < d; ++c) {
    pair_terms.clear();
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = i + 1; j < t; ++j) {
        CompensatedSum dot;
        for (std::size_t r = 0; r < n; ++r) {
          dot.add(views[i].values(r, c) * views[j].values(r, c));
        }
        const double gap = 1.0 - dot.value();
        pair_terms.push_back(gap * gap);
        if (!with_grad) continue;
        // Both ordered pairs (i,j) and (j,i) contribute.
        const double w = coef * 2.0 * (-2.0) * gap;
        for (std::size_t r = 0; r < n; ++r) {
          out.grads[i](r, c) += w * views[j].values(r, c);
          out.grads[j](r, c) += w * views[i].values(r, c);
        }
      }
    }
    std::sort(pair_terms.begin(), pair_terms.end());
    CompensatedSum col;
    for (double p : pair_terms) col.add(2.0 * p);
    total.add(col.value());
  }
  out.value = coef * total.value();
  return out;
}

// (1/M) sum over orders and tuples of m^2, slot k of each tuple reading view
// unit.slots[k]. With sampling, each order's mean squared moment is weighted
// by C(D,K)/M so the term is unbiased for the full value. `stream`
// separates the tuple draws of different iterations and units.
inline TermValue redundancy_term(std::span<const NormalizedBatch> views,
                                 const ResolvedUnit& unit, const LossConfig& config,
                                 std::uint64_t stream = 0, bool with_grad = true) {
  detail::check_views(views, "redundancy_term");
  const std::size_t n = views.front().samples();
  const std::size_t d = views.front().features();
  if (unit.orders.empty()) throw InvalidArgument("redundancy_term: empty tuple set");
  const Count m_count = count_combinations(d, unit.orders);
  if (m_count == 0) throw InvalidArgument("redundancy_term: empty tuple set");
  const double m_total = static_cast<double>(m_count);

  std::vector<ColumnStore> cols;
  cols.reserve(views.size());
  for (const auto& v : views) cols.emplace_back(v.values);
  std::vector<ColumnStore> grads(with_grad ? views.size() : 0, ColumnStore(n, d));

  MomentSpec spec{d, unit.orders, config.sampling};
  spec.validate();
  CompensatedSum total;
  for (int order : unit.orders) {
    if (unit.slots.size() < static_cast<std::size_t>(order)) {
      throw InvalidArgument("redundancy_term: view assignment shorter than order");
    }
    if (config.sampling.full) {
      const double coef = 1.0 / m_total;
      const double s = squared_moment_sum_full(cols, unit.slots, order, coef, grads,
                                               config.threads);
      total.add(coef * s);
    } else {
      const auto tuples =
          spec.tuples(order, derive_seed(stream, {static_cast<std::uint64_t>(order)}));
      const double c_k = static_cast<double>(binomial(d, static_cast<std::size_t>(order)));
      const double coef = c_k / (m_total * static_cast<double>(tuples.size()));
      const double s = squared_moment_sum_tuples(cols, unit.slots, tuples, coef, grads);
      total.add(coef * s);
    }
  }
  TermValue out;
  out.value = total.value();
  for (auto& g : grads) out.grads.push_back(g.to_matrix());
  return out;
}

// Full HOME loss on raw views: normalize each view, add the invariance term
// and lambda times the mean over the plan's redundancy units, then chain the
// gradient back through the normalization.
inline LossValue home_loss(std::span<const EmbeddingBatch> raw_views, const LossPlan& plan,
                           const LossConfig& config, std::uint64_t iteration = 0,
                           bool with_grad = true) {
  config.validate();
  if (raw_views.size() != static_cast<std::size_t>(plan.views)) {
    throw InvalidArgument("home_loss: plan expects " + std::to_string(plan.views) +
                          " views, got " + std::to_string(raw_views.size()));
  }
  std::vector<NormalizedBatch> views;
  views.reserve(raw_views.size());
  for (const auto& v : raw_views) views.push_back(normalize(v, config.epsilon));
  detail::check_views(views, "home_loss");

  LossValue out;
  TermValue inv = invariance_term(views, with_grad);
  out.invariance_term = inv.value;
  std::vector<Matrix> dz_hat = std::move(inv.grads);

  const auto units = resolve_iteration(plan, iteration);
  const double unit_weight =
      units.empty() ? 0.0 : config.lambda / static_cast<double>(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::uint64_t stream = derive_seed(iteration, {u});
    TermValue r = redundancy_term(views, units[u], config, stream, with_grad);
    out.redundancy_per_unit.push_back(r.value);
    if (!with_grad || unit_weight == 0.0) continue;
    for (std::size_t v = 0; v < views.size(); ++v) {
      r.grads[v] *= unit_weight;
      dz_hat[v] += r.grads[v];
    }
  }
  out.total = out.invariance_term + config.lambda * out.redundancy_mean();
  if (!std::isfinite(out.total)) throw NonFiniteError("home_loss: non-finite loss");

  if (with_grad) {
    for (std::size_t v = 0; v < views.size(); ++v) {
      out.gradients.push_back(normalize_backward(views[v], dz_hat[v]));
    }
  }
  return out;
}

}  // namespace home
