#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "home/error.hpp"
#include "home/rng.hpp"

namespace home {

enum class Variant {
  BarlowTwinsCross,
  T3O2Cross,
  T3O3Cross,
  T2O3SelfAll,
  T2O3SelfOne,
};

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::BarlowTwinsCross, Variant::T3O2Cross, Variant::T3O3Cross,
    Variant::T2O3SelfAll, Variant::T2O3SelfOne};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::BarlowTwinsCross: return "BarlowTwinsCross";
    case Variant::T3O2Cross: return "HOME-T3-O2-Cross";
    case Variant::T3O3Cross: return "HOME-T3-O3-Cross";
    case Variant::T2O3SelfAll: return "HOME-T2-O3-Self-All";
    case Variant::T2O3SelfOne: return "HOME-T2-O3-Self-One";
  }
  return "?";
}

// Accepts the canonical names, and the HOME- variants without their prefix.
inline std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    const std::string_view canon = to_string(v);
    if (name == canon) return v;
    if (canon.starts_with("HOME-") && name == canon.substr(5)) return v;
  }
  return std::nullopt;
}

// One redundancy term: squared mixed moments over `orders`, slot k reading
// view slots[k]. A random-view unit picks one view per iteration and uses it
// for every slot.
struct RedundancyUnit {
  std::vector<int> orders;
  std::vector<int> slots;
  bool random_view = false;
};

struct LossPlan {
  Variant variant = Variant::T2O3SelfAll;
  int views = 2;
  std::vector<std::pair<int, int>> invariance_pairs;  // ordered, i != j
  std::vector<RedundancyUnit> units;
  std::uint64_t seed = 0;
};

// A unit with its per-iteration choices made.
struct ResolvedUnit {
  std::vector<int> orders;
  std::vector<int> slots;
};

namespace detail {

inline std::vector<std::pair<int, int>> all_ordered_pairs(int views) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < views; ++i)
    for (int j = 0; j < views; ++j)
      if (i != j) out.emplace_back(i, j);
  return out;
}

}  // namespace detail

inline LossPlan build_plan(Variant variant, std::uint64_t seed = 0) {
  LossPlan plan;
  plan.variant = variant;
  plan.seed = seed;
  switch (variant) {
    case Variant::BarlowTwinsCross:
      plan.views = 2;
      plan.units = {{{2}, {0, 1}, false}};
      break;
    case Variant::T3O2Cross:
      plan.views = 3;
      plan.units = {{{2}, {0, 1}, false}, {{2}, {0, 2}, false}, {{2}, {1, 2}, false}};
      break;
    case Variant::T3O3Cross:
      plan.views = 3;
      plan.units = {{{2}, {0, 1}, false},
                    {{2}, {0, 2}, false},
                    {{2}, {1, 2}, false},
                    {{3}, {0, 1, 2}, false}};
      break;
    case Variant::T2O3SelfAll:
      plan.views = 2;
      plan.units = {{{2, 3}, {0, 0, 0}, false}, {{2, 3}, {1, 1, 1}, false}};
      break;
    case Variant::T2O3SelfOne:
      plan.views = 2;
      plan.units = {{{2, 3}, {0, 0, 0}, true}};
      break;
  }
  plan.invariance_pairs = detail::all_ordered_pairs(plan.views);
  return plan;
}

inline LossPlan build_plan(std::string_view name, std::uint64_t seed = 0) {
  const auto v = parse_variant(name);
  if (!v) throw InvalidArgument("unknown variant '" + std::string(name) + "'");
  return build_plan(*v, seed);
}

inline int random_view_choice(const LossPlan& plan, std::uint64_t iteration,
                              std::size_t unit_index) {
  Rng rng = make_rng(plan.seed, {0x5e1f0eULL, iteration, unit_index});
  return static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(plan.views)));
}

inline std::vector<ResolvedUnit> resolve_iteration(const LossPlan& plan,
                                                   std::uint64_t iteration) {
  std::vector<ResolvedUnit> out;
  out.reserve(plan.units.size());
  for (std::size_t u = 0; u < plan.units.size(); ++u) {
    const auto& unit = plan.units[u];
    ResolvedUnit r{unit.orders, unit.slots};
    if (unit.random_view) {
      const int v = random_view_choice(plan, iteration, u);
      std::fill(r.slots.begin(), r.slots.end(), v);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace home
