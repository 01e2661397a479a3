#pragma once

// Brute-force dependency pushforward by explicit enumeration of wire tuples.
// Deliberately shares no code with dependency_pushforward (which uses
// reachability) so the two can cross-check each other.

#include <functional>
#include <set>
#include <vector>

#include "dynwire/wiring.hpp"

namespace dynwire::oracle {

namespace detail {

// Chains x_in = v0 -d-> o1 -w-> v1 -d-> ... -d-> o_k, k >= 1, with at most
// `budget` dependency steps. Calls `emit(o_k, used)` at every chain end.
inline void enumerate_chains(const WiringDiagram& f, const Dependency& d, Index x_in, std::size_t budget,
                             std::size_t used, const std::function<void(Index, std::size_t)>& emit) {
  if (used == budget) return;
  for (auto [i, o] : d.pairs()) {
    if (i != x_in) continue;
    emit(o, used + 1);
    for (Index w = 0; w < f.w().size(); ++w) {
      auto [src, tgt] = f.w().leg_pair(w);
      if (src == o) enumerate_chains(f, d, tgt, budget, used + 1, emit);
    }
  }
}

}  // namespace detail

// Enumerates tuples (w_in, d_1, w_1, ..., d_k, w_out) with matching
// endpoints. A shortest such tuple never repeats an inner input port, so
// at most |X_in| dependency steps are needed.
inline Dependency pushforward_by_tuples(const WiringDiagram& f, const Dependency& d) {
  require_dependency_on(f.dom(), d, "oracle pushforward");
  std::set<Relation::Pair> found;
  const std::size_t budget = f.dom().inputs.size();
  for (Index a = 0; a < f.w_in().size(); ++a) {
    auto [y_in, x_in] = f.w_in().leg_pair(a);
    detail::enumerate_chains(f, d, x_in, budget, 0, [&](Index x_out, std::size_t) {
      for (Index b = 0; b < f.w_out().size(); ++b) {
        auto [src, y_out] = f.w_out().leg_pair(b);
        if (src == x_out) found.emplace(y_in, y_out);
      }
    });
  }
  return Relation(f.cod().inputs, f.cod().outputs, {found.begin(), found.end()});
}

// R(g ∘ f)(d) enumerated directly from f, g and d as tuples
//   (w_in', w_in_1, d.., w.., d.., w_out_1, w'_1, w_in_2, ..., w_out_n, w_out')
// without ever building the composite diagram.
inline Dependency composite_pushforward_by_tuples(const WiringDiagram& f, const WiringDiagram& g,
                                                  const Dependency& d) {
  require_dependency_on(f.dom(), d, "oracle composite pushforward");
  if (!same_shape(f.cod(), g.dom())) throw MismatchError("oracle: f and g are not composable");
  std::set<Relation::Pair> found;
  const std::size_t budget = f.dom().inputs.size();

  // Continue from middle input port y_in having spent `used` dependency steps.
  std::function<void(Index, Index, std::size_t)> segment = [&](Index z_in, Index y_in, std::size_t used) {
    for (Index a = 0; a < f.w_in().size(); ++a) {
      auto [src, x_in] = f.w_in().leg_pair(a);
      if (src != y_in) continue;
      detail::enumerate_chains(f, d, x_in, budget, used, [&](Index x_out, std::size_t now) {
        for (Index b = 0; b < f.w_out().size(); ++b) {
          auto [xo, y_out] = f.w_out().leg_pair(b);
          if (xo != x_out) continue;
          for (Index c = 0; c < g.w_out().size(); ++c) {
            auto [yo, z_out] = g.w_out().leg_pair(c);
            if (yo == y_out) found.emplace(z_in, z_out);
          }
          for (Index t = 0; t < g.w().size(); ++t) {
            auto [yo, y_next] = g.w().leg_pair(t);
            if (yo == y_out) segment(z_in, y_next, now);
          }
        }
      });
    }
  };

  for (Index a = 0; a < g.w_in().size(); ++a) {
    auto [z_in, y_in] = g.w_in().leg_pair(a);
    segment(z_in, y_in, 0);
  }
  return Relation(g.cod().inputs, g.cod().outputs, {found.begin(), found.end()});
}

}  // namespace dynwire::oracle
