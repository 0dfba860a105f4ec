#ifndef REGEN_SRS_EXAMPLE4_HPP
#define REGEN_SRS_EXAMPLE4_HPP

#include <algorithm>

#include "regen_srs/regen_drivers.hpp"
#include "regen_srs/srs_engine.hpp"

namespace regen_srs {

/// X_{t+1} = min(3, max(0, X_t + xi)) on {0, 1, 2, 3}. Environment labels "1"
/// and "2" (ids 0 and 1); cycles (2, 1) and (2, 2, 1) with probability 1/2
/// each; G_1 uniform on {0, 1, 2, 3}, G_2 uniform on {-1, -2}.
template <Scalar S>
MonotoneMap<S> clamp_add_map(const S& lo, const S& hi) {
  return {[lo, hi](const S& x, const S& v) { return std::min<S>(hi, std::max<S>(lo, x + v)); }, lo, hi,
          "min(" + format_exact(hi) + ", max(" + format_exact(lo) + ", x + v))"};
}

template <Scalar S>
SrsModel<S> example4_model() {
  const S q(S(1) / S(4)), h(S(1) / S(2));
  std::vector<ShockLaw<S>> shocks{ShockLaw<S>({S(0), S(1), S(2), S(3)}, {q, q, q, q}),
                                  ShockLaw<S>({S(-1), S(-2)}, {h, h})};
  std::vector<WeightedCycle<S>> cycles{{h, Cycle{{1, 0}}}, {h, Cycle{{1, 1, 0}}}};
  return {StateGrid<S>({S(0), S(1), S(2), S(3)}), clamp_add_map<S>(S(0), S(3)),
          explicit_cycle_driver<S>(std::move(cycles), std::move(shocks), {"1", "2"})};
}

}  // namespace regen_srs

#endif  // REGEN_SRS_EXAMPLE4_HPP
