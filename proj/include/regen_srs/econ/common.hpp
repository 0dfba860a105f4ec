#ifndef REGEN_SRS_ECON_COMMON_HPP
#define REGEN_SRS_ECON_COMMON_HPP

#include <algorithm>
#include <cmath>

// Boost 1.74's pchip calls isnan unqualified on plain doubles.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "regen_srs/errors.hpp"
#include "regen_srs/ordered_core.hpp"
#include "regen_srs/parallel.hpp"
#include "regen_srs/regen_drivers.hpp"
#include "regen_srs/srs_engine.hpp"

namespace regen_srs::econ {

/// One named invariant check. Optional checks are reported but do not block a solve.
struct Check {
  std::string name;
  bool ok = true;
  std::string detail;
  bool required = true;
};

/// Runs `test`; a thrown ValidationError becomes a failed check carrying its message.
template <typename F>
Check run_check(std::string name, F&& test, bool required = true) {
  try {
    auto [ok, detail] = test();
    return {std::move(name), ok, ok ? std::string() : std::move(detail), required};
  } catch (const ValidationError& e) {
    return {std::move(name), false, e.what(), required};
  }
}

inline void throw_first_failure(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (c.required && !c.ok) throw ValidationError(c.detail);
  }
}

/// CRRA utility c^(1-gamma)/(1-gamma); gamma == 1 means log.
struct Utility {
  double gamma = 1.0;

  bool is_log() const noexcept { return gamma == 1.0; }
  double operator()(double c) const { return is_log() ? std::log(c) : std::pow(c, 1 - gamma) / (1 - gamma); }
  double marginal(double c) const { return is_log() ? 1 / c : std::pow(c, -gamma); }
  std::string describe() const { return is_log() ? "log" : "crra(" + format_decimal(gamma) + ")"; }
};

inline void validate_transition(const Matrix<double>& p, std::size_t states, bool strictly_positive,
                                 const std::string& what) {
  if (p.size() != states) throw ValidationError(what + ": transition has " + std::to_string(p.size()) +
                                                " rows for " + std::to_string(states) + " states");
  detail::validate_stochastic(p);
  if (strictly_positive) {
    for (const auto& row : p) {
      for (double v : row) {
        if (!(v > 0)) throw ValidationError(what + ": all transition probabilities must be positive");
      }
    }
  }
}

struct Maximum {
  double x = 0;
  double value = -std::numeric_limits<double>::infinity();
};

/// Golden-section search for the maximum of a unimodal objective on [lo, hi].
/// Both bracket ends are also evaluated, so corner optima are returned exactly.
template <typename F>
Maximum golden_section_max(F&& f, double lo, double hi, double tol = 1e-11) {
  if (hi < lo) std::swap(lo, hi);
  Maximum best{lo, f(lo)};
  if (hi == lo) return best;
  const double hi_value = f(hi);
  if (hi_value > best.value) best = {hi, hi_value};
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  const double scale = std::max(1.0, std::abs(hi) + std::abs(lo));
  while (b - a > tol * scale) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    }
  }
  const double mid = (a + b) / 2;
  const double fm = f(mid);
  if (fm > best.value) best = {mid, fm};
  return best;
}

/// Shape-preserving cubic (PCHIP) interpolant of y over strictly increasing x,
/// constant-slope extension beyond the ends.
class Interpolant {
public:
  Interpolant() = default;
  Interpolant(std::vector<double> x, std::vector<double> y)
      : lo_(x.front()), hi_(x.back()), ylo_(y.front()), yhi_(y.back()) {
    slope_lo_ = (y[1] - y[0]) / (x[1] - x[0]);
    const std::size_t n = x.size();
    slope_hi_ = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    impl_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(x), std::move(y));
  }

  double operator()(double x) const {
    if (x <= lo_) return ylo_ + slope_lo_ * (x - lo_);
    if (x >= hi_) return yhi_ + slope_hi_ * (x - hi_);
    return (*impl_)(x);
  }

private:
  std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> impl_;
  double lo_ = 0, hi_ = 0, ylo_ = 0, yhi_ = 0, slope_lo_ = 0, slope_hi_ = 0;
};

/// Value and policy on grid x exogenous state; value[z][i], policy[z][i].
struct PolicySolution {
  std::string model;
  std::vector<double> grid;
  std::vector<double> shock_values;
  std::vector<std::string> shock_labels;
  Matrix<double> transition;
  Matrix<double> value;
  Matrix<double> policy;
  std::vector<double> history;  ///< sup-norm value change per sweep
  std::size_t iterations = 0;
  double policy_change = 0;
  double lower = 0;  ///< lower feasibility bound on the policy (a_lower, 0)

  std::size_t num_states() const noexcept { return policy.size(); }

  /// Policy at an off-grid state, interpolated with the value interpolant's scheme.
  Interpolant policy_interpolant(std::size_t z) const { return Interpolant(grid, policy[z]); }

  /// Largest sup-norm violation of monotonicity in the endogenous state (0 if monotone).
  double monotonicity_defect() const {
    double worst = 0;
    for (const auto& row : policy) {
      for (std::size_t i = 1; i < row.size(); ++i) worst = std::max(worst, row[i - 1] - row[i]);
    }
    return worst;
  }
};

struct VfiOptions {
  double tol = 1e-8;          ///< sup-norm change in values
  double policy_tol = 1e-6;   ///< secondary stop: policy change below this ...
  double policy_value_tol = 1e-6;  ///< ... while the value change is below this
  std::size_t max_iter = 5000;
};

/// Bellman sweeps v <- T v on a grid. `bracket(z, i)` gives the feasible
/// choice interval and `reward(z, i, choice)` the period payoff; the
/// continuation is beta * E[v(choice, z+) | z] evaluated through Interpolant.
template <typename Bracket, typename Reward>
void value_iteration(PolicySolution& sol, double beta, Bracket bracket, Reward reward, const VfiOptions& opt) {
  const std::size_t nz = sol.transition.size(), n = sol.grid.size();
  if (sol.value.empty()) sol.value.assign(nz, std::vector<double>(n, 0.0));
  sol.policy.assign(nz, std::vector<double>(n, 0.0));
  constexpr std::size_t chunk = 32;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    std::vector<Interpolant> cont(nz);
    for (std::size_t z = 0; z < nz; ++z) {
      std::vector<double> ev(n, 0.0);
      for (std::size_t w = 0; w < nz; ++w) {
        for (std::size_t i = 0; i < n; ++i) ev[i] += sol.transition[z][w] * sol.value[w][i];
      }
      cont[z] = Interpolant(sol.grid, std::move(ev));
    }
    struct Block {
      std::vector<double> value, policy;
    };
    auto blocks = parallel_indexed<Block>(nz * chunks, [&](std::size_t task) {
      const std::size_t z = task / chunks, start = (task % chunks) * chunk, stop = std::min(n, start + chunk);
      Block b;
      for (std::size_t i = start; i < stop; ++i) {
        const auto [lo, hi] = bracket(z, i);
        const auto best = golden_section_max(
            [&](double choice) { return reward(z, i, choice) + beta * cont[z](choice); }, lo, hi);
        b.value.push_back(best.value);
        b.policy.push_back(best.x);
      }
      return b;
    });
    double dv = 0, dp = 0;
    for (std::size_t task = 0; task < blocks.size(); ++task) {
      const std::size_t z = task / chunks, start = (task % chunks) * chunk;
      for (std::size_t k = 0; k < blocks[task].value.size(); ++k) {
        dv = std::max(dv, std::abs(blocks[task].value[k] - sol.value[z][start + k]));
        dp = std::max(dp, std::abs(blocks[task].policy[k] - sol.policy[z][start + k]));
        sol.value[z][start + k] = blocks[task].value[k];
        sol.policy[z][start + k] = blocks[task].policy[k];
      }
    }
    sol.history.push_back(dv);
    sol.iterations = it;
    sol.policy_change = dp;
    if (dv < opt.tol || (it > 1 && dp < opt.policy_tol && dv < opt.policy_value_tol)) return;
  }
  throw NonConvergence(sol.model + " value iteration did not converge in " + std::to_string(opt.max_iter) +
                           " sweeps (last change " + format_decimal(sol.history.back()) + ")",
                       sol.history.back(), static_cast<int>(opt.max_iter));
}

struct EulerReport {
  double max_interior = 0;        ///< max |residual| over unconstrained interior nodes
  double max_constrained_violation = 0;  ///< max(0, -residual) over constrained nodes
  std::size_t interior_nodes = 0;
  std::size_t constrained_nodes = 0;
};

struct PolishOptions {
  double tol = 1e-11;  ///< sup-norm policy change
  std::size_t max_iter = 2000;
};

/// Euler-equation time iteration started from the current policy. `gap(pol,
/// z, i, choice)` is u'(c) minus the discounted expected marginal value, with
/// the next-period policy read from `pol`; it must increase in the choice.
/// The root in bracket(z, i) becomes the new policy, or the bracket end where
/// the sign never changes. Values are left alone.
template <typename Bracket, typename Gap>
void time_iteration(PolicySolution& sol, Bracket bracket, Gap gap, const PolishOptions& opt) {
  const std::size_t nz = sol.num_states(), n = sol.grid.size();
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    std::vector<Interpolant> pol;
    for (std::size_t z = 0; z < nz; ++z) pol.push_back(sol.policy_interpolant(z));
    auto rows = parallel_indexed<std::vector<double>>(nz, [&](std::size_t z) {
      std::vector<double> row(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto [lo, hi] = bracket(z, i);
        auto g = [&](double choice) { return gap(pol, z, i, choice); };
        if (g(lo) >= 0) {
          row[i] = lo;
        } else if (g(hi) <= 0) {
          row[i] = hi;
        } else {
          std::uintmax_t budget = 200;
          const auto r =
              boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(50), budget);
          row[i] = (r.first + r.second) / 2;
        }
      }
      return row;
    });
    double dp = 0;
    for (std::size_t z = 0; z < nz; ++z) {
      for (std::size_t i = 0; i < n; ++i) dp = std::max(dp, std::abs(rows[z][i] - sol.policy[z][i]));
    }
    sol.policy = std::move(rows);
    sol.policy_change = dp;
    if (dp < opt.tol) return;
  }
  throw NonConvergence(sol.model + " Euler polishing did not converge (last policy change " +
                           format_decimal(sol.policy_change) + ")",
                       sol.policy_change, static_cast<int>(opt.max_iter));
}

/// Grid on [lo, hi] whose spacing grows geometrically away from lo;
/// curvature 0 gives a uniform grid.
inline std::vector<double> stretched_grid(double lo, double hi, std::size_t n, double curvature) {
  if (n < 4) throw ValidationError("model grids need at least 4 nodes");
  if (!(lo < hi)) throw ValidationError("grid bounds must satisfy lo < hi");
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    const double w = curvature == 0 ? u : std::expm1(curvature * u) / std::expm1(curvature);
    pts[i] = lo + (hi - lo) * w;
  }
  pts.front() = lo;
  pts.back() = hi;
  return pts;
}

/// The SRS of a solved model: the policy rounded down onto its grid, driven by
/// the exogenous chain through a Markov-atom driver whose state z carries the
/// degenerate shock z.
struct CompiledModel {
  SrsModel<double> srs;
  std::vector<std::vector<std::size_t>> next_index;  ///< next_index[z][i]
};

inline CompiledModel compile_to_srs(const PolicySolution& sol, EnvState atom = 0,
                                    EnumerationOptions enumeration = {24, 100000}) {
  CompiledModel out;
  const StateGrid<double> grid(sol.grid);
  const std::size_t nz = sol.num_states();
  out.next_index.assign(nz, std::vector<std::size_t>(grid.size()));
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // Round down; the 1e-12 slack keeps exact fixed points (f(x) = x up to
      // rounding) on their own node.
      const double target = sol.policy[z][i] + 1e-12 * std::max(1.0, std::abs(sol.policy[z][i]));
      out.next_index[z][i] = grid.floor_index(std::clamp(target, grid.bottom(), grid.top()));
    }
  }
  std::vector<ShockLaw<double>> shocks;
  for (std::size_t z = 0; z < nz; ++z) shocks.push_back(ShockLaw<double>::degenerate(static_cast<double>(z)));
  auto table = std::make_shared<std::vector<std::vector<std::size_t>>>(out.next_index);
  auto policies = std::make_shared<std::vector<Interpolant>>();
  for (std::size_t z = 0; z < nz; ++z) policies->push_back(sol.policy_interpolant(z));
  auto g = std::make_shared<StateGrid<double>>(grid);
  MonotoneMap<double> map{[table, policies, g](double x, double v) {
                            const auto z = static_cast<std::size_t>(v);
                            const std::size_t i = g->floor_index(x);
                            if ((*g)[i] == x) return (*g)[(*table)[z][i]];
                            const double y = std::clamp((*policies)[z](x), g->bottom(), g->top());
                            return (*g)[g->floor_index(y)];
                          },
                          grid.bottom(), grid.top(), sol.model + " policy rounded down to the grid"};
  auto driver = markov_atom_driver(sol.transition, atom, std::move(shocks), enumeration, sol.shock_labels);
  out.srs = SrsModel<double>{grid, std::move(map), std::move(driver)};
  return out;
}

}  // namespace regen_srs::econ

#endif  // REGEN_SRS_ECON_COMMON_HPP
