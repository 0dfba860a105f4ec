#ifndef REGEN_SRS_ECON_GROWTH_HPP
#define REGEN_SRS_ECON_GROWTH_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regen_srs/econ/common.hpp"

namespace regen_srs::econ {

/// Stochastic one-sector growth
///   v(k, z) = max_{0 <= k+ <= phi(k, z)} u(phi(k, z) - k+) + beta E[v(k+, z+) | z],
///   phi(k, z) = z k^alpha + (1 - delta) k.
struct GrowthSpec {
  double alpha = 0.36;
  double beta = 0.95;
  double gamma = 1.0;  ///< CRRA curvature, 1 is log
  double delta = 1.0;
  std::vector<double> shocks;
  Matrix<double> transition;
  double k_lo = 0.01;  ///< grid bottom; log/CRRA utility rules out k = 0 itself
  double k_max = 0;    ///< 0 means the computed bound beyond which phi(k, z) < k
  std::size_t nodes = 500;
  std::vector<std::string> labels;

  double phi(double k, double z) const { return z * std::pow(k, alpha) + (1 - delta) * k; }
  double phi_k(double k, double z) const { return alpha * z * std::pow(k, alpha - 1) + (1 - delta); }

  double z_max() const { return *std::max_element(shocks.begin(), shocks.end()); }

  /// Smallest k with phi(k, z_max) <= k: (z_max / delta)^(1 / (1 - alpha)).
  double computed_k_max() const { return std::pow(z_max() / delta, 1 / (1 - alpha)); }

  double top() const { return k_max > 0 ? k_max : computed_k_max(); }

  std::vector<Check> checks() const {
    using Res = std::pair<bool, std::string>;
    std::vector<Check> out;
    out.push_back(run_check("0 < alpha < 1", [&] { return Res{alpha > 0 && alpha < 1, "growth: alpha must lie in (0, 1)"}; }));
    out.push_back(run_check("0 < beta < 1", [&] { return Res{beta > 0 && beta < 1, "growth: beta must lie in (0, 1)"}; }));
    out.push_back(run_check("gamma > 0", [&] { return Res{gamma > 0, "growth: gamma must be positive"}; }));
    out.push_back(run_check("0 < delta <= 1", [&] { return Res{delta > 0 && delta <= 1, "growth: delta must lie in (0, 1]"}; }));
    out.push_back(run_check("productivity states", [&] {
      bool ok = !shocks.empty();
      for (double z : shocks) ok = ok && z > 0;
      return Res{ok, "growth: need at least one productivity state, all positive"};
    }));
    out.push_back(run_check("transition stochastic, all entries positive", [&] {
      validate_transition(transition, shocks.size(), true, "growth");
      return Res{true, ""};
    }));
    const bool shocks_ok = !shocks.empty() && std::all_of(shocks.begin(), shocks.end(), [](double z) { return z > 0; });
    out.push_back(run_check("grid", [&] {
      if (!(k_lo > 0)) return Res{false, "growth: grid bottom k_lo must be positive"};
      if (nodes < 4) return Res{false, "growth: grid needs at least 4 nodes"};
      return Res{shocks_ok && top() > k_lo, "growth: k_max must exceed k_lo"};
    }));
    // Assumption A(i), read at the grid bottom: some state produces more than it started with.
    out.push_back(run_check("Assumption A(i) at k_lo", [&] {
      bool productive = false;
      for (double z : shocks) productive = productive || phi(k_lo, z) > k_lo;
      return Res{productive, "growth: Assumption A(i) fails, phi(k_lo, z) <= k_lo for every z (k_lo = " +
                               format_decimal(k_lo) + ")"};
    }));
    out.push_back(run_check(
        "Assumption A(ii) pair",
        [&] {
          return Res{shocks.size() == transition.size() && dominance_pair().has_value(),
                   "growth: no states z' > z'' with identical transition rows"};
        },
        false));
    if (!labels.empty()) {
      out.push_back(run_check("labels", [&] { return Res{labels.size() == shocks.size(), "growth: one label per state"}; }));
    }
    return out;
  }

  void validate() const { throw_first_failure(checks()); }

  /// Assumption A(ii): states z' > z'' with identical transition rows, as (z', z'').
  std::optional<std::pair<std::size_t, std::size_t>> dominance_pair() const {
    for (std::size_t a = 0; a < shocks.size(); ++a) {
      for (std::size_t b = 0; b < shocks.size(); ++b) {
        if (shocks[a] > shocks[b] && transition[a] == transition[b]) return std::pair{a, b};
      }
    }
    return std::nullopt;
  }

  std::vector<double> grid() const { return stretched_grid(k_lo, top(), nodes, 0.0); }
};

namespace detail {
inline std::pair<double, double> growth_bracket(const GrowthSpec& spec, double k, double z, double top) {
  const double out = spec.phi(k, z);
  const double hi = std::min(top, out - 1e-9 * std::max(1.0, out));
  return {spec.k_lo, std::max(spec.k_lo, hi)};
}
}  // namespace detail

/// Euler time iteration from the VFI policy:
/// u'(c) = beta E[u'(c+) phi_k(k+, z+)].
inline void polish_growth(const GrowthSpec& spec, PolicySolution& sol, const PolishOptions& opt = {}) {
  const Utility u{spec.gamma};
  const std::size_t nz = sol.num_states();
  const double top = sol.grid.back();
  auto bracket = [&](std::size_t z, std::size_t i) {
    return detail::growth_bracket(spec, sol.grid[i], spec.shocks[z], top);
  };
  auto gap = [&](const std::vector<Interpolant>& pol, std::size_t z, std::size_t i, double next) {
    double expected = 0;
    for (std::size_t w = 0; w < nz; ++w) {
      const double out = spec.phi(next, spec.shocks[w]);
      const double next2 = std::clamp(pol[w](next), spec.k_lo, top);
      expected += sol.transition[z][w] * u.marginal(out - next2) * spec.phi_k(next, spec.shocks[w]);
    }
    return u.marginal(spec.phi(sol.grid[i], spec.shocks[z]) - next) - spec.beta * expected;
  };
  time_iteration(sol, bracket, gap, opt);
}

inline PolicySolution solve_growth(const GrowthSpec& spec, const VfiOptions& opt = {}, bool polish = true) {
  spec.validate();
  const Utility u{spec.gamma};
  PolicySolution sol;
  sol.model = "growth";
  sol.grid = spec.grid();
  sol.shock_values = spec.shocks;
  sol.shock_labels = spec.labels;
  if (sol.shock_labels.empty()) {
    for (double z : spec.shocks) sol.shock_labels.push_back("z=" + format_decimal(z));
  }
  sol.transition = spec.transition;
  sol.lower = 0;
  const std::size_t nz = spec.shocks.size(), n = sol.grid.size();
  const double top = sol.grid.back();
  // Guess: save a third of output forever.
  sol.value.assign(nz, std::vector<double>(n));
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t i = 0; i < n; ++i) sol.value[z][i] = u(spec.phi(sol.grid[i], spec.shocks[z]) * 2 / 3) / (1 - spec.beta);
  }
  auto bracket = [&](std::size_t z, std::size_t i) {
    return detail::growth_bracket(spec, sol.grid[i], spec.shocks[z], top);
  };
  auto reward = [&](std::size_t z, std::size_t i, double next) {
    const double c = spec.phi(sol.grid[i], spec.shocks[z]) - next;
    return c > 0 ? u(c) : -std::numeric_limits<double>::infinity();
  };
  value_iteration(sol, spec.beta, bracket, reward, opt);
  if (polish) polish_growth(spec, sol);
  return sol;
}

/// Interior first-order residual u'(c) - beta E[v_k(k+, z+)] with the envelope
/// v_k = u'(c+) phi_k, over grid indices n/20 .. n-1-n/20 (or the midpoints
/// between them). Nodes whose policy sits on a grid bound are skipped.
inline EulerReport growth_euler(const GrowthSpec& spec, const PolicySolution& sol, bool midpoints = false) {
  const Utility u{spec.gamma};
  EulerReport rep;
  const std::size_t n = sol.grid.size(), nz = sol.num_states();
  const double top = sol.grid.back();
  std::vector<Interpolant> pol;
  for (std::size_t z = 0; z < nz; ++z) pol.push_back(sol.policy_interpolant(z));
  const double slack = 1e-9 * top;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t i = n / 20; i <= n - 1 - n / 20 - (midpoints ? 1 : 0); ++i) {
      const double k = midpoints ? (sol.grid[i] + sol.grid[i + 1]) / 2 : sol.grid[i];
      const double next = midpoints ? pol[z](k) : sol.policy[z][i];
      if (next <= spec.k_lo + slack || next >= top - slack) {
        ++rep.constrained_nodes;
        continue;
      }
      double expected = 0;
      for (std::size_t w = 0; w < nz; ++w) {
        const double next2 = std::clamp(pol[w](next), spec.k_lo, top);
        expected += sol.transition[z][w] * u.marginal(spec.phi(next, spec.shocks[w]) - next2) *
                    spec.phi_k(next, spec.shocks[w]);
      }
      const double resid = u.marginal(spec.phi(k, spec.shocks[z]) - next) - spec.beta * expected;
      ++rep.interior_nodes;
      rep.max_interior = std::max(rep.max_interior, std::abs(resid));
    }
  }
  return rep;
}

struct GrowthInterval {
  double k_prime = 0;
  double k_double_prime = 0;
  std::size_t k_prime_index = 0;
  std::size_t k_double_prime_index = 0;
  bool lemma2 = true;                    ///< min_z f(k, z) < k for every grid k > k'
  std::optional<double> lemma2_witness;  ///< first grid k where it fails
};

/// k'' = smallest grid k with max_z f(k, z) <= k; k' = largest grid k <= k''
/// where min_z f crosses the diagonal (min_z f(k, z) >= k). Needs a state pair
/// satisfying Assumption A(ii).
inline GrowthInterval growth_interval(const GrowthSpec& spec, const PolicySolution& sol) {
  if (!spec.dominance_pair()) {
    throw ValidationError(
        "growth: the ergodic interval needs two productivity states z' > z'' with identical transition rows "
        "(Assumption A(ii)); with " +
        std::to_string(spec.shocks.size()) + " state(s) k' and k'' coincide");
  }
  const std::size_t n = sol.grid.size();
  auto lowest = [&](std::size_t i) {
    double v = sol.policy[0][i];
    for (const auto& row : sol.policy) v = std::min(v, row[i]);
    return v;
  };
  auto highest = [&](std::size_t i) {
    double v = sol.policy[0][i];
    for (const auto& row : sol.policy) v = std::max(v, row[i]);
    return v;
  };
  GrowthInterval out;
  std::optional<std::size_t> kdd;
  for (std::size_t i = 0; i < n && !kdd; ++i) {
    if (highest(i) <= sol.grid[i]) kdd = i;
  }
  if (!kdd) {
    throw ValidationError("growth: k'' not found below the grid top; raise k_max (currently " +
                          format_decimal(sol.grid.back()) + ")");
  }
  std::optional<std::size_t> kp;
  for (std::size_t i = *kdd + 1; i-- > 0;) {
    if (lowest(i) >= sol.grid[i]) {
      kp = i;
      break;
    }
  }
  if (!kp) throw ValidationError("growth: min_z f stays below the diagonal on the whole grid; lower k_lo");
  if (*kp >= *kdd) {
    throw ValidationError("growth: k' = k'' at grid resolution (" + format_decimal(sol.grid[*kdd]) +
                          "); the states are too close to separate on this grid");
  }
  out.k_prime_index = *kp;
  out.k_double_prime_index = *kdd;
  out.k_prime = sol.grid[*kp];
  out.k_double_prime = sol.grid[*kdd];
  for (std::size_t i = *kp + 1; i < n; ++i) {
    if (!(lowest(i) < sol.grid[i])) {
      out.lemma2 = false;
      if (!out.lemma2_witness) out.lemma2_witness = sol.grid[i];
    }
  }
  return out;
}

}  // namespace regen_srs::econ

#endif  // REGEN_SRS_ECON_GROWTH_HPP
