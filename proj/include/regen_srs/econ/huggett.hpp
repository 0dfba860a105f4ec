#ifndef REGEN_SRS_ECON_HUGGETT_HPP
#define REGEN_SRS_ECON_HUGGETT_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "regen_srs/econ/common.hpp"

namespace regen_srs::econ {

/// Income-fluctuation problem
///   v(a, e) = max u(c) + beta E[v(a+, e+) | e]  s.t.  c + a+/R <= a + e, a+ >= a_lower.
struct HuggettSpec {
  double gamma = 1.5;
  double beta = 0.95;
  double R = 1.03;
  std::vector<double> endowments;
  Matrix<double> transition;
  double a_lower = -2.0;
  double a_max = 20.0;
  std::size_t nodes = 500;
  double curvature = 1.0;  ///< geometric stretching of the asset grid near a_lower
  std::vector<std::string> labels;

  std::vector<Check> checks() const {
    using Res = std::pair<bool, std::string>;
    std::vector<Check> out;
    out.push_back(run_check("gamma > 1", [&] { return Res{gamma > 1, "huggett: gamma must exceed 1"}; }));
    out.push_back(run_check("0 < beta < 1/R", [&] {
      return Res{R > 0 && beta > 0 && beta * R < 1, "huggett: need R > 0 and 0 < beta < 1/R"};
    }));
    out.push_back(run_check("endowments", [&] {
      if (endowments.size() < 2) return Res{false, "huggett: need at least two endowment states"};
      for (std::size_t i = 0; i < endowments.size(); ++i) {
        if (!(endowments[i] > 0)) return Res{false, "huggett: endowments must be positive"};
        if (i > 0 && !(endowments[i - 1] < endowments[i])) {
          return Res{false, "huggett: endowments must be strictly increasing"};
        }
      }
      return Res{true, ""};
    }));
    out.push_back(run_check("transition stochastic, all entries positive", [&] {
      validate_transition(transition, endowments.size(), true, "huggett");
      return Res{true, ""};
    }));
    out.push_back(run_check("borrowing limit a_lower + e^1 - a_lower/R > 0", [&] {
      const bool ok = a_lower < 0 && !endowments.empty() && a_lower + endowments.front() - a_lower / R > 0;
      if (!(a_lower < 0)) return Res{false, "huggett: a_lower must be negative, got " + format_decimal(a_lower)};
      const double slack = endowments.empty() ? 0 : a_lower + endowments.front() - a_lower / R;
      return Res{ok, "huggett: borrowing limit violates a_lower + e^1 - a_lower/R > 0 (value " + format_decimal(slack) +
                         " at a_lower = " + format_decimal(a_lower) + ")"};
    }));
    out.push_back(run_check("grid", [&] {
      return Res{a_max > a_lower && nodes >= 4, "huggett: need a_max > a_lower and at least 4 nodes"};
    }));
    if (!labels.empty()) {
      out.push_back(run_check("labels", [&] {
        return Res{labels.size() == endowments.size(), "huggett: one label per endowment state"};
      }));
    }
    return out;
  }

  /// Throws ValidationError naming the first violated condition.
  void validate() const { throw_first_failure(checks()); }

  std::vector<double> grid() const { return stretched_grid(a_lower, a_max, nodes, curvature); }
};

/// Largest a+ keeping consumption positive, capped at a_max.
inline double huggett_choice_cap(const HuggettSpec& spec, double cash) {
  const double rc = spec.R * cash;
  return std::max(spec.a_lower, std::min(spec.a_max, rc - 1e-9 * std::max(1.0, std::abs(rc))));
}

/// Euler time iteration from the VFI policy: a+ solves u'(c) = beta R E[u'(c+)],
/// or a+ = a_lower where the borrowing constraint binds.
inline void polish_huggett(const HuggettSpec& spec, PolicySolution& sol, const PolishOptions& opt = {}) {
  const Utility u{spec.gamma};
  const std::size_t nz = sol.num_states();
  const double R = spec.R;
  auto bracket = [&](std::size_t z, std::size_t i) {
    return std::pair{spec.a_lower, huggett_choice_cap(spec, sol.grid[i] + spec.endowments[z])};
  };
  auto gap = [&](const std::vector<Interpolant>& pol, std::size_t z, std::size_t i, double next) {
    double expected = 0;
    for (std::size_t w = 0; w < nz; ++w) {
      const double next2 = std::clamp(pol[w](next), spec.a_lower, spec.a_max);
      expected += sol.transition[z][w] * u.marginal(next + spec.endowments[w] - next2 / R);
    }
    return u.marginal(sol.grid[i] + spec.endowments[z] - next / R) - spec.beta * R * expected;
  };
  time_iteration(sol, bracket, gap, opt);
}

/// Value iteration, then Euler polishing of the policy unless `polish` is off.
inline PolicySolution solve_huggett(const HuggettSpec& spec, const VfiOptions& opt = {}, bool polish = true) {
  spec.validate();
  const Utility u{spec.gamma};
  PolicySolution sol;
  sol.model = "huggett";
  sol.grid = spec.grid();
  sol.shock_values = spec.endowments;
  sol.shock_labels = spec.labels;
  if (sol.shock_labels.empty()) {
    for (double e : spec.endowments) sol.shock_labels.push_back("e=" + format_decimal(e));
  }
  sol.transition = spec.transition;
  sol.lower = spec.a_lower;
  const std::size_t nz = spec.endowments.size(), n = sol.grid.size();
  const double R = spec.R;
  // Start from the value of keeping assets constant forever.
  sol.value.assign(nz, std::vector<double>(n));
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t i = 0; i < n; ++i) {
      sol.value[z][i] = u(sol.grid[i] * (1 - 1 / R) + spec.endowments[z]) / (1 - spec.beta);
    }
  }
  auto bracket = [&](std::size_t z, std::size_t i) {
    return std::pair{spec.a_lower, huggett_choice_cap(spec, sol.grid[i] + spec.endowments[z])};
  };
  auto reward = [&](std::size_t z, std::size_t i, double next) {
    const double c = sol.grid[i] + spec.endowments[z] - next / R;
    return c > 0 ? u(c) : -std::numeric_limits<double>::infinity();
  };
  value_iteration(sol, spec.beta, bracket, reward, opt);
  if (polish) polish_huggett(spec, sol);
  return sol;
}

/// c = a + e - a+/R at every node.
inline Matrix<double> huggett_consumption(const HuggettSpec& spec, const PolicySolution& sol) {
  Matrix<double> c(sol.num_states(), std::vector<double>(sol.grid.size()));
  for (std::size_t z = 0; z < sol.num_states(); ++z) {
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
      c[z][i] = sol.grid[i] + spec.endowments[z] - sol.policy[z][i] / spec.R;
    }
  }
  return c;
}

/// Euler residual u'(c) - beta R E[u'(c+)] over the middle 90% of the grid
/// (index n/20 .. n-1-n/20). Zero when a+ > a_lower, nonnegative when the
/// borrowing constraint binds. With `midpoints` the residual is taken halfway
/// between nodes instead, policy interpolated.
inline EulerReport huggett_euler(const HuggettSpec& spec, const PolicySolution& sol, bool midpoints = false) {
  const Utility u{spec.gamma};
  EulerReport rep;
  const std::size_t n = sol.grid.size(), nz = sol.num_states();
  std::vector<Interpolant> pol;
  for (std::size_t z = 0; z < nz; ++z) pol.push_back(sol.policy_interpolant(z));
  const double slack = 1e-9 * (spec.a_max - spec.a_lower);
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t i = n / 20; i <= n - 1 - n / 20 - (midpoints ? 1 : 0); ++i) {
      const double a = midpoints ? (sol.grid[i] + sol.grid[i + 1]) / 2 : sol.grid[i];
      const double next = midpoints ? std::max(spec.a_lower, pol[z](a)) : sol.policy[z][i];
      if (next >= spec.a_max - slack) continue;
      const double c = a + spec.endowments[z] - next / spec.R;
      double expected = 0;
      for (std::size_t w = 0; w < nz; ++w) {
        const double next2 = std::clamp(pol[w](next), spec.a_lower, spec.a_max);
        expected += sol.transition[z][w] * u.marginal(next + spec.endowments[w] - next2 / spec.R);
      }
      const double resid = u.marginal(c) - spec.beta * spec.R * expected;
      if (next <= spec.a_lower + slack) {
        ++rep.constrained_nodes;
        rep.max_constrained_violation = std::max(rep.max_constrained_violation, -resid);
      } else {
        ++rep.interior_nodes;
        rep.max_interior = std::max(rep.max_interior, std::abs(resid));
      }
    }
  }
  return rep;
}

struct LemmaOneReport {
  bool part_i = true;                  ///< every grid a > a_lower has some e with f(a, e) < a
  std::optional<double> part_i_witness;  ///< first failing a, if any
  std::optional<double> a_hat;         ///< smallest grid a with f(a', e) < a' for all a' > a, all e
};

inline LemmaOneReport huggett_lemma1(const PolicySolution& sol) {
  LemmaOneReport rep;
  const std::size_t n = sol.grid.size();
  for (std::size_t i = 1; i < n; ++i) {
    double lowest = sol.policy[0][i];
    for (const auto& row : sol.policy) lowest = std::min(lowest, row[i]);
    if (!(lowest < sol.grid[i])) {
      rep.part_i = false;
      if (!rep.part_i_witness) rep.part_i_witness = sol.grid[i];
    }
  }
  // Scan downward from the top while every state is strictly dissaving.
  std::size_t k = n;
  while (k > 1) {
    bool all_below = true;
    for (const auto& row : sol.policy) all_below = all_below && row[k - 1] < sol.grid[k - 1];
    if (!all_below) break;
    --k;
  }
  if (k < n) rep.a_hat = sol.grid[k - 1];
  return rep;
}

struct HuggettBounds {
  double a_bar = 0;
  std::size_t a_bar_index = 0;
  double c = 0;  ///< splitting point (a_lower + a_bar) / 2
  bool degenerate = false;  ///< a_bar == a_lower: the SRS sits at the borrowing limit
  std::vector<std::size_t> down_states;  ///< endowment sequence pushing a from a_bar below c
  std::vector<double> down_path;
  std::vector<std::size_t> up_states;    ///< endowment sequence pushing a from a_lower above c
  std::vector<double> up_path;
};

/// a_bar = smallest grid a with max_e f(a, e) <= a, then the two finite
/// endowment sequences of the mixing argument, iterated on the grid-rounded map
/// (each step must move at least one cell).
inline HuggettBounds huggett_bounds(const PolicySolution& sol) {
  const std::size_t n = sol.grid.size(), nz = sol.num_states();
  HuggettBounds b;
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < n && !found; ++i) {
    double highest = sol.policy[0][i];
    for (const auto& row : sol.policy) highest = std::max(highest, row[i]);
    if (highest <= sol.grid[i]) found = i;
  }
  if (!found) {
    throw ValidationError("huggett: a_bar not found below the grid top; enlarge a_max (currently " +
                          format_decimal(sol.grid.back()) + ")");
  }
  b.a_bar_index = *found;
  b.a_bar = sol.grid[*found];
  b.c = (sol.grid.front() + b.a_bar) / 2;
  if (*found == 0) {
    b.degenerate = true;
    return b;
  }
  const auto compiled = compile_to_srs(sol, 0, {0, 0});
  const auto& next = compiled.next_index;
  std::size_t i = *found;
  b.down_path.push_back(sol.grid[i]);
  while (!(sol.grid[i] < b.c)) {
    std::size_t z_best = 0;
    for (std::size_t z = 1; z < nz; ++z) {
      if (next[z][i] < next[z_best][i]) z_best = z;
    }
    if (next[z_best][i] >= i) {
      throw ValidationError("huggett: grid too coarse to certify the downward mixing sequence at a = " +
                            format_decimal(sol.grid[i]));
    }
    i = next[z_best][i];
    b.down_states.push_back(z_best);
    b.down_path.push_back(sol.grid[i]);
  }
  i = 0;
  b.up_path.push_back(sol.grid[i]);
  while (!(sol.grid[i] > b.c)) {
    std::size_t z_best = 0;
    for (std::size_t z = 1; z < nz; ++z) {
      if (next[z][i] > next[z_best][i]) z_best = z;
    }
    if (next[z_best][i] <= i) {
      throw ValidationError("huggett: grid too coarse to certify the upward mixing sequence at a = " +
                            format_decimal(sol.grid[i]));
    }
    i = next[z_best][i];
    b.up_states.push_back(z_best);
    b.up_path.push_back(sol.grid[i]);
  }
  return b;
}

}  // namespace regen_srs::econ

#endif  // REGEN_SRS_ECON_HUGGETT_HPP
