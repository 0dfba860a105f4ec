#ifndef REGEN_SRS_EXACT_SOLVER_HPP
#define REGEN_SRS_EXACT_SOLVER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "regen_srs/errors.hpp"
#include "regen_srs/ordered_core.hpp"
#include "regen_srs/parallel.hpp"
#include "regen_srs/regen_drivers.hpp"
#include "regen_srs/scalar.hpp"

namespace regen_srs {

struct ExactOptions {
  /// Upper bound on (state, shock) transitions pushed during one solve.
  std::uint64_t work_budget = 10'000'000;
  /// Largest admissible unlisted cycle probability. With a nonzero tail the
  /// embedded matrix is renormalised over the listed cycles and splitting
  /// probabilities become lower bounds.
  double max_tail_mass = 0.0;
};

/// Y_n = X_{T_n} on a finite grid; matrix(i, j) = P(Y_{n+1} = x_j | Y_n = x_i).
template <Scalar S>
struct EmbeddedChain {
  StateGrid<S> grid;
  Matrix<S> matrix;
  S tail_mass = 0;
};

template <Scalar S>
struct StationaryLaw {
  std::vector<S> pi;
  std::vector<std::size_t> recurrent;
  std::vector<std::size_t> transient;

  DiscreteCdf<S> as_cdf(const StateGrid<S>& grid) const { return DiscreteCdf<S>(grid, pi); }
};

template <Scalar S>
struct SplittingExact {
  S eps_top = 0;     ///< P(top-started state after one cycle <= c)
  S eps_bottom = 0;  ///< P(bottom-started state after one cycle >= c)
  S tail_mass = 0;
  S c = 0;

  S eps() const { return eps_top < eps_bottom ? eps_top : eps_bottom; }
};

namespace detail {

template <Scalar S>
using SparseLaw = std::vector<std::pair<std::size_t, S>>;

/// One-step kernels K_z(i, .) on the grid for every environment state.
template <Scalar S>
class StepKernels {
public:
  StepKernels(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const StateGrid<S>& grid)
      : kernels_(driver.num_states()) {
    for (EnvState z = 0; z < driver.num_states(); ++z) {
      const auto& law = driver.shock_law(z);
      kernels_[z].resize(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        SparseLaw<S> row;
        for (std::size_t s = 0; s < law.size(); ++s) {
          if (!(law.probabilities()[s] > 0)) continue;
          const S y = map(grid[i], law.values()[s]);
          const auto j = grid.index_of(y);
          if (!j) {
            throw GridClosureError("map leaves the grid: f(" + format_exact(grid[i]) + ", " +
                                   format_exact(law.values()[s]) + ") = " + format_exact(y) +
                                   " in environment state '" + driver.labels()[z] + "'");
          }
          row.emplace_back(*j, law.probabilities()[s]);
        }
        kernels_[z][i] = compact(std::move(row));
      }
    }
  }

  SparseLaw<S> step(const SparseLaw<S>& law, EnvState z, std::atomic<std::uint64_t>& work) const {
    SparseLaw<S> out;
    for (const auto& [i, p] : law) {
      for (const auto& [j, q] : kernels_[z][i]) out.emplace_back(j, p * q);
      work += kernels_[z][i].size();
    }
    return compact(std::move(out));
  }

  static SparseLaw<S> compact(SparseLaw<S> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseLaw<S> out;
    for (auto& e : v) {
      if (!out.empty() && out.back().first == e.first) {
        out.back().second += e.second;
      } else {
        out.push_back(std::move(e));
      }
    }
    return out;
  }

private:
  std::vector<std::vector<SparseLaw<S>>> kernels_;
};

template <Scalar S>
const CycleEnumeration<S>& checked_enumeration(const RegenDriver<S>& driver, const ExactOptions& opt) {
  if (!driver.enumeration()) throw ValidationError("exact solver needs a driver with cycle enumeration");
  const auto& e = *driver.enumeration();
  if (to_double(e.tail_mass) > opt.max_tail_mass || (opt.max_tail_mass == 0 && e.tail_mass != 0)) {
    throw BudgetExceeded("cycle enumeration leaves tail mass " + format_decimal(to_double(e.tail_mass)) +
                         " above the tolerance " + format_decimal(opt.max_tail_mass));
  }
  return e;
}

inline void check_budget(const std::atomic<std::uint64_t>& work, const ExactOptions& opt) {
  if (work.load() > opt.work_budget) {
    throw BudgetExceeded("exact enumeration exceeded its work budget of " + std::to_string(opt.work_budget) +
                         " transitions");
  }
}

/// Law after one full cycle started at grid index `start`, mixed over cycles.
template <Scalar S>
std::vector<S> cycle_end_law(const StepKernels<S>& kernels, const CycleEnumeration<S>& e, std::size_t grid_size,
                             std::size_t start, std::atomic<std::uint64_t>& work, const ExactOptions& opt) {
  std::vector<S> out(grid_size, S(0));
  for (const auto& wc : e.cycles) {
    SparseLaw<S> law{{start, S(1)}};
    for (EnvState z : wc.cycle.states) {
      law = kernels.step(law, z, work);
      check_budget(work, opt);
    }
    for (const auto& [j, p] : law) out[j] += wc.probability * p;
  }
  return out;
}

template <Scalar S>
S enumerated_mass(const CycleEnumeration<S>& e) {
  S total = 0;
  for (const auto& wc : e.cycles) total += wc.probability;
  return total;
}

/// Strongly connected components of the positive-entry graph (iterative Tarjan).
template <Scalar S>
std::vector<std::vector<std::size_t>> strong_components(const Matrix<S>& m) {
  const std::size_t n = m.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (m[i][j] > 0) adj[i].push_back(j);
    }
  }
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    std::vector<std::pair<std::size_t, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, next] = call.back();
      if (next < adj[v].size()) {
        const std::size_t w = adj[v][next++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        const std::size_t done = v;
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        if (low[done] == index[done]) {
          std::vector<std::size_t> comp;
          std::size_t w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp.push_back(w);
          } while (w != done);
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
      }
    }
  }
  return comps;
}

/// Solves a x = b. Rationals: denominators are cleared row by row and the
/// integer system is reduced with fraction-free (Bareiss) elimination, then
/// back-substituted exactly. Floats: Gaussian elimination with partial pivoting.
template <Scalar S>
std::vector<S> solve_linear(Matrix<S> a, std::vector<S> b) {
  const std::size_t n = a.size();
  if constexpr (is_exact_v<S>) {
    std::vector<std::vector<BigInt>> m(n, std::vector<BigInt>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
      BigInt l = boost::multiprecision::denominator(b[i]);
      for (const auto& x : a[i]) l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(x));
      for (std::size_t j = 0; j < n; ++j) m[i][j] = boost::multiprecision::numerator(a[i][j] * Rational(l));
      m[i][n] = boost::multiprecision::numerator(b[i] * Rational(l));
    }
    BigInt prev = 1;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      while (p < n && m[p][k] == 0) ++p;
      if (p == n) throw ValidationError("singular balance system");
      if (p != k) std::swap(m[p], m[k]);
      for (std::size_t i = k + 1; i < n; ++i) {
        for (std::size_t j = k + 1; j <= n; ++j) {
          m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
        }
        m[i][k] = 0;
      }
      prev = m[k][k];
    }
    std::vector<S> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
      Rational acc(m[ii][n]);
      for (std::size_t j = ii + 1; j < n; ++j) acc -= Rational(m[ii][j]) * x[j];
      x[ii] = acc / Rational(m[ii][ii]);
    }
    return x;
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
      }
      if (a[p][k] == 0) throw ValidationError("singular balance system");
      std::swap(a[p], a[k]);
      std::swap(b[p], b[k]);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = a[i][k] / a[k][k];
        if (f == 0) continue;
        for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
        b[i] -= f * b[k];
      }
    }
    std::vector<S> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = b[ii];
      for (std::size_t j = ii + 1; j < n; ++j) acc -= a[ii][j] * x[j];
      x[ii] = acc / a[ii][ii];
    }
    return x;
  }
}

}  // namespace detail

/// Exact embedded-chain matrix: entry (i, j) sums, over cycle types and shock
/// tuples, the probability that f iterated over one cycle maps x_i to x_j.
template <Scalar S>
EmbeddedChain<S> embedded_matrix(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const StateGrid<S>& grid,
                                 const ExactOptions& opt = {}) {
  const auto& e = detail::checked_enumeration(driver, opt);
  const detail::StepKernels<S> kernels(map, driver, grid);
  std::atomic<std::uint64_t> work{0};
  EmbeddedChain<S> chain{grid, {}, e.tail_mass};
  chain.matrix = parallel_indexed<std::vector<S>>(
      grid.size(), [&](std::size_t i) { return detail::cycle_end_law(kernels, e, grid.size(), i, work, opt); });
  if (e.tail_mass != 0) {
    const S listed = detail::enumerated_mass(e);
    for (auto& row : chain.matrix) {
      for (auto& p : row) p /= listed;
    }
  }
  return chain;
}

/// Exact solution of pi P = pi, sum(pi) = 1, on the unique closed communicating
/// class; states outside it are transient and get zero mass.
template <Scalar S>
StationaryLaw<S> stationary(const EmbeddedChain<S>& chain) {
  const auto& p = chain.matrix;
  const std::size_t n = p.size();
  const auto comps = detail::strong_components(p);
  std::vector<std::size_t> comp_of(n);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (auto i : comps[c]) comp_of[i] = c;
  }
  std::vector<std::size_t> closed;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    bool leaves = false;
    for (auto i : comps[c]) {
      for (std::size_t j = 0; j < n && !leaves; ++j) {
        if (p[i][j] > 0 && comp_of[j] != c) leaves = true;
      }
    }
    if (!leaves) closed.push_back(c);
  }
  if (closed.size() != 1) {
    std::string msg = "chain has " + std::to_string(closed.size()) + " recurrent classes:";
    for (auto c : closed) {
      msg += " {";
      for (std::size_t k = 0; k < comps[c].size(); ++k) msg += (k ? "," : "") + std::to_string(comps[c][k]);
      msg += "}";
    }
    throw ValidationError(msg);
  }
  const auto& cls = comps[closed.front()];
  const std::size_t m = cls.size();
  // Transposed balance system (P^T - I) pi = 0 with the last equation replaced
  // by the normalisation sum(pi) = 1.
  Matrix<S> a(m, std::vector<S>(m, S(0)));
  std::vector<S> b(m, S(0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      a[r][c] = p[cls[c]][cls[r]] - (r == c ? S(1) : S(0));
    }
  }
  for (std::size_t c = 0; c < m; ++c) a[m - 1][c] = 1;
  b[m - 1] = 1;
  const auto x = detail::solve_linear<S>(std::move(a), std::move(b));

  StationaryLaw<S> law;
  law.pi.assign(n, S(0));
  for (std::size_t k = 0; k < m; ++k) law.pi[cls[k]] = x[k];
  if constexpr (!is_exact_v<S>) {
    double total = 0;
    for (auto& v : law.pi) {
      v = std::max(v, 0.0);
      total += v;
    }
    for (auto& v : law.pi) v /= total;
  }
  law.recurrent = cls;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp_of[i] != closed.front()) law.transient.push_back(i);
  }
  return law;
}

/// Cycle-average limit law
///   mu = (1 / E tau) sum_cycles P(cycle) sum_{k < tau} Law(f^(k)(Y, xi_0..xi_{k-1})),  Y ~ pi.
template <Scalar S>
DiscreteCdf<S> limiting_mu(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const StateGrid<S>& grid,
                           const StationaryLaw<S>& pi, const ExactOptions& opt = {}) {
  const auto& e = detail::checked_enumeration(driver, opt);
  if (pi.pi.size() != grid.size()) throw DomainMismatch("stationary law and grid sizes differ");
  const detail::StepKernels<S> kernels(map, driver, grid);
  std::atomic<std::uint64_t> work{0};
  detail::SparseLaw<S> start;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (pi.pi[i] != 0) start.emplace_back(i, pi.pi[i]);
  }
  auto per_cycle = parallel_indexed<std::vector<S>>(e.cycles.size(), [&](std::size_t c) {
    std::vector<S> acc(grid.size(), S(0));
    const auto& wc = e.cycles[c];
    auto law = start;
    for (std::size_t k = 0; k < wc.cycle.length(); ++k) {
      for (const auto& [j, p] : law) acc[j] += wc.probability * p;
      if (k + 1 < wc.cycle.length()) {
        law = kernels.step(law, wc.cycle.states[k], work);
        detail::check_budget(work, opt);
      }
    }
    return acc;
  });
  std::vector<S> mass(grid.size(), S(0));
  S mean_length = 0;
  for (std::size_t c = 0; c < e.cycles.size(); ++c) {
    for (std::size_t j = 0; j < grid.size(); ++j) mass[j] += per_cycle[c][j];
    mean_length += e.cycles[c].probability * S(static_cast<long>(e.cycles[c].cycle.length()));
  }
  for (auto& m : mass) m /= mean_length;
  return DiscreteCdf<S>(grid, std::move(mass));
}

namespace detail {

template <Scalar S>
SplittingExact<S> splitting_from_laws(const std::vector<S>& top_law, const std::vector<S>& bottom_law,
                                      const StateGrid<S>& grid, const S& c, const S& tail) {
  SplittingExact<S> out;
  out.c = c;
  out.tail_mass = tail;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(c < grid[j])) out.eps_top += top_law[j];
    if (!(grid[j] < c)) out.eps_bottom += bottom_law[j];
  }
  return out;
}

}  // namespace detail

/// Exact (eps_top, eps_bottom) for one cycle from the grid top and bottom.
/// Truncated enumerations give lower bounds (unlisted cycles count as misses).
template <Scalar S>
SplittingExact<S> splitting_exact(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const StateGrid<S>& grid,
                                  const S& c, const ExactOptions& opt = {}) {
  const auto& e = detail::checked_enumeration(driver, opt);
  const detail::StepKernels<S> kernels(map, driver, grid);
  std::atomic<std::uint64_t> work{0};
  const auto top = detail::cycle_end_law(kernels, e, grid.size(), grid.size() - 1, work, opt);
  const auto bottom = detail::cycle_end_law(kernels, e, grid.size(), 0, work, opt);
  return detail::splitting_from_laws(top, bottom, grid, c, e.tail_mass);
}

/// splitting_exact at every grid point; returns the argmax of min(eps_top, eps_bottom)
/// (lowest such grid point on ties).
template <Scalar S>
SplittingExact<S> best_splitting_exact(const MonotoneMap<S>& map, const RegenDriver<S>& driver,
                                       const StateGrid<S>& grid, const ExactOptions& opt = {}) {
  const auto& e = detail::checked_enumeration(driver, opt);
  const detail::StepKernels<S> kernels(map, driver, grid);
  std::atomic<std::uint64_t> work{0};
  const auto top = detail::cycle_end_law(kernels, e, grid.size(), grid.size() - 1, work, opt);
  const auto bottom = detail::cycle_end_law(kernels, e, grid.size(), 0, work, opt);
  SplittingExact<S> best = detail::splitting_from_laws(top, bottom, grid, grid[0], e.tail_mass);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    auto cand = detail::splitting_from_laws(top, bottom, grid, grid[i], e.tail_mass);
    if (best.eps() < cand.eps()) best = std::move(cand);
  }
  return best;
}

/// (1 - eps)^k exactly (in the backend's arithmetic).
template <Scalar S>
S geometric_bound(const S& eps, unsigned k) {
  if (!(eps > 0) || S(1) < eps) throw ValidationError("eps must lie in (0, 1]");
  S out = 1;
  const S base = S(1) - eps;
  for (unsigned i = 0; i < k; ++i) out *= base;
  return out;
}

}  // namespace regen_srs

#endif  // REGEN_SRS_EXACT_SOLVER_HPP
