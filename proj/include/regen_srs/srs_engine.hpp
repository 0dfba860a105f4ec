#ifndef REGEN_SRS_SRS_ENGINE_HPP
#define REGEN_SRS_SRS_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "regen_srs/ordered_core.hpp"
#include "regen_srs/parallel.hpp"
#include "regen_srs/regen_drivers.hpp"
#include "regen_srs/rng.hpp"

namespace regen_srs {

/// A monotone recursion together with its regenerative driver and state grid.
template <Scalar S>
struct SrsModel {
  StateGrid<S> grid;
  MonotoneMap<S> map;
  RegenDriver<S> driver;
};

/// One cycle with its shocks drawn up front, before any state is updated.
template <Scalar S>
struct DrawnCycle {
  Cycle cycle;
  std::vector<S> shocks;
};

template <Scalar S>
DrawnCycle<S> draw_cycle(const RegenDriver<S>& driver, CounterRng& rng) {
  DrawnCycle<S> d{driver.sample_cycle(rng), {}};
  d.shocks.reserve(d.cycle.length());
  for (EnvState z : d.cycle.states) d.shocks.push_back(driver.shock_law(z).sample(rng));
  return d;
}

/// Applies f along a whole drawn cycle.
template <Scalar S>
S run_cycle(const MonotoneMap<S>& map, const DrawnCycle<S>& d, S x) {
  for (const auto& v : d.shocks) x = map(x, v);
  return x;
}

template <Scalar S>
struct Trajectory {
  std::vector<S> states;             ///< X_0 .. X_horizon
  std::vector<std::size_t> regeneration;  ///< T_0 = 0 < T_1 < ... (all <= horizon)
  std::vector<EnvState> environment;  ///< Z_t used for step t -> t+1
  std::vector<S> shocks;              ///< xi_t used for step t -> t+1

  /// nu(t): index n with T_n <= t < T_{n+1}.
  std::size_t cycle_index_at(std::size_t t) const {
    auto it = std::upper_bound(regeneration.begin(), regeneration.end(), t);
    return static_cast<std::size_t>(it - regeneration.begin()) - 1;
  }

  /// t - T_{nu(t)}: position inside the current cycle.
  std::size_t age_at(std::size_t t) const { return t - regeneration[cycle_index_at(t)]; }
};

namespace detail {

template <Scalar S>
void require_in_interval(const MonotoneMap<S>& map, const S& x) {
  if (x < map.lower || map.upper < x) {
    throw DomainMismatch("initial state " + format_exact(x) + " is outside [" + format_exact(map.lower) + ", " +
                         format_exact(map.upper) + "]");
  }
}

/// Runs several starting points on one shared (Z, xi) realisation.
template <Scalar S>
std::vector<Trajectory<S>> simulate_common(const MonotoneMap<S>& map, const RegenDriver<S>& driver,
                                           std::span<const S> starts, std::size_t horizon, CounterRng& rng) {
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  std::vector<Trajectory<S>> out(starts.size());
  std::vector<S> x(starts.begin(), starts.end());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    require_in_interval(map, x[i]);
    out[i].states.reserve(horizon + 1);
    out[i].states.push_back(x[i]);
  }
  std::vector<std::size_t> regen;
  std::vector<EnvState> env;
  std::vector<S> shocks;
  std::size_t t = 0;
  while (t < horizon) {
    const auto d = draw_cycle(driver, rng);
    regen.push_back(t);
    for (std::size_t k = 0; k < d.cycle.length() && t < horizon; ++k, ++t) {
      env.push_back(d.cycle.states[k]);
      shocks.push_back(d.shocks[k]);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = map(x[i], d.shocks[k]);
        out[i].states.push_back(x[i]);
      }
    }
  }
  for (auto& tr : out) {
    tr.regeneration = regen;
    tr.environment = env;
    tr.shocks = shocks;
  }
  return out;
}

inline double binomial_se(double p, double n) { return std::sqrt(std::max(p * (1 - p), 0.0) / n); }

}  // namespace detail

/// X_{t+1} = f(X_t, xi_t^{Z_t}) from x0 for `horizon` steps. The environment is
/// started at a regeneration time (T_0 = 0). Output is a pure function of
/// (seed, stream).
template <Scalar S>
Trajectory<S> simulate(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const S& x0, std::size_t horizon,
                       std::uint64_t seed, std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  const S start[1] = {x0};
  return std::move(detail::simulate_common<S>(map, driver, start, horizon, rng).front());
}

template <Scalar S>
struct CoupledRun {
  Trajectory<S> top;
  Trajectory<S> bottom;
  std::uint64_t stream = 0;
};

/// Top- and bottom-started copies driven by the same realisation.
template <Scalar S>
CoupledRun<S> coupled_pair(const MonotoneMap<S>& map, const RegenDriver<S>& driver, std::size_t horizon,
                           std::uint64_t seed, std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  const S starts[2] = {map.upper, map.lower};
  auto runs = detail::simulate_common<S>(map, driver, starts, horizon, rng);
  return {std::move(runs[0]), std::move(runs[1]), stream};
}

struct SplittingEstimate {
  double c = 0;
  double eps_top = 0;     ///< P(top-started state after one block <= c)
  double eps_bottom = 0;  ///< P(bottom-started state after one block >= c)
  double se_top = 0;
  double se_bottom = 0;
  std::size_t trials = 0;
  std::size_t block = 1;

  double eps() const noexcept { return std::min(eps_top, eps_bottom); }
};

/// Monte Carlo splitting probabilities over blocks of `block` cycles. The top
/// and bottom events use independent draws (streams 2*stream_base and
/// 2*stream_base + 1); both inequalities are weak.
template <Scalar S>
SplittingEstimate estimate_splitting(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const S& c,
                                     std::size_t trials, std::uint64_t seed, std::size_t block = 1,
                                     std::uint64_t stream_base = 0) {
  if (trials < 1) throw ValidationError("splitting estimate needs at least one trial");
  if (block < 1) throw ValidationError("block length must be at least 1 cycle");
  detail::require_in_interval(map, c);
  CounterRng top_rng(seed, 2 * stream_base), bottom_rng(seed, 2 * stream_base + 1);
  std::size_t top_hits = 0, bottom_hits = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    S x = map.upper;
    for (std::size_t b = 0; b < block; ++b) x = run_cycle(map, draw_cycle(driver, top_rng), x);
    if (!(c < x)) ++top_hits;
    S y = map.lower;
    for (std::size_t b = 0; b < block; ++b) y = run_cycle(map, draw_cycle(driver, bottom_rng), y);
    if (!(y < c)) ++bottom_hits;
  }
  SplittingEstimate e;
  const double n = static_cast<double>(trials);
  e.c = to_double(c);
  e.eps_top = static_cast<double>(top_hits) / n;
  e.eps_bottom = static_cast<double>(bottom_hits) / n;
  e.se_top = detail::binomial_se(e.eps_top, n);
  e.se_bottom = detail::binomial_se(e.eps_bottom, n);
  e.trials = trials;
  e.block = block;
  return e;
}

struct SplittingSweep {
  std::vector<SplittingEstimate> estimates;
  std::size_t best = 0;

  const SplittingEstimate& best_estimate() const { return estimates.at(best); }
};

/// Evaluates each candidate c and reports argmax of min(eps_top, eps_bottom).
/// Candidate i uses its own stream pair, so candidates run concurrently.
template <Scalar S>
SplittingSweep splitting_sweep(const MonotoneMap<S>& map, const RegenDriver<S>& driver, std::span<const S> candidates,
                               std::size_t trials, std::uint64_t seed, std::size_t block = 1) {
  if (candidates.empty()) throw ValidationError("splitting sweep needs candidate points");
  SplittingSweep sweep;
  sweep.estimates = parallel_indexed<SplittingEstimate>(candidates.size(), [&](std::size_t i) {
    return estimate_splitting(map, driver, candidates[i], trials, seed, block, i);
  });
  for (std::size_t i = 1; i < sweep.estimates.size(); ++i) {
    if (sweep.estimates[i].eps() > sweep.estimates[sweep.best].eps()) sweep.best = i;
  }
  return sweep;
}

/// Y_0 = x0, Y_n = X_{T_n} for n = 1..n_cycles.
template <Scalar S>
std::vector<S> embedded_samples(const MonotoneMap<S>& map, const RegenDriver<S>& driver, const S& x0,
                                std::size_t n_cycles, std::uint64_t seed, std::uint64_t stream = 0) {
  if (n_cycles < 1) throw ValidationError("need at least one cycle");
  detail::require_in_interval(map, x0);
  CounterRng rng(seed, stream);
  std::vector<S> y;
  y.reserve(n_cycles + 1);
  y.push_back(x0);
  S x = x0;
  for (std::size_t n = 0; n < n_cycles; ++n) {
    x = run_cycle(map, draw_cycle(driver, rng), x);
    y.push_back(x);
  }
  return y;
}

/// Batch-means effective sample size of a scalar series.
inline double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (var <= 0) return static_cast<double>(n);
  const std::size_t batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const std::size_t size = n / batches;
  double bm_var = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    double m = 0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) m += xs[i];
    m /= static_cast<double>(size);
    bm_var += (m - mean) * (m - mean);
  }
  bm_var /= static_cast<double>(batches - 1);
  if (bm_var <= 0) return static_cast<double>(n);
  return std::min(static_cast<double>(n), static_cast<double>(n) * var / (static_cast<double>(size) * bm_var));
}

template <Scalar S>
struct LimitEstimate {
  DiscreteCdf<S> cdf;
  double effective_sample_size = 0;
  std::size_t samples = 0;
  std::size_t burn_in = 0;
  std::size_t streams = 1;
};

/// Time-average empirical law of X_t over t in (burn_in, burn_in + n], pooled
/// over `streams` independent runs (samples are split as evenly as possible).
template <Scalar S>
LimitEstimate<S> estimate_limit_distribution(const MonotoneMap<S>& map, const RegenDriver<S>& driver,
                                             const StateGrid<S>& grid, const S& x0, std::size_t burn_in,
                                             std::size_t samples, std::uint64_t seed, std::size_t streams = 1) {
  if (samples < 1) throw ValidationError("need at least one sample");
  if (streams < 1) throw ValidationError("need at least one stream");
  detail::require_in_interval(map, x0);
  struct Chunk {
    std::vector<long long> counts;
    double ess = 0;
  };
  auto chunks = parallel_indexed<Chunk>(streams, [&](std::size_t s) {
    const std::size_t n = samples / streams + (s < samples % streams ? 1 : 0);
    Chunk c;
    c.counts.assign(grid.size(), 0);
    if (n == 0) return c;
    CounterRng rng(seed, s);
    S x = x0;
    std::size_t t = 0;
    std::vector<double> series;
    series.reserve(n);
    while (t < burn_in + n) {
      const auto d = draw_cycle(driver, rng);
      for (std::size_t k = 0; k < d.shocks.size() && t < burn_in + n; ++k) {
        x = map(x, d.shocks[k]);
        ++t;
        if (t > burn_in) {
          ++c.counts[grid.ceil_index(x)];
          series.push_back(to_double(x));
        }
      }
    }
    c.ess = effective_sample_size(series);
    return c;
  });
  std::vector<long long> counts(grid.size(), 0);
  LimitEstimate<S> out;
  for (const auto& c : chunks) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += c.counts[i];
    out.effective_sample_size += c.ess;
  }
  std::vector<S> mass(grid.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = S(counts[i]) / S(static_cast<long long>(samples));
  if constexpr (!is_exact_v<S>) {
    double total = 0;
    for (auto m : mass) total += m;
    for (auto& m : mass) m /= total;
  }
  out.cdf = DiscreteCdf<S>(grid, std::move(mass));
  out.samples = samples;
  out.burn_in = burn_in;
  out.streams = streams;
  return out;
}

struct ContractionPoint {
  std::size_t k = 0;
  double distance = 0;
  double standard_error = 0;
};

/// d_k = uniform distance between the empirical laws of the top- and
/// bottom-started states at regeneration time T_{k*block}, k = 1..k_max.
/// Replication r runs on stream r with the pair coupled on common randomness.
template <Scalar S>
std::vector<ContractionPoint> contraction_profile(const MonotoneMap<S>& map, const RegenDriver<S>& driver,
                                                  std::size_t block, std::size_t k_max, std::size_t replications,
                                                  std::uint64_t seed) {
  if (k_max < 1) throw ValidationError("k_max must be at least 1");
  if (replications < 1) throw ValidationError("need at least one replication");
  if (block < 1) throw ValidationError("block length must be at least 1 cycle");
  using Path = std::vector<std::pair<S, S>>;
  auto paths = parallel_indexed<Path>(replications, [&](std::size_t r) {
    CounterRng rng(seed, r);
    S top = map.upper, bottom = map.lower;
    Path p;
    p.reserve(k_max);
    for (std::size_t k = 0; k < k_max; ++k) {
      for (std::size_t b = 0; b < block; ++b) {
        const auto d = draw_cycle(driver, rng);
        top = run_cycle(map, d, top);
        bottom = run_cycle(map, d, bottom);
      }
      p.emplace_back(top, bottom);
    }
    return p;
  });

  std::vector<ContractionPoint> out;
  const double n = static_cast<double>(replications);
  for (std::size_t k = 0; k < k_max; ++k) {
    std::vector<S> tops, bottoms, support{map.lower, map.upper};
    tops.reserve(replications);
    bottoms.reserve(replications);
    for (const auto& p : paths) {
      tops.push_back(p[k].first);
      bottoms.push_back(p[k].second);
    }
    support.insert(support.end(), tops.begin(), tops.end());
    support.insert(support.end(), bottoms.begin(), bottoms.end());
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    if (support.size() < 2) support.push_back(map.upper + S(1));
    const StateGrid<S> grid(support);
    const auto f_top = DiscreteCdf<S>::empirical(grid, tops);
    const auto f_bottom = DiscreteCdf<S>::empirical(grid, bottoms);
    double se = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      se = std::max({se, detail::binomial_se(to_double(f_top.cumulative()[i]), n),
                     detail::binomial_se(to_double(f_bottom.cumulative()[i]), n)});
    }
    out.push_back({k + 1, to_double(uniform_distance(f_top, f_bottom)), se});
  }
  return out;
}

/// Smallest k with (1 - eps)^k < target.
inline std::size_t geometric_steps(double eps, double target = 0.01) {
  if (!(eps > 0) || eps > 1) throw ValidationError("splitting probability must lie in (0, 1]");
  if (eps == 1) return 1;
  return static_cast<std::size_t>(std::floor(std::log(target) / std::log1p(-eps))) + 1;
}

/// Burn-in of 10 * block * E[tau] * k where (1 - eps)^k < 0.01.
inline std::size_t geometric_burn_in(double mean_cycle_length, double eps, std::size_t block = 1) {
  const double k = static_cast<double>(geometric_steps(eps));
  return static_cast<std::size_t>(std::ceil(10.0 * static_cast<double>(block) * mean_cycle_length * k));
}

struct BurnInPlan {
  std::size_t burn_in = 0;
  std::size_t block = 1;
  double mean_cycle_length = 0;
  SplittingEstimate splitting;
};

/// Finds a block length (doubling from 1) and a splitting point with a
/// detectable splitting probability, then sizes the burn-in from it.
/// A probability counts as detected once it has at least `min_hits` successes.
template <Scalar S>
BurnInPlan plan_burn_in(const SrsModel<S>& model, std::size_t trials, std::uint64_t seed,
                        std::size_t max_block = 256, std::size_t max_candidates = 33, std::size_t min_hits = 20) {
  BurnInPlan plan;
  const auto mean = mean_cycle_length(model.driver, trials, seed, 1u << 20);
  plan.mean_cycle_length = to_double(mean.value);
  std::vector<S> candidates;
  const std::size_t n = model.grid.size();
  const std::size_t stride = std::max<std::size_t>(1, (n - 1) / (max_candidates - 1));
  for (std::size_t i = 0; i < n; i += stride) candidates.push_back(model.grid[i]);
  if (candidates.back() != model.grid.top()) candidates.push_back(model.grid.top());
  const double threshold = static_cast<double>(min_hits) / static_cast<double>(trials);
  for (std::size_t block = 1; block <= max_block; block *= 2) {
    const auto sweep = splitting_sweep<S>(model.map, model.driver, candidates, trials, seed, block);
    if (sweep.best_estimate().eps() >= threshold) {
      plan.block = block;
      plan.splitting = sweep.best_estimate();
      plan.burn_in = geometric_burn_in(plan.mean_cycle_length, plan.splitting.eps(), block);
      return plan;
    }
  }
  throw NonConvergence("no splitting point detected up to block length " + std::to_string(max_block), 0.0,
                       static_cast<int>(max_block));
}

}  // namespace regen_srs

#endif  // REGEN_SRS_SRS_ENGINE_HPP
