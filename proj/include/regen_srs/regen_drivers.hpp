#ifndef REGEN_SRS_REGEN_DRIVERS_HPP
#define REGEN_SRS_REGEN_DRIVERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "regen_srs/errors.hpp"
#include "regen_srs/rng.hpp"
#include "regen_srs/scalar.hpp"

namespace regen_srs {

using EnvState = std::size_t;

template <Scalar S>
using Matrix = std::vector<std::vector<S>>;

/// One regeneration cycle: environment states z_{T_{n-1}}, ..., z_{T_n - 1}.
struct Cycle {
  std::vector<EnvState> states;

  std::size_t length() const noexcept { return states.size(); }
  friend bool operator==(const Cycle&, const Cycle&) = default;
};

template <Scalar S>
struct WeightedCycle {
  S probability;
  Cycle cycle;
};

/// Finite law G_z of the shock xi^z.
template <Scalar S>
class ShockLaw {
public:
  ShockLaw() = default;

  ShockLaw(std::vector<S> values, std::vector<S> probabilities)
      : values_(std::move(values)), probs_(std::move(probabilities)) {
    if (values_.empty() || values_.size() != probs_.size()) {
      throw ValidationError("shock law needs matching, nonempty value and probability lists");
    }
    S total = 0;
    for (const auto& p : probs_) {
      if (p < 0) throw ValidationError("shock law has a negative probability");
      total += p;
    }
    if (!is_unit_sum(total)) throw ValidationError("shock law probabilities sum to " + format_exact(total));
    cumulative_.resize(probs_.size());
    double run = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      run += to_double(probs_[i]);
      cumulative_[i] = run;
    }
  }

  static ShockLaw degenerate(const S& value) { return ShockLaw({value}, {S(1)}); }

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<S>& values() const noexcept { return values_; }
  const std::vector<S>& probabilities() const noexcept { return probs_; }

  const S& sample(CounterRng& rng) const {
    if (values_.size() == 1) return values_.front();
    return values_[rng.pick(cumulative_)];
  }

private:
  std::vector<S> values_;
  std::vector<S> probs_;
  std::vector<double> cumulative_;
};

/// Exact cycle law (possibly truncated). tail_mass is the probability of the
/// cycles that were not listed.
template <Scalar S>
struct CycleEnumeration {
  std::vector<WeightedCycle<S>> cycles;
  S tail_mass = 0;
  std::size_t max_length = 0;
};

struct EnumerationOptions {
  /// Zero disables enumeration (sampling only).
  std::size_t max_length = 64;
  /// Cap on simultaneously open partial paths; enumeration stops early past it.
  std::size_t max_paths = 1'000'000;
};

enum class DriverKind { MarkovAtom, Word, Explicit };

/// Regenerative environment {Z_t} plus the per-state shock laws G_z.
/// Immutable after construction; sampling takes the RNG explicitly.
template <Scalar S>
class RegenDriver {
public:
  DriverKind kind() const noexcept { return kind_; }
  std::size_t num_states() const noexcept { return shocks_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const ShockLaw<S>& shock_law(EnvState z) const { return shocks_.at(z); }
  const std::vector<ShockLaw<S>>& shock_laws() const noexcept { return shocks_; }
  const std::optional<CycleEnumeration<S>>& enumeration() const noexcept { return enumeration_; }
  const Matrix<S>& transition() const noexcept { return transition_; }
  EnvState start_state() const noexcept { return start_; }
  const std::vector<std::vector<EnvState>>& words() const noexcept { return words_; }

  /// Draws one i.i.d. cycle (states only).
  Cycle sample_cycle(CounterRng& rng) const {
    Cycle c;
    switch (kind_) {
      case DriverKind::Explicit:
        return enumeration_->cycles[rng.pick(explicit_cumulative_)].cycle;
      case DriverKind::MarkovAtom: {
        EnvState z = start_;
        do {
          c.states.push_back(z);
          z = rng.pick(rows_[z]);
        } while (z != start_);
        return c;
      }
      case DriverKind::Word: {
        c.states.push_back(start_);
        EnvState z = start_;
        for (;;) {
          z = rng.pick(rows_[z]);
          c.states.push_back(z);
          if (completes_word(c.states)) {
            c.states.pop_back();
            return c;
          }
        }
      }
    }
    return c;
  }

  /// Rebuilds the driver in another numeric backend. Exact when going to
  /// rationals; float conversion rounds.
  template <Scalar T>
  RegenDriver<T> convert() const {
    RegenDriver<T> out;
    out.kind_ = kind_;
    out.labels_ = labels_;
    out.start_ = start_;
    out.words_ = words_;
    out.max_word_ = max_word_;
    out.rows_ = rows_;
    out.explicit_cumulative_ = explicit_cumulative_;
    for (const auto& law : shocks_) {
      std::vector<T> v, p;
      for (const auto& x : law.values()) v.push_back(cast<T>(x));
      for (const auto& x : law.probabilities()) p.push_back(cast<T>(x));
      if constexpr (!is_exact_v<T>) renormalise(p);
      out.shocks_.emplace_back(std::move(v), std::move(p));
    }
    for (const auto& row : transition_) {
      std::vector<T> r;
      for (const auto& x : row) r.push_back(cast<T>(x));
      out.transition_.push_back(std::move(r));
    }
    if (enumeration_) {
      CycleEnumeration<T> e;
      e.max_length = enumeration_->max_length;
      e.tail_mass = cast<T>(enumeration_->tail_mass);
      for (const auto& wc : enumeration_->cycles) e.cycles.push_back({cast<T>(wc.probability), wc.cycle});
      out.enumeration_ = std::move(e);
    }
    return out;
  }

private:
  template <Scalar>
  friend class RegenDriver;
  template <Scalar T>
  friend RegenDriver<T> markov_atom_driver(Matrix<T>, EnvState, std::vector<ShockLaw<T>>, EnumerationOptions,
                                           std::vector<std::string>);
  template <Scalar T>
  friend RegenDriver<T> word_driver(Matrix<T>, std::vector<std::vector<EnvState>>, std::vector<ShockLaw<T>>,
                                    EnumerationOptions, std::vector<std::string>);
  template <Scalar T>
  friend RegenDriver<T> explicit_cycle_driver(std::vector<WeightedCycle<T>>, std::vector<ShockLaw<T>>,
                                              std::vector<std::string>);

  template <Scalar T>
  static T cast(const S& x) {
    if constexpr (std::is_same_v<S, T>) {
      return x;
    } else if constexpr (is_exact_v<T>) {
      return from_double<T>(x);
    } else {
      return to_double(x);
    }
  }

  template <Scalar T>
  static void renormalise(std::vector<T>& p) {
    T total = 0;
    for (const auto& x : p) total += x;
    for (auto& x : p) x /= total;
  }

  /// True when the path (z_0 = start, z_1, ..., z_t) has a word ending at t
  /// and t >= K, the longest word length.
  bool completes_word(const std::vector<EnvState>& path) const {
    const std::size_t t = path.size() - 1;
    if (t < max_word_) return false;
    for (const auto& w : words_) {
      if (std::equal(w.rbegin(), w.rend(), path.rbegin())) return true;
    }
    return false;
  }

  void finish(Matrix<S> transition, std::vector<ShockLaw<S>> shocks, std::vector<std::string> labels) {
    transition_ = std::move(transition);
    shocks_ = std::move(shocks);
    labels_ = std::move(labels);
    if (labels_.empty()) {
      for (std::size_t i = 0; i < shocks_.size(); ++i) labels_.push_back(std::to_string(i));
    }
    if (labels_.size() != shocks_.size()) throw ValidationError("label table size differs from number of states");
    rows_.clear();
    for (const auto& row : transition_) {
      std::vector<double> cum(row.size());
      double run = 0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        run += to_double(row[j]);
        cum[j] = run;
      }
      rows_.push_back(std::move(cum));
    }
  }

  DriverKind kind_ = DriverKind::Explicit;
  std::vector<std::string> labels_;
  std::vector<ShockLaw<S>> shocks_;
  std::optional<CycleEnumeration<S>> enumeration_;
  Matrix<S> transition_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> explicit_cumulative_;
  EnvState start_ = 0;
  std::vector<std::vector<EnvState>> words_;
  std::size_t max_word_ = 0;
};

namespace detail {

template <Scalar S>
void validate_stochastic(const Matrix<S>& m) {
  if (m.empty()) throw ValidationError("transition matrix is empty");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != m.size()) throw ValidationError("transition matrix is not square");
    S total = 0;
    for (const auto& p : m[i]) {
      if (p < 0) throw ValidationError("transition matrix has a negative entry in row " + std::to_string(i));
      total += p;
    }
    if (!is_unit_sum(total)) {
      throw ValidationError("transition matrix row " + std::to_string(i) + " sums to " + format_exact(total));
    }
  }
}

template <Scalar S>
void validate_shock_count(const Matrix<S>& m, const std::vector<ShockLaw<S>>& shocks) {
  if (shocks.size() != m.size()) {
    throw ValidationError("need one shock law per environment state (" + std::to_string(m.size()) + "), got " +
                          std::to_string(shocks.size()));
  }
}

/// States that can reach `target` along positive-probability transitions.
template <Scalar S>
std::vector<bool> can_reach(const Matrix<S>& m, EnvState target) {
  std::vector<bool> seen(m.size(), false);
  std::queue<EnvState> q;
  seen[target] = true;
  q.push(target);
  while (!q.empty()) {
    const EnvState j = q.front();
    q.pop();
    for (EnvState i = 0; i < m.size(); ++i) {
      if (!seen[i] && m[i][j] > 0) {
        seen[i] = true;
        q.push(i);
      }
    }
  }
  return seen;
}

template <Scalar S>
std::vector<bool> reachable_from(const Matrix<S>& m, EnvState source) {
  std::vector<bool> seen(m.size(), false);
  std::queue<EnvState> q;
  seen[source] = true;
  q.push(source);
  while (!q.empty()) {
    const EnvState i = q.front();
    q.pop();
    for (EnvState j = 0; j < m.size(); ++j) {
      if (!seen[j] && m[i][j] > 0) {
        seen[j] = true;
        q.push(j);
      }
    }
  }
  return seen;
}

/// Breadth-first enumeration of paths from `start`; `done(path)` says whether
/// the path's last state closes a cycle (the closing state is not part of it).
template <Scalar S, typename Done>
CycleEnumeration<S> enumerate_paths(const Matrix<S>& m, EnvState start, EnumerationOptions opt, Done done) {
  struct Partial {
    std::vector<EnvState> path;
    S prob;
  };
  CycleEnumeration<S> out;
  out.max_length = opt.max_length;
  std::vector<Partial> open{{{start}, S(1)}};
  for (std::size_t len = 1; len <= opt.max_length && !open.empty(); ++len) {
    std::vector<Partial> next;
    for (auto& p : open) {
      const EnvState z = p.path.back();
      for (EnvState j = 0; j < m.size(); ++j) {
        if (!(m[z][j] > 0)) continue;
        Partial q{p.path, p.prob * m[z][j]};
        q.path.push_back(j);
        if (done(q.path)) {
          q.path.pop_back();
          out.cycles.push_back({q.prob, Cycle{std::move(q.path)}});
        } else {
          next.push_back(std::move(q));
        }
      }
    }
    open = std::move(next);
    if (open.size() > opt.max_paths) break;
  }
  S tail = 0;
  for (const auto& p : open) tail += p.prob;
  out.tail_mass = tail;
  return out;
}

}  // namespace detail

/// Regeneration at successive visits to `atom` of a finite Markov chain.
/// Cycles are excursions from the atom; exact enumeration is truncated at
/// opt.max_length with the remaining probability reported as tail_mass.
template <Scalar S>
RegenDriver<S> markov_atom_driver(Matrix<S> transition, EnvState atom, std::vector<ShockLaw<S>> shocks,
                                  EnumerationOptions opt = {}, std::vector<std::string> labels = {}) {
  detail::validate_stochastic(transition);
  detail::validate_shock_count(transition, shocks);
  if (atom >= transition.size()) throw ValidationError("atom state out of range");
  const auto reach = detail::can_reach(transition, atom);
  for (std::size_t i = 0; i < reach.size(); ++i) {
    if (!reach[i]) throw ValidationError("atom is unreachable from state " + std::to_string(i));
  }
  RegenDriver<S> d;
  d.kind_ = DriverKind::MarkovAtom;
  d.start_ = atom;
  if (opt.max_length > 0) {
    d.enumeration_ = detail::enumerate_paths(transition, atom, opt,
                                             [atom](const std::vector<EnvState>& p) { return p.back() == atom; });
  }
  d.finish(std::move(transition), std::move(shocks), std::move(labels));
  return d;
}

/// Regeneration at completions of any of `words` (all ending in the same state,
/// none a contiguous sub-word of another). Successive regeneration times are at
/// least K = max word length apart; an occurrence ending earlier than that is
/// skipped even when it does not overlap the previous one.
template <Scalar S>
RegenDriver<S> word_driver(Matrix<S> transition, std::vector<std::vector<EnvState>> words,
                           std::vector<ShockLaw<S>> shocks, EnumerationOptions opt = {},
                           std::vector<std::string> labels = {}) {
  detail::validate_stochastic(transition);
  detail::validate_shock_count(transition, shocks);
  if (words.empty()) throw ValidationError("word driver needs at least one word");
  const std::size_t n = transition.size();
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& word = words[w];
    if (word.empty()) throw ValidationError("word " + std::to_string(w) + " is empty");
    for (auto z : word) {
      if (z >= n) throw ValidationError("word " + std::to_string(w) + " uses an unknown state");
    }
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
      if (!(transition[word[i]][word[i + 1]] > 0)) {
        throw ValidationError("word " + std::to_string(w) + " has zero path probability at position " +
                              std::to_string(i));
      }
    }
    if (word.back() != words.front().back()) {
      throw ValidationError("words must all end with the same state (word " + std::to_string(w) + " differs)");
    }
  }
  for (std::size_t a = 0; a < words.size(); ++a) {
    for (std::size_t b = 0; b < words.size(); ++b) {
      if (a == b) continue;
      const auto& small = words[a];
      const auto& big = words[b];
      if (small.size() <= big.size() &&
          std::search(big.begin(), big.end(), small.begin(), small.end()) != big.end()) {
        throw ValidationError("word " + std::to_string(a) + " is a sub-word of word " + std::to_string(b));
      }
    }
  }
  const EnvState start = words.front().back();
  const auto from_start = detail::reachable_from(transition, start);
  for (EnvState s = 0; s < n; ++s) {
    if (!from_start[s]) continue;
    const auto out = detail::reachable_from(transition, s);
    const bool hits = std::ranges::any_of(words, [&](const auto& w) { return out[w.front()]; });
    if (!hits) throw ValidationError("no word can occur after state " + std::to_string(s));
  }

  RegenDriver<S> d;
  d.kind_ = DriverKind::Word;
  d.start_ = start;
  d.words_ = std::move(words);
  for (const auto& w : d.words_) d.max_word_ = std::max(d.max_word_, w.size());
  if (opt.max_length > 0) {
    d.enumeration_ = detail::enumerate_paths(transition, start, opt,
                                             [&d](const std::vector<EnvState>& p) { return d.completes_word(p); });
  }
  d.finish(std::move(transition), std::move(shocks), std::move(labels));
  return d;
}

/// Cycles drawn i.i.d. from an explicit finite law.
template <Scalar S>
RegenDriver<S> explicit_cycle_driver(std::vector<WeightedCycle<S>> cycles, std::vector<ShockLaw<S>> shocks,
                                     std::vector<std::string> labels = {}) {
  if (cycles.empty()) throw ValidationError("explicit driver needs at least one cycle");
  S total = 0;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    if (!(cycles[i].probability > 0)) throw ValidationError("cycle " + std::to_string(i) + " has nonpositive probability");
    if (cycles[i].cycle.states.empty()) throw ValidationError("cycle " + std::to_string(i) + " is empty");
    for (auto z : cycles[i].cycle.states) {
      if (z >= shocks.size()) throw ValidationError("cycle " + std::to_string(i) + " uses a state without a shock law");
    }
    total += cycles[i].probability;
  }
  if (!is_unit_sum(total)) throw ValidationError("cycle probabilities sum to " + format_exact(total) + ", not 1");

  RegenDriver<S> d;
  d.kind_ = DriverKind::Explicit;
  double run = 0;
  for (const auto& c : cycles) {
    run += to_double(c.probability);
    d.explicit_cumulative_.push_back(run);
  }
  d.start_ = cycles.front().cycle.states.front();
  CycleEnumeration<S> e;
  for (const auto& c : cycles) e.max_length = std::max(e.max_length, c.cycle.length());
  e.cycles = std::move(cycles);
  d.enumeration_ = std::move(e);
  d.finish({}, std::move(shocks), std::move(labels));
  return d;
}

/// gcd of the supported cycle lengths is 1. Uses the enumerated support; with a
/// truncated enumeration a result of true is still conclusive.
template <Scalar S>
bool aperiodicity_check(const RegenDriver<S>& driver) {
  if (!driver.enumeration()) throw ValidationError("aperiodicity check needs an exact cycle enumeration");
  std::size_t g = 0;
  for (const auto& wc : driver.enumeration()->cycles) {
    if (wc.probability > 0) g = std::gcd(g, wc.cycle.length());
  }
  return g == 1;
}

template <Scalar S>
struct CycleLengthMean {
  S value = 0;
  double standard_error = 0;
  S tail_mass = 0;
  bool exact = false;
  std::size_t samples = 0;
};

/// E tau_1. Exact from the enumeration when present (a lower bound by the
/// listed tail mass if truncated); otherwise a Monte Carlo estimate over
/// `sample_budget` cycles of stream `stream`.
template <Scalar S>
CycleLengthMean<S> mean_cycle_length(const RegenDriver<S>& driver, std::size_t sample_budget = 0,
                                     std::uint64_t seed = 0, std::uint64_t stream = 0) {
  CycleLengthMean<S> out;
  if (driver.enumeration()) {
    for (const auto& wc : driver.enumeration()->cycles) {
      out.value += wc.probability * S(static_cast<long>(wc.cycle.length()));
    }
    out.tail_mass = driver.enumeration()->tail_mass;
    out.exact = true;
    return out;
  }
  if (sample_budget == 0) throw ValidationError("mean cycle length needs an enumeration or a sample budget");
  CounterRng rng(seed, stream);
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < sample_budget; ++i) {
    const double len = static_cast<double>(driver.sample_cycle(rng).length());
    sum += len;
    sum_sq += len * len;
  }
  const double n = static_cast<double>(sample_budget);
  const double mean = sum / n;
  const double var = n > 1 ? (sum_sq - n * mean * mean) / (n - 1) : 0.0;
  out.value = from_double<S>(mean);
  out.standard_error = std::sqrt(std::max(var, 0.0) / n);
  out.samples = sample_budget;
  return out;
}

}  // namespace regen_srs

#endif  // REGEN_SRS_REGEN_DRIVERS_HPP
