#ifndef REGEN_SRS_ORDERED_CORE_HPP
#define REGEN_SRS_ORDERED_CORE_HPP

#include <algorithm>
#include <functional>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regen_srs/errors.hpp"
#include "regen_srs/scalar.hpp"

namespace regen_srs {

/// Finite, strictly increasing set of states. front() is the bottom element and
/// back() the top. Points are kept in the caller's units; to_unit/from_unit give
/// the affine image on [0, 1].
template <Scalar S>
class StateGrid {
public:
  StateGrid() = default;

  explicit StateGrid(std::vector<S> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw ValidationError("state grid needs at least two points");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i - 1] < points_[i])) {
        throw ValidationError("state grid points must be strictly increasing (index " +
                              std::to_string(i) + ")");
      }
    }
  }

  static StateGrid uniform(const S& lo, const S& hi, std::size_t n) {
    if (n < 2) throw ValidationError("uniform grid needs n >= 2");
    std::vector<S> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = lo + (hi - lo) * S(static_cast<long>(i)) / S(static_cast<long>(n - 1));
    }
    pts.back() = hi;
    return StateGrid(std::move(pts));
  }

  std::size_t size() const noexcept { return points_.size(); }
  const S& operator[](std::size_t i) const { return points_[i]; }
  const S& bottom() const { return points_.front(); }
  const S& top() const { return points_.back(); }
  std::span<const S> points() const noexcept { return points_; }

  bool contains_interval_point(const S& x) const { return !(x < bottom()) && !(top() < x); }

  /// Index of x if it is exactly a grid point.
  std::optional<std::size_t> index_of(const S& x) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), x);
    if (it == points_.end() || *it != x) return std::nullopt;
    return static_cast<std::size_t>(it - points_.begin());
  }

  /// Smallest grid index whose point is >= x (x must lie in the interval).
  std::size_t ceil_index(const S& x) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), x);
    if (it == points_.end()) throw DomainMismatch("state above grid top");
    return static_cast<std::size_t>(it - points_.begin());
  }

  /// Largest grid index whose point is <= x (clamped to the bottom).
  std::size_t floor_index(const S& x) const {
    auto it = std::upper_bound(points_.begin(), points_.end(), x);
    if (it == points_.begin()) return 0;
    return static_cast<std::size_t>(it - points_.begin()) - 1;
  }

  S to_unit(const S& x) const { return (x - bottom()) / (top() - bottom()); }
  S from_unit(const S& u) const { return bottom() + u * (top() - bottom()); }

  friend bool operator==(const StateGrid&, const StateGrid&) = default;

private:
  std::vector<S> points_;
};

/// Probability law on a StateGrid. F(x) = P(X <= x), right-continuous.
template <Scalar S>
class DiscreteCdf {
public:
  DiscreteCdf() = default;

  DiscreteCdf(StateGrid<S> grid, std::vector<S> mass) : grid_(std::move(grid)), mass_(std::move(mass)) {
    if (mass_.size() != grid_.size()) throw ValidationError("mass vector length differs from grid size");
    S total = 0;
    for (const auto& m : mass_) {
      if (m < 0) throw ValidationError("negative probability mass");
      total += m;
    }
    if (!is_unit_sum(total)) {
      throw ValidationError("probability masses sum to " + format_exact(total) + ", not 1");
    }
    cdf_.resize(mass_.size());
    S run = 0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      run += mass_[i];
      cdf_[i] = run < S(1) ? run : S(1);
    }
    // Removes float round-off in the final partial sum.
    cdf_.back() = 1;
  }

  static DiscreteCdf point_mass(StateGrid<S> grid, std::size_t index) {
    std::vector<S> m(grid.size(), S(0));
    m.at(index) = 1;
    return DiscreteCdf(std::move(grid), std::move(m));
  }

  /// Empirical law of samples, each attributed to the smallest grid point >= it.
  /// F is then exact at every grid point: F(x_i) = #{s <= x_i} / n.
  static DiscreteCdf empirical(StateGrid<S> grid, std::span<const S> samples) {
    if (samples.empty()) throw ValidationError("empirical CDF needs at least one sample");
    std::vector<long long> counts(grid.size(), 0);
    for (const auto& s : samples) {
      if (!grid.contains_interval_point(s)) throw DomainMismatch("sample outside the grid interval");
      ++counts[grid.ceil_index(s)];
    }
    std::vector<S> m(grid.size());
    const S n = S(static_cast<long long>(samples.size()));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = S(counts[i]) / n;
    if constexpr (!is_exact_v<S>) {
      // Normalise so float mass sums pass the 1e-12 check for any sample count.
      double total = 0;
      for (auto v : m) total += v;
      for (auto& v : m) v /= total;
    }
    return DiscreteCdf(std::move(grid), std::move(m));
  }

  const StateGrid<S>& grid() const noexcept { return grid_; }
  std::span<const S> mass() const noexcept { return mass_; }
  std::span<const S> cumulative() const noexcept { return cdf_; }

  /// F(x) for any real x.
  S operator()(const S& x) const {
    const auto& pts = grid_.points();
    auto it = std::upper_bound(pts.begin(), pts.end(), x);
    if (it == pts.begin()) return S(0);
    return cdf_[static_cast<std::size_t>(it - pts.begin()) - 1];
  }

  /// F(x-) = P(X < x).
  S left_limit(const S& x) const {
    const auto& pts = grid_.points();
    auto it = std::lower_bound(pts.begin(), pts.end(), x);
    if (it == pts.begin()) return S(0);
    return cdf_[static_cast<std::size_t>(it - pts.begin()) - 1];
  }

  S mean() const {
    S acc = 0;
    for (std::size_t i = 0; i < mass_.size(); ++i) acc += mass_[i] * grid_[i];
    return acc;
  }

  /// CSV with header x,mass,cdf and 17-significant-digit decimals.
  void write_csv(std::ostream& os) const {
    os << "x,mass,cdf\n";
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      os << format_decimal(to_double(grid_[i])) << ',' << format_decimal(to_double(mass_[i])) << ','
         << format_decimal(to_double(cdf_[i])) << '\n';
    }
  }

private:
  StateGrid<S> grid_;
  std::vector<S> mass_;
  std::vector<S> cdf_;
};

/// Kernel f(x, v) of X_{t+1} = f(X_t, v). The map owns its state interval
/// [lower, upper]; eval must stay inside it and be nondecreasing in x.
template <Scalar S>
struct MonotoneMap {
  std::function<S(const S& state, const S& shock)> eval;
  S lower{};
  S upper{};
  std::string description;

  S operator()(const S& x, const S& v) const { return eval(x, v); }
};

template <Scalar S>
struct MonotonicityViolation {
  S shock;
  S x1;
  S x2;
  S f1;
  S f2;
};

template <Scalar S>
struct RangeViolation {
  S shock;
  S x;
  S fx;
};

template <Scalar S>
struct MonotoneReport {
  std::vector<MonotonicityViolation<S>> order;
  std::vector<RangeViolation<S>> range;

  bool ok() const noexcept { return order.empty() && range.empty(); }
};

/// Scans every shock value and adjacent grid pair; adjacent pairs suffice since
/// the order on the grid is total.
template <Scalar S>
MonotoneReport<S> verify_monotone(const MonotoneMap<S>& map, const StateGrid<S>& grid, std::span<const S> shocks) {
  if (shocks.empty()) throw ValidationError("verify_monotone needs at least one shock value");
  MonotoneReport<S> report;
  for (const auto& v : shocks) {
    S prev = map(grid[0], v);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const S cur = i == 0 ? prev : map(grid[i], v);
      if (cur < map.lower || map.upper < cur) report.range.push_back({v, grid[i], cur});
      if (i > 0 && cur < prev) report.order.push_back({v, grid[i - 1], grid[i], prev, cur});
      prev = cur;
    }
  }
  return report;
}

namespace detail {

template <Scalar S>
void require_same_interval(const DiscreteCdf<S>& f, const DiscreteCdf<S>& g) {
  if (f.grid().bottom() != g.grid().bottom() || f.grid().top() != g.grid().top()) {
    throw DomainMismatch("distributions are defined on different intervals");
  }
}

/// Sorted union of both grids' points: the jump points of either CDF.
template <Scalar S>
std::vector<S> merged_points(const DiscreteCdf<S>& f, const DiscreteCdf<S>& g) {
  std::vector<S> out;
  out.reserve(f.grid().size() + g.grid().size());
  std::ranges::merge(f.grid().points(), g.grid().points(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <Scalar S>
S abs_value(const S& x) {
  return x < 0 ? S(-x) : x;
}

}  // namespace detail

/// sup_x |F(x) - G(x)|. Both are right-continuous step functions, so the
/// supremum is attained at a jump point of one of them.
template <Scalar S>
S uniform_distance(const DiscreteCdf<S>& f, const DiscreteCdf<S>& g) {
  detail::require_same_interval(f, g);
  S best = 0;
  for (const auto& x : detail::merged_points(f, g)) {
    const S d = detail::abs_value<S>(f(x) - g(x));
    if (best < d) best = d;
  }
  return best;
}

/// True iff F(x) >= G(x) everywhere, i.e. F is stochastically below G.
/// Float CDFs are compared up to the unit-sum tolerance (partial sums of equal
/// laws can differ in the last bit).
template <Scalar S>
bool stochastic_dominance(const DiscreteCdf<S>& f, const DiscreteCdf<S>& g) {
  detail::require_same_interval(f, g);
  const S slack = S(unit_sum_tolerance<S>());
  for (const auto& x : detail::merged_points(f, g)) {
    if (f(x) + slack < g(x)) return false;
  }
  return true;
}

/// Law of map(X, v) for X ~ f, expressed on `target`. Throws GridClosureError
/// if an image point is not in `target`.
template <Scalar S>
DiscreteCdf<S> pushforward(const DiscreteCdf<S>& f, const MonotoneMap<S>& map, const S& shock,
                           const StateGrid<S>& target) {
  std::vector<S> m(target.size(), S(0));
  for (std::size_t i = 0; i < f.grid().size(); ++i) {
    if (f.mass()[i] == 0) continue;
    const S y = map(f.grid()[i], shock);
    const auto j = target.index_of(y);
    if (!j) throw GridClosureError("pushforward image " + format_exact(y) + " is not a target grid point");
    m[*j] += f.mass()[i];
  }
  return DiscreteCdf<S>(target, std::move(m));
}

}  // namespace regen_srs

#endif  // REGEN_SRS_ORDERED_CORE_HPP
