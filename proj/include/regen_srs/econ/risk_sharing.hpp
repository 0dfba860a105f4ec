#ifndef REGEN_SRS_ECON_RISK_SHARING_HPP
#define REGEN_SRS_ECON_RISK_SHARING_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "regen_srs/econ/common.hpp"

namespace regen_srs::econ {

struct Interval {
  double lo = 0;
  double hi = 0;

  double clamp(double c) const { return std::clamp(c, lo, hi); }
  bool contains(double c) const { return lo <= c && c <= hi; }
};

/// Two agents, aggregate income Y, agent 1 receives y and agent 2 Y - y.
/// Agent 1 consumes c; consumption is kept inside I_y = [lo_y, hi_y] by
/// moving it to the nearest end-point when y changes.
struct RiskSharingSpec {
  double gamma = 2.0;
  double beta = 0.9;
  double Y = 1.0;
  std::vector<double> endowments;  ///< agent 1's income in each state
  Matrix<double> transition;
  std::vector<Interval> intervals;  ///< empty means "solve them"
  std::vector<std::string> labels;

  std::vector<Check> checks() const {
    using Res = std::pair<bool, std::string>;
    std::vector<Check> out;
    out.push_back(run_check("gamma > 0", [&] { return Res{gamma > 0, "risksharing: gamma must be positive"}; }));
    out.push_back(run_check("0 < beta < 1", [&] { return Res{beta > 0 && beta < 1, "risksharing: beta must lie in (0, 1)"}; }));
    out.push_back(run_check("Y > 0", [&] { return Res{Y > 0, "risksharing: aggregate income Y must be positive"}; }));
    out.push_back(run_check("endowments in (0, Y)", [&] {
      bool ok = !endowments.empty();
      for (double y : endowments) ok = ok && y > 0 && y < Y;
      return Res{ok, "risksharing: need at least one endowment, each in (0, Y)"};
    }));
    out.push_back(run_check("transition stochastic, all entries positive", [&] {
      validate_transition(transition, endowments.size(), true, "risksharing");
      return Res{true, ""};
    }));
    if (!intervals.empty()) {
      out.push_back(run_check("intervals", [&] {
        if (intervals.size() != endowments.size()) {
          return Res{false, "risksharing: " + std::to_string(intervals.size()) + " intervals for " +
                              std::to_string(endowments.size()) + " states"};
        }
        for (std::size_t y = 0; y < intervals.size(); ++y) {
          const auto& iv = intervals[y];
          if (!(iv.lo > 0 && iv.lo <= iv.hi && iv.hi < Y)) {
            return Res{false, "risksharing: interval " + std::to_string(y) + " must satisfy 0 < lo <= hi < Y, got [" +
                                format_decimal(iv.lo) + ", " + format_decimal(iv.hi) + "]"};
          }
        }
        return Res{true, ""};
      }));
    }
    if (!labels.empty()) {
      out.push_back(run_check("labels", [&] {
        return Res{labels.size() == endowments.size(), "risksharing: one label per endowment state"};
      }));
    }
    return out;
  }

  void validate() const { throw_first_failure(checks()); }
};

/// Autarky values: aut1[y] for agent 1, aut2[y] for agent 2.
struct AutarkyValues {
  std::vector<double> agent1, agent2;
};

inline AutarkyValues autarky_values(const RiskSharingSpec& spec) {
  const Utility u{spec.gamma};
  const auto nz = static_cast<Eigen::Index>(spec.endowments.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nz, nz);
  Eigen::VectorXd r1(nz), r2(nz);
  for (Eigen::Index y = 0; y < nz; ++y) {
    for (Eigen::Index w = 0; w < nz; ++w) a(y, w) -= spec.beta * spec.transition[y][w];
    r1(y) = u(spec.endowments[y]);
    r2(y) = u(spec.Y - spec.endowments[y]);
  }
  const auto lu = a.partialPivLu();
  const Eigen::VectorXd v1 = lu.solve(r1), v2 = lu.solve(r2);
  return {{v1.data(), v1.data() + nz}, {v2.data(), v2.data() + nz}};
}

/// Lifetime utility of agent 1 (`agent` = 0) or agent 2 (`agent` = 1) when
/// agent 1 consumes c in state y and the clamping rule runs from then on.
/// The reachable consumption levels are c and the interval end-points, so the
/// Bellman equation is a finite linear system.
inline double arrangement_value(const RiskSharingSpec& spec, const std::vector<Interval>& iv, int agent, double c,
                                std::size_t y0) {
  const Utility u{spec.gamma};
  std::vector<double> pts{c};
  for (const auto& i : iv) {
    pts.push_back(i.lo);
    pts.push_back(i.hi);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t np = pts.size(), nz = iv.size();
  auto index = [&](double x) {
    return static_cast<std::size_t>(std::lower_bound(pts.begin(), pts.end(), x) - pts.begin());
  };
  const auto dim = static_cast<Eigen::Index>(np * nz);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd r(dim);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t y = 0; y < nz; ++y) {
      const auto row = static_cast<Eigen::Index>(p * nz + y);
      r(row) = agent == 0 ? u(pts[p]) : u(spec.Y - pts[p]);
      for (std::size_t w = 0; w < nz; ++w) {
        const auto col = static_cast<Eigen::Index>(index(iv[w].clamp(pts[p])) * nz + w);
        a(row, col) -= spec.beta * spec.transition[y][w];
      }
    }
  }
  const Eigen::VectorXd v = a.partialPivLu().solve(r);
  return v(static_cast<Eigen::Index>(index(c) * nz + y0));
}

struct IntervalSolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
};

struct IntervalSolution {
  std::vector<Interval> intervals;
  std::size_t iterations = 0;
  double last_change = 0;
  bool autarky = false;  ///< every interval is a single point: no risk sharing survives
};

/// End-points by fixed-point iteration: lo_y is where agent 1's participation
/// constraint binds (value equals autarky), hi_y likewise for agent 2. Starts
/// from the constant-consumption bounds, updates every end-point from the
/// previous sweep by bisection.
inline IntervalSolution solve_intervals(const RiskSharingSpec& spec, const IntervalSolveOptions& opt = {}) {
  spec.validate();
  const Utility u{spec.gamma};
  const auto aut = autarky_values(spec);
  const std::size_t nz = spec.endowments.size();
  // u^{-1}((1 - beta) V): constant consumption worth V forever.
  auto constant_equivalent = [&](double v) {
    const double flow = (1 - spec.beta) * v;
    return u.is_log() ? std::exp(flow) : std::pow(flow * (1 - spec.gamma), 1 / (1 - spec.gamma));
  };
  IntervalSolution out;
  out.intervals.resize(nz);
  for (std::size_t y = 0; y < nz; ++y) {
    out.intervals[y].lo = std::min(spec.endowments[y], constant_equivalent(aut.agent1[y]));
    out.intervals[y].hi = std::max(spec.endowments[y], spec.Y - constant_equivalent(aut.agent2[y]));
  }
  auto bisect = [&](auto&& excess, double lo, double hi) {
    // excess increasing on [lo, hi]; returns the root or the end where it stays one-signed.
    if (excess(lo) >= 0) return lo;
    if (excess(hi) <= 0) return hi;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * spec.Y; ++k) {
      const double mid = (lo + hi) / 2;
      (excess(mid) < 0 ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
  };
  const double floor = 1e-9 * spec.Y;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    std::vector<Interval> next = out.intervals;
    for (std::size_t y = 0; y < nz; ++y) {
      auto agent1 = [&](double c) {
        auto iv = out.intervals;
        iv[y].lo = c;
        iv[y].hi = std::max(iv[y].hi, c);
        return arrangement_value(spec, iv, 0, c, y) - aut.agent1[y];
      };
      next[y].lo = bisect(agent1, floor, spec.Y - floor);
      // Agent 2 gains as c falls, so bisect on the mirrored excess.
      auto agent2 = [&](double c) {
        auto iv = out.intervals;
        iv[y].hi = c;
        iv[y].lo = std::min(iv[y].lo, c);
        return -(arrangement_value(spec, iv, 1, c, y) - aut.agent2[y]);
      };
      next[y].hi = bisect(agent2, floor, spec.Y - floor);
    }
    double change = 0;
    for (std::size_t y = 0; y < nz; ++y) {
      change = std::max({change, std::abs(next[y].lo - out.intervals[y].lo), std::abs(next[y].hi - out.intervals[y].hi)});
    }
    out.intervals = std::move(next);
    out.iterations = it;
    out.last_change = change;
    if (change < opt.tol) {
      out.autarky = true;
      for (const auto& iv : out.intervals) out.autarky = out.autarky && iv.hi - iv.lo < 10 * opt.tol;
      return out;
    }
  }
  throw NonConvergence("risksharing interval iteration did not converge in " + std::to_string(opt.max_iter) +
                           " sweeps (last change " + format_decimal(out.last_change) + ")",
                       out.last_change, static_cast<int>(opt.max_iter));
}

struct RiskSharingMap {
  SrsModel<double> srs;
  std::vector<Interval> intervals;
  double c_min = 0;  ///< min_y hi_y
  double c_max = 0;  ///< max_y lo_y
  bool first_best = false;  ///< the intervals share a point
  double c = 0;             ///< (c_min + c_max) / 2
};

/// Clamping map on the grid of interval end-points. The environment state is
/// next period's endowment index and carries it as a degenerate shock.
inline RiskSharingMap risk_sharing_map(const RiskSharingSpec& spec, EnvState atom = 0,
                                       const IntervalSolveOptions& opt = {}) {
  spec.validate();
  RiskSharingMap out;
  out.intervals = spec.intervals.empty() ? solve_intervals(spec, opt).intervals : spec.intervals;
  const std::size_t nz = out.intervals.size();
  std::vector<double> pts;
  out.c_min = out.intervals[0].hi;
  out.c_max = out.intervals[0].lo;
  for (const auto& iv : out.intervals) {
    pts.push_back(iv.lo);
    pts.push_back(iv.hi);
    out.c_min = std::min(out.c_min, iv.hi);
    out.c_max = std::max(out.c_max, iv.lo);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  out.first_best = out.c_max <= out.c_min;
  out.c = (out.c_min + out.c_max) / 2;
  auto iv = std::make_shared<std::vector<Interval>>(out.intervals);
  MonotoneMap<double> map{[iv](double x, double v) { return (*iv)[static_cast<std::size_t>(v)].clamp(x); },
                          pts.front(), pts.back(), "clamp into the next state's interval"};
  std::vector<ShockLaw<double>> shocks;
  for (std::size_t y = 0; y < nz; ++y) shocks.push_back(ShockLaw<double>::degenerate(static_cast<double>(y)));
  auto labels = spec.labels;
  if (labels.empty()) {
    for (double y : spec.endowments) labels.push_back("y=" + format_decimal(y));
  }
  auto driver = markov_atom_driver(spec.transition, atom, std::move(shocks), EnumerationOptions{24, 100000}, labels);
  out.srs = SrsModel<double>{StateGrid<double>(pts), std::move(map), std::move(driver)};
  return out;
}

}  // namespace regen_srs::econ

#endif  // REGEN_SRS_ECON_RISK_SHARING_HPP
