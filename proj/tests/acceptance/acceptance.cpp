// Acceptance run: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "regen_srs/econ/growth.hpp"
#include "regen_srs/econ/huggett.hpp"
#include "regen_srs/econ/risk_sharing.hpp"
#include "regen_srs/example4.hpp"
#include "regen_srs/exact_solver.hpp"
#include "regen_srs/io/commands.hpp"

namespace fs = std::filesystem;
using namespace regen_srs;
using Q = Rational;

namespace {

const fs::path kFixtures = REGEN_SRS_FIXTURES;

struct Outcome {
  bool ok = true;
  std::ostringstream note;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      note << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("regen_srs_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json load(const std::string& name) { return io::load_json((kFixtures / name).string()); }

// Published Example 4 numbers.
const std::vector<std::vector<Q>> kPublishedP{{Q(1, 4), Q(1, 4), Q(1, 4), Q(1, 4)},
                                          {Q(1, 4), Q(1, 4), Q(1, 4), Q(1, 4)},
                                          {Q(3, 16), Q(1, 4), Q(1, 4), Q(5, 16)},
                                          {Q(3, 32), Q(3, 16), Q(1, 4), Q(15, 32)}};
const std::vector<Q> kPublishedPi{Q(29, 160), Q(183, 800), Q(1, 4), Q(17, 50)};

std::vector<Q> published_mu() {
  const auto& p = kPublishedPi;
  const Q two_fifths(2, 5);
  const Q m3 = two_fifths * p[3];
  const Q m2 = two_fifths * (p[2] + p[3] / 2);
  const Q m1 = two_fifths * (p[1] + p[2] / 2 + Q(5) * p[3] / 8);
  return {Q(1) - m1 - m2 - m3, m1, m2, m3};
}

double sup_cdf_gap(std::span<const double> empirical_mass, const std::vector<Q>& exact) {
  double a = 0, b = 0, gap = 0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    a += empirical_mass[i];
    b += to_double(exact[i]);
    gap = std::max(gap, std::abs(a - b));
  }
  return gap;
}

void criterion1(Outcome& o) {
  const auto out = scratch("c1");
  io::RunConfig cfg;
  cfg.verb = "reproduce";
  cfg.target = "example4";
  cfg.backend = "rational";
  cfg.out = out.string();
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = io::run(cfg, log);
  const double secs = seconds_since(t0);
  o.require(code == 0, "reproduce exit code " + std::to_string(code) + " " + log.str());
  if (code != 0) return;
  auto parse = [](const nlohmann::json& j) {
    std::vector<Q> v;
    for (const auto& s : j) v.push_back(parse_scalar<Q>(s.get<std::string>()));
    return v;
  };
  const auto pj = nlohmann::json::parse(slurp(out / "embedded_matrix.json"));
  bool p_ok = pj["matrix"].size() == 4;
  for (std::size_t i = 0; p_ok && i < 4; ++i) p_ok = parse(pj["matrix"][i]) == kPublishedP[i];
  o.require(p_ok, "P differs from the published matrix");
  const auto pi = parse(nlohmann::json::parse(slurp(out / "stationary.json"))["mass"]);
  o.require(pi == kPublishedPi, "pi differs from (29/160, 183/800, 1/4, 17/50)");
  const auto mu = parse(nlohmann::json::parse(slurp(out / "mu.json"))["mass"]);
  const Q tf(2, 5);
  o.require(mu.size() == 4 && mu[3] == tf * pi[3], "mu_3 = 2 pi_3 / 5");
  o.require(mu.size() == 4 && mu[2] == tf * (pi[2] + pi[3] / 2), "mu_2 formula");
  o.require(mu.size() == 4 && mu[1] == tf * (pi[1] + pi[2] / 2 + Q(5) * pi[3] / 8), "mu_1 formula");
  Q total = 0;
  for (const auto& m : mu) total += m;
  o.require(total == 1, "sum of mu is 1");
  for (const auto& e : fs::directory_iterator(kFixtures / "golden" / "example4")) {
    o.require(slurp(out / e.path().filename()) == slurp(e.path()), "golden bytes " + e.path().filename().string());
  }
  o.require(secs < 1.0, "runtime under 1 s");
  o.note << "P, pi, mu exact; golden files identical; " << secs << " s";
}

void criterion2(Outcome& o) {
  const auto m = example4_model<double>();
  auto t0 = std::chrono::steady_clock::now();
  const auto ys = embedded_samples(m.map, m.driver, 0.0, 1'000'000, 2024);
  // Drop the start so every sample is Y_n with n >= 1.
  const auto emp = DiscreteCdf<double>::empirical(m.grid, std::span<const double>(ys).subspan(1));
  const double t_pi = seconds_since(t0);
  const double d_pi = sup_cdf_gap(emp.mass(), kPublishedPi);
  t0 = std::chrono::steady_clock::now();
  const auto lim = estimate_limit_distribution(m.map, m.driver, m.grid, 0.0, 200, 1'000'000, 2025, 4);
  const double t_mu = seconds_since(t0);
  const double d_mu = sup_cdf_gap(lim.cdf.mass(), published_mu());
  o.require(d_pi <= 0.005, "pi distance <= 0.005");
  o.require(d_mu <= 0.005, "mu distance <= 0.005");
  o.require(t_pi < 60 && t_mu < 60, "each run under 60 s");
  o.note << "d(pi) = " << d_pi << " (" << t_pi << " s), d(mu) = " << d_mu << " (" << t_mu << " s)";
}

void criterion3(Outcome& o) {
  const auto mq = example4_model<Q>();
  const auto best = best_splitting_exact(mq.map, mq.driver, mq.grid);
  const double eps = to_double(best.eps());
  const auto m = example4_model<double>();
  const std::size_t reps = 10000;  // binomial SE <= sqrt(1/4 / 10^4) = 0.005
  const auto profile = contraction_profile(m.map, m.driver, 1, 50, reps, 31);
  std::size_t above = 0;
  double worst_se = 0, worst_gap = -1;
  for (const auto& p : profile) {
    const double bound = std::pow(1 - eps, static_cast<double>(p.k));
    worst_se = std::max(worst_se, p.standard_error);
    worst_gap = std::max(worst_gap, p.distance - bound - 4 * p.standard_error);
    if (p.distance > bound + 4 * p.standard_error) ++above;
  }
  o.require(profile.size() == 50, "k runs to 50");
  o.require(above == 0, std::to_string(above) + " points above (1-eps)^k + 4 SE");
  o.require(worst_se <= 0.01, "SE <= 0.01");
  o.note << "c = " << format_exact(best.c) << ", eps = " << format_exact(best.eps()) << ", max SE " << worst_se
         << ", max(d_k - bound - 4SE) = " << worst_gap;
}

std::size_t coupling_violations(const SrsModel<double>& m, std::size_t runs, std::size_t horizon, std::uint64_t seed) {
  const auto counts = parallel_indexed<std::size_t>(runs, [&](std::size_t r) {
    const auto run = coupled_pair(m.map, m.driver, horizon, seed, r);
    std::size_t bad = 0;
    for (std::size_t t = 0; t < run.top.states.size(); ++t) {
      if (run.bottom.states[t] > run.top.states[t]) ++bad;
    }
    return bad;
  });
  std::size_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

// Shared model solutions; solved once and reused by criteria 4 through 7.
const econ::PolicySolution& huggett_solution() {
  static const auto sol = econ::solve_huggett(io::read_huggett(load("huggett.json")));
  return sol;
}
const econ::CompiledModel& huggett_compiled() {
  static const auto c = econ::compile_to_srs(huggett_solution());
  return c;
}
const econ::PolicySolution& growth_solution() {
  static const auto sol = econ::solve_growth(io::read_growth(load("growth.json")));
  return sol;
}
const econ::CompiledModel& growth_compiled() {
  static const auto c = econ::compile_to_srs(growth_solution());
  return c;
}
const econ::RiskSharingMap& risk_map(const char* file) {
  static std::map<std::string, econ::RiskSharingMap> cache;
  auto it = cache.find(file);
  if (it == cache.end()) it = cache.emplace(file, econ::risk_sharing_map(io::read_risksharing(load(file)))).first;
  return it->second;
}

void criterion4(Outcome& o) {
  const std::size_t runs = 10000, horizon = 200;
  const std::vector<std::pair<std::string, const SrsModel<double>*>> models{
      {"example4", nullptr},
      {"huggett", &huggett_compiled().srs},
      {"growth", &growth_compiled().srs},
      {"risksharing b=0.7", &risk_map("risksharing_beta0.7.json").srs},
      {"risksharing b=0.95", &risk_map("risksharing_beta0.95.json").srs}};
  const auto ex4 = example4_model<double>();
  for (const auto& [name, model] : models) {
    const std::size_t v = coupling_violations(model ? *model : ex4, runs, horizon, 404);
    o.require(v == 0, name + " has " + std::to_string(v) + " order violations");
    o.note << name << ": " << v << " violations; ";
  }
  o.note << runs << " runs x " << horizon << " steps each";
}

void criterion5(Outcome& o) {
  const auto spec = io::read_growth(load("growth.json"));
  const auto& sol = growth_solution();
  o.require(spec.gamma == 1 && spec.delta == 1 && sol.grid.size() == 500, "fixture is log, full depreciation, 500 nodes");
  double sup = 0;
  for (std::size_t z = 0; z < sol.num_states(); ++z) {
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
      sup = std::max(sup, std::abs(sol.policy[z][i] - spec.alpha * spec.beta * spec.shocks[z] * std::pow(sol.grid[i], spec.alpha)));
    }
  }
  const auto euler = econ::growth_euler(spec, sol);
  const auto gi = econ::growth_interval(spec, sol);
  // Lemma 2 scan done here: every grid k above k' has min_z f(k, z) < k.
  bool scan = true;
  for (std::size_t i = gi.k_prime_index + 1; i < sol.grid.size(); ++i) {
    double lowest = sol.policy[0][i];
    for (const auto& row : sol.policy) lowest = std::min(lowest, row[i]);
    scan = scan && lowest < sol.grid[i];
  }
  o.require(sup < 1e-3, "closed form within 1e-3");
  o.require(euler.max_interior < 1e-4, "Euler residual < 1e-4");
  o.require(scan && gi.lemma2, "Lemma 2 scan");
  o.note << "sup |k+ - a b z k^a| = " << sup << ", Euler " << euler.max_interior << " over " << euler.interior_nodes
         << " nodes, k' = " << gi.k_prime << ", k'' = " << gi.k_double_prime;
}

void criterion6(Outcome& o) {
  // Timed end to end: a fresh solve, compile, burn-in plan and both simulations.
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = econ::solve_huggett(io::read_huggett(load("huggett.json")));
  bool lemma1 = true;
  for (std::size_t i = 1; i < sol.grid.size(); ++i) {
    bool falls = false;
    for (const auto& row : sol.policy) falls = falls || row[i] < sol.grid[i];
    lemma1 = lemma1 && falls;
  }
  const auto b = econ::huggett_bounds(sol);
  const auto c = econ::compile_to_srs(sol);
  const auto plan = plan_burn_in(c.srs, 10000, 7);
  const double a_bar = b.a_bar;
  const auto low = estimate_limit_distribution(c.srs.map, c.srs.driver, c.srs.grid, c.srs.grid.bottom(), plan.burn_in,
                                               4'000'000, 61, 8);
  const auto high = estimate_limit_distribution(c.srs.map, c.srs.driver, c.srs.grid, a_bar, plan.burn_in, 4'000'000, 62, 8);
  const double d = uniform_distance(low.cdf, high.cdf);
  const double secs = seconds_since(t0);
  o.require(lemma1 && econ::huggett_lemma1(sol).part_i, "Lemma 1(i) scan");
  o.require(!b.degenerate && a_bar < sol.grid.back(), "a_bar on the grid");
  o.require(d < 0.01, "limit CDFs within 0.01");
  o.require(secs < 300, "runtime under 5 min");
  o.note << "a_bar = " << a_bar << ", burn-in " << plan.burn_in << " (block " << plan.block << ", eps "
         << plan.splitting.eps() << "), distance " << d << ", " << secs << " s";
}

void criterion7(Outcome& o) {
  const auto& split = risk_map("risksharing_beta0.7.json");
  o.require(!split.first_best, "beta 0.7 fixture is not first best");
  const auto& ivs = split.intervals;
  o.require(ivs.front().hi < ivs.back().lo, "lowest and highest intervals do not intersect");
  const auto plan = plan_burn_in(split.srs, 10000, 8);
  const auto& m = split.srs;
  const auto a = estimate_limit_distribution(m.map, m.driver, m.grid, split.c_min, plan.burn_in, 1'000'000, 71, 8);
  const auto b = estimate_limit_distribution(m.map, m.driver, m.grid, split.c_max, plan.burn_in, 1'000'000, 72, 8);
  const double d = uniform_distance(a.cdf, b.cdf);
  o.require(d < 0.01, "limits from c_min and c_max agree");

  const auto& fb = risk_map("risksharing_beta0.95.json");
  o.require(fb.first_best, "beta 0.95 fixture is first best");
  const auto& g = fb.srs;
  bool constant = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (double x0 : {fb.c_min, fb.c_max}) {
      const auto tr = simulate(g.map, g.driver, x0, 400, 90, s);
      for (std::size_t t = 200; t < tr.states.size(); ++t) constant = constant && tr.states[t] == tr.states[200];
    }
  }
  o.require(constant, "first-best trajectories constant after 200 steps");
  const auto fa = estimate_limit_distribution(g.map, g.driver, g.grid, fb.c_min, 1000, 200'000, 73, 4);
  const auto fz = estimate_limit_distribution(g.map, g.driver, g.grid, fb.c_max, 1000, 200'000, 74, 4);
  const double dfb = uniform_distance(fa.cdf, fz.cdf);
  o.require(dfb > 0.5, "first-best limits differ by start");
  o.note << "beta 0.7: distance " << d << " (burn-in " << plan.burn_in << "); beta 0.95: paths frozen, distance "
         << dfb;
}

void criterion8(Outcome& o) {
  std::mt19937_64 gen(8);
  auto random_cdf = [&](const StateGrid<double>& g) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> w(g.size());
    double tot = 0;
    for (auto& x : w) tot += (x = u(gen) * (u(gen) < 0.3 ? 0 : 1));
    if (tot == 0) {
      w[0] = 1;
      tot = 1;
    }
    for (auto& x : w) x /= tot;
    return DiscreteCdf<double>(g, w);
  };
  const auto g1 = StateGrid<double>::uniform(0.0, 1.0, 9);
  const StateGrid<double> g2({0.0, 0.05, 0.3, 0.31, 0.8, 1.0});
  std::size_t metric_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_cdf(g1), g = random_cdf(g2), h = random_cdf(i % 2 ? g1 : g2);
    const double fg = uniform_distance(f, g);
    const bool ok = fg >= 0 && fg <= 1 && fg == uniform_distance(g, f) && uniform_distance(f, f) == 0 &&
                    fg <= uniform_distance(f, h) + uniform_distance(h, g) + 1e-15;
    if (!ok) ++metric_bad;
  }
  o.require(metric_bad == 0, "metric axioms");

  const auto ex4 = example4_model<Q>();
  std::uniform_int_distribution<int> w(0, 5);
  auto random_q = [&] {
    std::vector<Q> m(4);
    int total = 0;
    for (auto& v : m) total += static_cast<int>((v = w(gen)));
    if (total == 0) {
      m[3] = 1;
      total = 1;
    }
    for (auto& v : m) v /= total;
    return DiscreteCdf<Q>(ex4.grid, m);
  };
  std::size_t pairs = 0, push_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_q(), g = random_q();
    if (!stochastic_dominance(f, g)) continue;
    ++pairs;
    for (int v = -2; v <= 3; ++v) {
      if (!stochastic_dominance(pushforward(f, ex4.map, Q(v), ex4.grid), pushforward(g, ex4.map, Q(v), ex4.grid))) {
        ++push_bad;
      }
    }
  }
  o.require(pairs > 20 && push_bad == 0, "monotone pushforward keeps dominance");

  const Matrix<double> p{{0.2, 0.5, 0.3}, {0.4, 0.1, 0.5}, {0.6, 0.3, 0.1}};
  const auto d = markov_atom_driver(p, 0, std::vector<ShockLaw<double>>(3, ShockLaw<double>::degenerate(0.0)));
  std::map<std::size_t, double> law, seen;
  for (const auto& wc : d.enumeration()->cycles) law[wc.cycle.length()] += wc.probability;
  const std::size_t n = 200000;
  CounterRng rng(88, 0);
  for (std::size_t i = 0; i < n; ++i) seen[d.sample_cycle(rng).length()] += 1;
  std::size_t gof_bad = 0;
  for (const auto& [len, q] : law) {
    if (q < 1e-6) continue;
    if (std::abs(seen[len] / n - q) > 4 * std::sqrt(q * (1 - q) / n) + 1e-12) ++gof_bad;
  }
  o.require(gof_bad == 0, "cycle-length frequencies within 4 SE");

  std::size_t replay_bad = 0;
  for (const char* verb : {"simulate", "couple", "splitting", "limit", "contraction"}) {
    const auto out = scratch("replay");
    io::RunConfig cfg;
    cfg.verb = verb;
    cfg.spec_path = (kFixtures / "example4.json").string();
    cfg.out = out.string();
    cfg.streams = 4;
    cfg.seed = 5;
    cfg.samples = 50000;
    cfg.cycles = 5000;
    cfg.replications = 1000;
    cfg.k_max = 20;
    std::ostringstream log;
    if (io::run(cfg, log) != 0) {
      ++replay_bad;
      continue;
    }
    const auto first = read_dir(out);
    fs::remove_all(out);
    if (io::run(cfg, log) != 0 || read_dir(out) != first) ++replay_bad;
  }
  o.require(replay_bad == 0, "byte-identical replay");
  o.note << "metric failures " << metric_bad << "/1000, pushforward failures " << push_bad << " over " << pairs
         << " pairs, GoF outliers " << gof_bad << ", replay mismatches " << replay_bad;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"Example 4 exactness", criterion1},    {"Monte Carlo consistency", criterion2},
      {"geometric contraction", criterion3},  {"coupling order", criterion4},
      {"growth closed form", criterion5},     {"Huggett structure", criterion6},
      {"risk sharing", criterion7},           {"property suites", criterion8}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.note << " [exception: " << e.what() << "]";
    }
    if (!o.ok) ++failed;
    std::cout << "criterion " << i + 1 << " " << (o.ok ? "PASS" : "FAIL") << " (" << criteria[i].first
              << "): " << o.note.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
