#ifndef REGEN_SRS_IO_COMMANDS_HPP
#define REGEN_SRS_IO_COMMANDS_HPP

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "regen_srs/exact_solver.hpp"
#include "regen_srs/io/spec_json.hpp"

namespace regen_srs::io {

inline constexpr const char* kToolName = "regen-srs";
inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kNonConvergence = 3 };

/// Everything that determines a run. Seed and stream count fix all stochastic output.
struct RunConfig {
  std::string verb;
  std::string target;  ///< model for `solve`, name for `reproduce`
  std::string spec_path;
  std::uint64_t seed = 1;
  std::size_t streams = 1;
  std::string out = "out";
  std::string backend = "float";  ///< rational | float
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  std::size_t cycles = 100000;
  std::optional<std::size_t> burn_in;  ///< unset: sized from the splitting rate
  std::size_t samples = 1000000;
  std::size_t horizon = 100;
  std::string x0;  ///< empty: grid bottom
  std::string c;   ///< empty: sweep every grid point
  std::size_t k_max = 50;
  std::size_t replications = 10000;
  std::size_t block = 1;
  double max_tail = 0.0;

  json to_json() const {
    json j{{"verb", verb},       {"target", target},   {"spec", spec_path},   {"seed", seed},
           {"streams", streams}, {"out", out},         {"backend", backend},  {"tol", tol},
           {"max_iter", max_iter}, {"cycles", cycles}, {"samples", samples},  {"horizon", horizon},
           {"x0", x0},           {"c", c},             {"k_max", k_max},      {"replications", replications},
           {"block", block},     {"max_tail", max_tail}};
    j["burn_in"] = burn_in ? json(*burn_in) : json(nullptr);
    return j;
  }

  /// Inverse of to_json, for replaying a run from its metadata sidecar.
  static RunConfig from_json(const json& j) {
    RunConfig c;
    j.at("verb").get_to(c.verb);
    j.at("target").get_to(c.target);
    j.at("spec").get_to(c.spec_path);
    j.at("seed").get_to(c.seed);
    j.at("streams").get_to(c.streams);
    j.at("out").get_to(c.out);
    j.at("backend").get_to(c.backend);
    j.at("tol").get_to(c.tol);
    j.at("max_iter").get_to(c.max_iter);
    j.at("cycles").get_to(c.cycles);
    j.at("samples").get_to(c.samples);
    j.at("horizon").get_to(c.horizon);
    j.at("x0").get_to(c.x0);
    j.at("c").get_to(c.c);
    j.at("k_max").get_to(c.k_max);
    j.at("replications").get_to(c.replications);
    j.at("block").get_to(c.block);
    j.at("max_tail").get_to(c.max_tail);
    if (!j.at("burn_in").is_null()) c.burn_in = j.at("burn_in").get<std::size_t>();
    return c;
  }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class Csv {
public:
  explicit Csv(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_field(fields[i]);
    }
    text_ += '\n';
  }

  const std::string& text() const noexcept { return text_; }

private:
  std::string text_;
};

inline std::string num(double x) { return format_decimal(x); }
inline std::string num(std::size_t x) { return std::to_string(x); }

/// Output directory plus the metadata sidecar describing the run.
class Artifacts {
public:
  Artifacts(const RunConfig& cfg, const json* spec) : dir_(cfg.out) {
    std::filesystem::create_directories(dir_);
    meta_["tool"] = kToolName;
    meta_["version"] = kToolVersion;
    meta_["schema"] = kSchemaVersion;
    meta_["config"] = cfg.to_json();
    meta_["spec_document"] = spec ? *spec : json(nullptr);
    meta_["outputs"] = json::array();
    meta_["summary"] = json::object();
  }

  void write(const std::string& name, const std::string& text) {
    write_file((dir_ / name).string(), text);
    meta_["outputs"].push_back(name);
  }

  json& summary() { return meta_["summary"]; }

  void finish() { write_file((dir_ / "metadata.json").string(), dump(meta_)); }

private:
  std::filesystem::path dir_;
  json meta_;
};

template <Scalar S>
S parse_or(const std::string& text, const S& fallback, const char* flag) {
  if (text.empty()) return fallback;
  try {
    return parse_scalar<S>(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string(flag) + ": " + e.what());
  }
}

template <Scalar S>
ExactOptions exact_options(const RunConfig& cfg) {
  ExactOptions opt;
  opt.max_tail_mass = cfg.max_tail;
  return opt;
}

template <Scalar S>
std::vector<std::string> labels_of(const RegenDriver<S>& d) {
  auto labels = d.labels();
  if (labels.size() < d.num_states()) {
    for (std::size_t z = labels.size(); z < d.num_states(); ++z) labels.push_back(std::to_string(z));
  }
  return labels;
}

template <Scalar S>
std::string matrix_csv(const StateGrid<S>& grid, const Matrix<S>& m) {
  std::vector<std::string> header{"x"};
  for (std::size_t j = 0; j < grid.size(); ++j) header.push_back(format_exact(grid[j]));
  Csv csv({});
  std::string text;
  csv.row(header);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row{format_exact(grid[i])};
    for (const auto& p : m[i]) row.push_back(format_exact(p));
    csv.row(row);
  }
  return csv.text().substr(1);  // drop the empty header row from the constructor
}

template <Scalar S>
std::string law_csv(const StateGrid<S>& grid, std::span<const S> mass, const char* column) {
  Csv csv({"x", column, "cdf"});
  S run = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    run += mass[i];
    csv.row({format_exact(grid[i]), format_exact(mass[i]), format_exact(run)});
  }
  return csv.text();
}

template <Scalar S>
json law_json(const StateGrid<S>& grid, std::span<const S> mass) {
  return json{{"grid", exact_json(grid.points())}, {"mass", exact_json(mass)}};
}

/// Exact splitting at every candidate, or nullopt when the model is not exactly solvable.
template <Scalar S>
std::optional<std::vector<SplittingExact<S>>> try_exact_splitting(const SrsModel<S>& m, std::span<const S> cs,
                                                                  const ExactOptions& opt, json& note) {
  try {
    std::vector<SplittingExact<S>> out;
    for (const auto& c : cs) out.push_back(splitting_exact(m.map, m.driver, m.grid, c, opt));
    return out;
  } catch (const ValidationError& e) {
    note = e.what();
  } catch (const BudgetExceeded& e) {
    note = e.what();
  }
  return std::nullopt;
}

template <Scalar S>
std::vector<S> candidates(const RunConfig& cfg, const StateGrid<S>& grid) {
  if (!cfg.c.empty()) return {parse_or<S>(cfg.c, grid.bottom(), "--c")};
  return {grid.points().begin(), grid.points().end()};
}

// ---- srs verbs ----

template <Scalar S>
void simulate_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  const S x0 = parse_or<S>(cfg.x0, m.grid.bottom(), "--x0");
  const auto labels = labels_of(m.driver);
  auto runs = parallel_indexed<Trajectory<S>>(
      cfg.streams, [&](std::size_t s) { return simulate(m.map, m.driver, x0, cfg.horizon, cfg.seed, s); });
  Csv csv({"stream", "t", "x", "cycle", "env", "shock"});
  std::size_t regenerations = 0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& tr = runs[s];
    regenerations += tr.regeneration.size() - 1;
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      const bool step = t < tr.environment.size();
      csv.row({num(s), num(t), format_exact(tr.states[t]), num(tr.cycle_index_at(t)),
               step ? labels[tr.environment[t]] : "", step ? format_exact(tr.shocks[t]) : ""});
    }
  }
  art.write("trajectory.csv", csv.text());
  art.summary()["regenerations"] = regenerations;
}

template <Scalar S>
void couple_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  struct Outcome {
    std::size_t violations = 0;
    std::optional<std::size_t> meet;
    std::string csv;
  };
  auto outcomes = parallel_indexed<Outcome>(cfg.replications, [&](std::size_t r) {
    const auto run = coupled_pair(m.map, m.driver, cfg.horizon, cfg.seed, r);
    Outcome o;
    Csv csv({"t", "top", "bottom"});
    for (std::size_t t = 0; t < run.top.states.size(); ++t) {
      if (run.top.states[t] < run.bottom.states[t]) ++o.violations;
      if (!o.meet && run.top.states[t] == run.bottom.states[t]) o.meet = t;
      if (r == 0) csv.row({num(t), format_exact(run.top.states[t]), format_exact(run.bottom.states[t])});
    }
    if (r == 0) o.csv = csv.text();
    return o;
  });
  std::size_t violations = 0, met = 0;
  double meet_sum = 0;
  for (const auto& o : outcomes) {
    violations += o.violations;
    if (o.meet) {
      ++met;
      meet_sum += static_cast<double>(*o.meet);
    }
  }
  art.write("couple.csv", outcomes.front().csv);
  art.summary()["order_violations"] = violations;
  art.summary()["replications"] = cfg.replications;
  art.summary()["met_within_horizon"] = met;
  art.summary()["mean_meeting_time"] = met ? json(meet_sum / static_cast<double>(met)) : json(nullptr);
}

template <Scalar S>
void splitting_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  const auto cs = candidates(cfg, m.grid);
  const auto sweep = splitting_sweep<S>(m.map, m.driver, cs, cfg.cycles, cfg.seed, cfg.block);
  json note = nullptr;
  const auto exact = try_exact_splitting<S>(m, cs, exact_options<S>(cfg), note);
  Csv csv({"c", "eps_top", "eps_bottom", "se_top", "se_bottom", "exact_eps_top", "exact_eps_bottom"});
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto& e = sweep.estimates[i];
    csv.row({format_exact(cs[i]), num(e.eps_top), num(e.eps_bottom), num(e.se_top), num(e.se_bottom),
             exact ? format_exact((*exact)[i].eps_top) : "", exact ? format_exact((*exact)[i].eps_bottom) : ""});
  }
  art.write("splitting.csv", csv.text());
  const auto& best = sweep.best_estimate();
  art.summary()["best_c"] = best.c;
  art.summary()["best_eps"] = best.eps();
  art.summary()["exact_unavailable"] = note;
  if (exact) {
    std::size_t b = 0;
    for (std::size_t i = 1; i < exact->size(); ++i) {
      if ((*exact)[b].eps() < (*exact)[i].eps()) b = i;
    }
    art.summary()["exact_best_c"] = exact_json((*exact)[b].c);
    art.summary()["exact_best_eps"] = exact_json((*exact)[b].eps());
    art.summary()["exact_tail_mass"] = exact_json((*exact)[b].tail_mass);
  }
}

template <Scalar S>
void embedded_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  const auto chain = embedded_matrix(m.map, m.driver, m.grid, exact_options<S>(cfg));
  art.write("embedded_matrix.csv", matrix_csv(m.grid, chain.matrix));
  art.write("embedded_matrix.json", dump(json{{"grid", exact_json(m.grid.points())},
                                              {"matrix", exact_json(chain.matrix)},
                                              {"tail_mass", exact_json(chain.tail_mass)}}));
}

template <Scalar S>
void write_stationary(const StationaryLaw<S>& law, const StateGrid<S>& grid, Artifacts& art) {
  art.write("stationary.csv", law_csv(grid, std::span<const S>(law.pi), "pi"));
  json j = law_json(grid, std::span<const S>(law.pi));
  j["recurrent"] = law.recurrent;
  j["transient"] = law.transient;
  art.write("stationary.json", dump(j));
}

template <Scalar S>
void limit_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  const S x0 = parse_or<S>(cfg.x0, m.grid.bottom(), "--x0");
  std::optional<DiscreteCdf<S>> exact;
  try {
    const auto opt = exact_options<S>(cfg);
    const auto pi = stationary(embedded_matrix(m.map, m.driver, m.grid, opt));
    exact = limiting_mu(m.map, m.driver, m.grid, pi, opt);
    art.write("mu_exact.csv", law_csv(m.grid, exact->mass(), "mu"));
    art.write("mu_exact.json", dump(law_json(m.grid, exact->mass())));
  } catch (const ValidationError& e) {
    art.summary()["exact_unavailable"] = e.what();
  } catch (const BudgetExceeded& e) {
    art.summary()["exact_unavailable"] = e.what();
  }
  std::size_t burn_in = 0;
  if (cfg.burn_in) {
    burn_in = *cfg.burn_in;
  } else {
    const auto plan = plan_burn_in(m, cfg.cycles, cfg.seed);
    burn_in = plan.burn_in;
    art.summary()["burn_in_plan"] = json{{"block", plan.block},
                                         {"mean_cycle_length", plan.mean_cycle_length},
                                         {"c", plan.splitting.c},
                                         {"eps", plan.splitting.eps()}};
  }
  const auto est = estimate_limit_distribution(m.map, m.driver, m.grid, x0, burn_in, cfg.samples, cfg.seed, cfg.streams);
  std::ostringstream os;
  est.cdf.write_csv(os);
  art.write("limit.csv", os.str());
  art.summary()["burn_in"] = burn_in;
  art.summary()["effective_sample_size"] = est.effective_sample_size;
  if (exact) art.summary()["distance_to_exact"] = to_double(uniform_distance(est.cdf, *exact));
}

template <Scalar S>
void contraction_verb(const RunConfig& cfg, const SrsModel<S>& m, Artifacts& art) {
  const std::vector<S> cs(m.grid.points().begin(), m.grid.points().end());
  json note = nullptr;
  double eps = 0;
  if (const auto exact = try_exact_splitting<S>(m, std::span<const S>(cs), exact_options<S>(cfg), note);
      exact && cfg.block == 1) {
    for (const auto& e : *exact) eps = std::max(eps, to_double(e.eps()));
    art.summary()["eps_source"] = "exact";
  } else {
    eps = splitting_sweep<S>(m.map, m.driver, cs, cfg.cycles, cfg.seed, cfg.block).best_estimate().eps();
    art.summary()["eps_source"] = "monte carlo";
  }
  const auto profile = contraction_profile(m.map, m.driver, cfg.block, cfg.k_max, cfg.replications, cfg.seed);
  Csv csv({"k", "d_k", "se", "bound"});
  std::size_t above = 0;
  for (const auto& p : profile) {
    const double bound = std::pow(1 - eps, static_cast<double>(p.k));
    if (p.distance > bound + 4 * p.standard_error) ++above;
    csv.row({num(p.k), num(p.distance), num(p.standard_error), num(bound)});
  }
  art.write("contraction.csv", csv.text());
  art.summary()["eps"] = eps;
  art.summary()["points_above_bound"] = above;
}

template <Scalar S>
void run_srs(const RunConfig& cfg, const json& doc, Artifacts& art) {
  const std::string kind = spec_kind(doc);
  if (cfg.verb == "stationary" && kind == "chain") {
    const auto chain = read_chain<S>(doc);
    std::vector<S> pts;
    for (std::size_t i = 0; i < chain.transition.size(); ++i) pts.push_back(S(static_cast<long>(i)));
    if (pts.size() < 2) throw ValidationError("chain needs at least two states");
    const StateGrid<S> grid(pts);
    write_stationary(stationary(EmbeddedChain<S>{grid, chain.transition, S(0)}), grid, art);
    return;
  }
  if (kind != "srs") throw SpecError("/kind", "verb '" + cfg.verb + "' needs an srs spec, got '" + kind + "'");
  const auto m = read_srs<S>(doc);
  if (cfg.verb == "simulate") return simulate_verb(cfg, m, art);
  if (cfg.verb == "couple") return couple_verb(cfg, m, art);
  if (cfg.verb == "splitting") return splitting_verb(cfg, m, art);
  if (cfg.verb == "embedded") return embedded_verb(cfg, m, art);
  if (cfg.verb == "stationary") {
    return write_stationary(stationary(embedded_matrix(m.map, m.driver, m.grid, exact_options<S>(cfg))), m.grid, art);
  }
  if (cfg.verb == "limit") return limit_verb(cfg, m, art);
  if (cfg.verb == "contraction") return contraction_verb(cfg, m, art);
  throw ValidationError("unknown verb '" + cfg.verb + "'");
}

// ---- models ----

inline econ::VfiOptions vfi_options(const RunConfig& cfg) {
  econ::VfiOptions opt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  return opt;
}

inline void write_policy(const econ::PolicySolution& sol, Artifacts& art) {
  Csv csv({"state", "shock", "policy", "value"});
  for (std::size_t z = 0; z < sol.num_states(); ++z) {
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
      csv.row({num(sol.grid[i]), sol.shock_labels[z], num(sol.policy[z][i]), num(sol.value[z][i])});
    }
  }
  art.write("policy.csv", csv.text());
  Csv conv({"iteration", "value_change"});
  for (std::size_t k = 0; k < sol.history.size(); ++k) conv.row({num(k + 1), num(sol.history[k])});
  art.write("convergence.csv", conv.text());
  art.summary()["iterations"] = sol.iterations;
  art.summary()["monotonicity_defect"] = sol.monotonicity_defect();
}

inline json euler_json(const econ::EulerReport& r) {
  return {{"max_interior", r.max_interior},
          {"max_constrained_violation", r.max_constrained_violation},
          {"interior_nodes", r.interior_nodes},
          {"constrained_nodes", r.constrained_nodes}};
}

inline void solve_huggett_verb(const RunConfig& cfg, const json& doc, Artifacts& art) {
  const auto spec = read_huggett(doc);
  const auto sol = econ::solve_huggett(spec, vfi_options(cfg));
  write_policy(sol, art);
  art.summary()["euler"] = euler_json(econ::huggett_euler(spec, sol));
  art.summary()["euler_midpoints"] = euler_json(econ::huggett_euler(spec, sol, true));
  const auto l1 = econ::huggett_lemma1(sol);
  art.summary()["lemma1_part_i"] = l1.part_i;
  art.summary()["a_hat"] = l1.a_hat ? json(*l1.a_hat) : json(nullptr);
  const auto b = econ::huggett_bounds(sol);
  std::vector<std::string> down, up;
  for (auto z : b.down_states) down.push_back(sol.shock_labels[z]);
  for (auto z : b.up_states) up.push_back(sol.shock_labels[z]);
  art.summary()["bounds"] = json{{"a_bar", b.a_bar},         {"c", b.c},         {"degenerate", b.degenerate},
                                 {"down_states", down},      {"down_path", b.down_path},
                                 {"up_states", up},          {"up_path", b.up_path}};
}

inline void solve_growth_verb(const RunConfig& cfg, const json& doc, Artifacts& art) {
  const auto spec = read_growth(doc);
  const auto sol = econ::solve_growth(spec, vfi_options(cfg));
  write_policy(sol, art);
  art.summary()["euler"] = euler_json(econ::growth_euler(spec, sol));
  if (spec.gamma == 1 && spec.delta == 1) {
    double worst = 0;
    for (std::size_t z = 0; z < sol.num_states(); ++z) {
      for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const double closed = spec.alpha * spec.beta * spec.shocks[z] * std::pow(sol.grid[i], spec.alpha);
        worst = std::max(worst, std::abs(sol.policy[z][i] - closed));
      }
    }
    art.summary()["closed_form_sup_error"] = worst;
  }
  try {
    const auto gi = econ::growth_interval(spec, sol);
    art.summary()["k_prime"] = gi.k_prime;
    art.summary()["k_double_prime"] = gi.k_double_prime;
    art.summary()["lemma2"] = gi.lemma2;
  } catch (const ValidationError& e) {
    art.summary()["interval_unavailable"] = e.what();
  }
}

inline void solve_risksharing_verb(const RunConfig& cfg, const json& doc, Artifacts& art) {
  const auto spec = read_risksharing(doc);
  econ::IntervalSolveOptions opt;
  opt.tol = std::min(cfg.tol, 1e-8);
  opt.max_iter = cfg.max_iter;
  auto solved = spec;
  if (spec.intervals.empty()) {
    const auto s = econ::solve_intervals(spec, opt);
    solved.intervals = s.intervals;
    art.summary()["iterations"] = s.iterations;
    art.summary()["autarky"] = s.autarky;
  }
  const auto m = econ::risk_sharing_map(solved);
  Csv csv({"state", "label", "y", "lo", "hi"});
  const auto labels = labels_of(m.srs.driver);
  for (std::size_t y = 0; y < m.intervals.size(); ++y) {
    csv.row({num(y), labels[y], num(spec.endowments[y]), num(m.intervals[y].lo), num(m.intervals[y].hi)});
  }
  art.write("intervals.csv", csv.text());
  art.summary()["c_min"] = m.c_min;
  art.summary()["c_max"] = m.c_max;
  art.summary()["c"] = m.c;
  art.summary()["first_best"] = m.first_best;
}

// ---- reproduce ----

template <Scalar S>
void reproduce_example4(const RunConfig& cfg, Artifacts& art) {
  const auto m = example4_model<S>();
  const auto opt = exact_options<S>(cfg);
  const auto chain = embedded_matrix(m.map, m.driver, m.grid, opt);
  const auto law = stationary(chain);
  const auto mu = limiting_mu(m.map, m.driver, m.grid, law, opt);
  art.write("embedded_matrix.csv", matrix_csv(m.grid, chain.matrix));
  art.write("embedded_matrix.json",
            dump(json{{"grid", exact_json(m.grid.points())}, {"matrix", exact_json(chain.matrix)}}));
  write_stationary(law, m.grid, art);
  art.write("mu.csv", law_csv(m.grid, mu.mass(), "mu"));
  art.write("mu.json", dump(law_json(m.grid, mu.mass())));
  const auto& pi = law.pi;
  const auto& w = mu.mass();
  const S two_fifths = S(2) / S(5);
  S total = 0;
  for (const auto& x : w) total += x;
  auto same = [](const S& a, const S& b) {
    if constexpr (is_exact_v<S>) {
      return a == b;
    } else {
      return std::abs(a - b) < 1e-12;
    }
  };
  art.summary()["mu3_eq_2pi3_over_5"] = same(w[3], two_fifths * pi[3]);
  art.summary()["mu2_formula"] = same(w[2], two_fifths * (pi[2] + pi[3] / S(2)));
  art.summary()["mu1_formula"] = same(w[1], two_fifths * (pi[1] + pi[2] / S(2) + S(5) * pi[3] / S(8)));
  art.summary()["mu_sums_to_one"] = same(total, S(1));
}

template <typename F>
void with_backend(const std::string& backend, F&& f) {
  if (backend == "rational") return f(Rational{});
  if (backend == "float") return f(double{});
  throw ValidationError("--backend must be rational or float, got '" + backend + "'");
}

}  // namespace detail

// ---- validate ----

struct Diagnostic {
  std::string name;
  bool ok = true;
  std::string detail;
  bool required = true;
};

template <Scalar S>
std::vector<Diagnostic> validate_srs(const json& doc) {
  std::vector<Diagnostic> out;
  auto attempt = [&](const std::string& name, auto&& f) {
    try {
      f();
      out.push_back({name, true, "", true});
      return true;
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what(), true});
      return false;
    }
  };
  const Node root(doc, "");
  std::optional<StateGrid<S>> grid;
  std::optional<RegenDriver<S>> driver;
  std::optional<MonotoneMap<S>> map;
  attempt("grid", [&] { grid = read_grid<S>(root["grid"]); });
  attempt("driver: stochastic transition and shock laws", [&] { driver = read_driver<S>(root["driver"]); });
  if (grid) attempt("map", [&] { map = read_map<S>(root["map"], *grid); });
  if (driver) {
    if (driver->enumeration()) {
      const bool aperiodic = aperiodicity_check(*driver);
      std::set<std::size_t> lengths;
      for (const auto& wc : driver->enumeration()->cycles) lengths.insert(wc.cycle.length());
      std::string shown;
      std::size_t k = 0;
      for (auto len : lengths) {
        if (k++ == 8) {
          shown += ", ...";
          break;
        }
        shown += (shown.empty() ? "" : ", ") + std::to_string(len);
      }
      out.push_back({"aperiodicity (cycle lengths {" + shown + "})", aperiodic,
                     aperiodic ? "" : "gcd of the cycle lengths exceeds 1", true});
      out.push_back({"cycle enumeration tail mass", true, "tail mass " + format_exact(driver->enumeration()->tail_mass),
                     false});
    } else {
      out.push_back({"aperiodicity", false, "no cycle enumeration (max_length = 0); cannot decide", false});
    }
  }
  if (grid && map && driver) {
    std::vector<S> shocks;
    for (const auto& law : driver->shock_laws()) shocks.insert(shocks.end(), law.values().begin(), law.values().end());
    std::sort(shocks.begin(), shocks.end());
    shocks.erase(std::unique(shocks.begin(), shocks.end()), shocks.end());
    attempt("map monotone and inside its interval on the grid", [&] {
      const auto rep = verify_monotone(*map, *grid, std::span<const S>(shocks));
      if (!rep.ok()) {
        throw ValidationError(std::to_string(rep.order.size()) + " order and " + std::to_string(rep.range.size()) +
                              " range violations");
      }
    });
    bool closed = true;
    for (const auto& v : shocks) {
      for (std::size_t i = 0; i < grid->size() && closed; ++i) {
        const S y = (*map)(((*grid)[i]), v);
        closed = grid->contains_interval_point(y) && (*grid)[grid->floor_index(y)] == y;
      }
    }
    out.push_back({"grid closed under the map (needed for exact solves)", closed,
                   closed ? "" : "some f(x, v) falls between grid points", false});
  }
  return out;
}

inline std::vector<Diagnostic> from_checks(const std::vector<econ::Check>& cs) {
  std::vector<Diagnostic> out;
  for (const auto& c : cs) out.push_back({c.name, c.ok, c.detail, c.required});
  return out;
}

/// Every invariant check for a spec document, without running the model.
inline std::vector<Diagnostic> validate_document(const json& doc, const std::string& backend = "rational") {
  const std::string kind = spec_kind(doc);
  if (kind == "huggett") return from_checks(read_huggett(doc).checks());
  if (kind == "growth") return from_checks(read_growth(doc).checks());
  if (kind == "risksharing") return from_checks(read_risksharing(doc).checks());
  std::vector<Diagnostic> out;
  detail::with_backend(backend, [&](auto tag) {
    using S = decltype(tag);
    if (kind == "chain") {
      try {
        read_chain<S>(doc);
        out.push_back({"transition stochastic", true, "", true});
      } catch (const std::exception& e) {
        out.push_back({"transition stochastic", false, e.what(), true});
      }
    } else {
      out = validate_srs<S>(doc);
    }
  });
  return out;
}

/// Executes one CLI invocation. Messages go to `log`; the return value is the exit code.
inline int run(const RunConfig& cfg, std::ostream& log) {
  try {
    if (cfg.streams < 1) throw ValidationError("--streams must be at least 1");
    if (cfg.verb == "validate") {
      const auto doc = load_json(cfg.spec_path);
      bool ok = true;
      for (const auto& d : validate_document(doc, cfg.backend)) {
        log << (d.ok ? "PASS " : (d.required ? "FAIL " : "WARN ")) << d.name;
        if (!d.detail.empty()) log << ": " << d.detail;
        log << '\n';
        ok = ok && (d.ok || !d.required);
      }
      return ok ? kOk : kValidation;
    }
    if (cfg.verb == "reproduce") {
      if (cfg.target != "example4") throw ValidationError("reproduce knows only 'example4'");
      detail::Artifacts art(cfg, nullptr);
      detail::with_backend(cfg.backend, [&](auto tag) { detail::reproduce_example4<decltype(tag)>(cfg, art); });
      art.finish();
      return kOk;
    }
    const std::vector<std::string> srs_verbs{"simulate", "couple", "splitting", "embedded",
                                             "stationary", "limit", "contraction"};
    if (cfg.verb == "solve") {
      const auto doc = load_json(cfg.spec_path);
      const std::string kind = spec_kind(doc);
      if (kind != cfg.target) {
        throw SpecError("/kind", "solve " + cfg.target + " got a '" + kind + "' spec");
      }
      detail::Artifacts art(cfg, &doc);
      if (kind == "huggett") {
        detail::solve_huggett_verb(cfg, doc, art);
      } else if (kind == "growth") {
        detail::solve_growth_verb(cfg, doc, art);
      } else if (kind == "risksharing") {
        detail::solve_risksharing_verb(cfg, doc, art);
      } else {
        throw ValidationError("solve needs huggett, growth or risksharing");
      }
      art.finish();
      return kOk;
    }
    if (std::find(srs_verbs.begin(), srs_verbs.end(), cfg.verb) != srs_verbs.end()) {
      const auto doc = load_json(cfg.spec_path);
      detail::Artifacts art(cfg, &doc);
      detail::with_backend(cfg.backend, [&](auto tag) { detail::run_srs<decltype(tag)>(cfg, doc, art); });
      art.finish();
      return kOk;
    }
    throw ValidationError("unknown verb '" + cfg.verb + "'");
  } catch (const NonConvergence& e) {
    log << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const BudgetExceeded& e) {
    log << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace regen_srs::io

#endif  // REGEN_SRS_IO_COMMANDS_HPP
