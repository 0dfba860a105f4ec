#ifndef REGEN_SRS_IO_SPEC_JSON_HPP
#define REGEN_SRS_IO_SPEC_JSON_HPP

#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen_srs/econ/growth.hpp"
#include "regen_srs/econ/huggett.hpp"
#include "regen_srs/econ/risk_sharing.hpp"
#include "regen_srs/example4.hpp"
#include "regen_srs/ordered_core.hpp"
#include "regen_srs/regen_drivers.hpp"
#include "regen_srs/scalar.hpp"
#include "regen_srs/srs_engine.hpp"

namespace regen_srs::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// A JSON value plus its JSON-pointer style path, for error messages.
class Node {
public:
  Node(const json& value, std::string path) : v_(&value), path_(std::move(path)) {}

  const json& value() const noexcept { return *v_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw SpecError(path_.empty() ? "/" : path_, what); }

  bool has(const std::string& key) const { return v_->is_object() && v_->contains(key); }

  Node operator[](const std::string& key) const {
    if (!v_->is_object()) fail("expected an object");
    auto it = v_->find(key);
    if (it == v_->end()) throw SpecError(path_ + "/" + key, "required field missing");
    return Node(*it, path_ + "/" + key);
  }

  Node operator[](std::size_t i) const { return Node(array().at(i), path_ + "/" + std::to_string(i)); }

  const json& array() const {
    if (!v_->is_array()) fail("expected an array");
    return *v_;
  }

  std::size_t size() const { return array().size(); }

  std::string str() const {
    if (!v_->is_string()) fail("expected a string");
    return v_->get<std::string>();
  }

  long long integer() const {
    if (!v_->is_number_integer()) fail("expected an integer");
    return v_->get<long long>();
  }

  std::size_t index() const {
    const long long i = integer();
    if (i < 0) fail("expected a nonnegative integer");
    return static_cast<std::size_t>(i);
  }

  bool boolean() const {
    if (!v_->is_boolean()) fail("expected true or false");
    return v_->get<bool>();
  }

  /// Exact value: an integer, a decimal (read through its shortest round-trip
  /// text, so 0.1 is 1/10), a "p/q" string, or a [p, q] pair of integers.
  Rational rational() const {
    try {
      if (v_->is_number_integer()) return Rational(BigInt(v_->dump()));
      if (v_->is_number_float()) {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, v_->get<double>());
        return parse_scalar<Rational>(std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)));
      }
      if (v_->is_string()) return parse_scalar<Rational>(v_->get<std::string>());
      if (v_->is_array() && v_->size() == 2 && (*v_)[0].is_number_integer() && (*v_)[1].is_number_integer()) {
        const BigInt den((*v_)[1].dump());
        if (den == 0) fail("zero denominator");
        return Rational(BigInt((*v_)[0].dump()), den);
      }
    } catch (const SpecError&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
    fail("expected a number, a \"p/q\" string or a [p, q] pair");
  }

  template <Scalar S>
  S scalar() const {
    if constexpr (is_exact_v<S>) {
      return rational();
    } else {
      if (v_->is_number()) return v_->get<double>();
      return to_double(rational());
    }
  }

  double real() const { return scalar<double>(); }

  template <Scalar S>
  std::vector<S> scalars() const {
    std::vector<S> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].template scalar<S>());
    return out;
  }

  template <Scalar S>
  Matrix<S> matrix() const {
    Matrix<S> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].template scalars<S>());
    return out;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].index());
    return out;
  }

  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].str());
    return out;
  }

  template <typename T, typename Read>
  T get_or(const std::string& key, T fallback, Read read) const {
    return has(key) ? read((*this)[key]) : fallback;
  }

private:
  const json* v_;
  std::string path_;
};

/// Reads and parses a spec file. Unreadable files and malformed JSON are
/// ValidationErrors; the parse error carries the byte offset.
inline json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read spec file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw SpecError("/", std::string("malformed JSON: ") + e.what());
  }
}

/// The "kind" discriminator, checked against the known kinds, plus the
/// optional "version" (must equal the schema version when present).
inline std::string spec_kind(const json& doc) {
  const Node root(doc, "");
  if (!doc.is_object()) root.fail("spec must be a JSON object");
  if (root.has("version") && root["version"].integer() != kSchemaVersion) {
    throw SpecError("/version", "unsupported schema version (this build reads version " +
                                    std::to_string(kSchemaVersion) + ")");
  }
  const std::string kind = root["kind"].str();
  for (const char* k : {"srs", "chain", "huggett", "growth", "risksharing"}) {
    if (kind == k) return kind;
  }
  throw SpecError("/kind", "unknown kind '" + kind + "' (expected srs, chain, huggett, growth or risksharing)");
}

template <Scalar S>
StateGrid<S> read_grid(const Node& n) {
  try {
    if (n.value().is_object()) {
      const auto lo = n["lo"].template scalar<S>(), hi = n["hi"].template scalar<S>();
      return StateGrid<S>::uniform(lo, hi, n["n"].index());
    }
    return StateGrid<S>(n.template scalars<S>());
  } catch (const SpecError&) {
    throw;
  } catch (const ValidationError& e) {
    n.fail(e.what());
  }
}

template <Scalar S>
std::vector<ShockLaw<S>> read_shocks(const Node& n) {
  std::vector<ShockLaw<S>> out;
  for (std::size_t z = 0; z < n.size(); ++z) {
    const Node law = n[z];
    try {
      if (law.has("value")) {
        out.push_back(ShockLaw<S>::degenerate(law["value"].template scalar<S>()));
      } else {
        out.emplace_back(law["values"].template scalars<S>(), law["probs"].template scalars<S>());
      }
    } catch (const SpecError&) {
      throw;
    } catch (const ValidationError& e) {
      law.fail(e.what());
    }
  }
  return out;
}

inline EnumerationOptions read_enumeration(const Node& n) {
  EnumerationOptions opt;
  if (n.has("max_length")) opt.max_length = n["max_length"].index();
  if (n.has("max_paths")) opt.max_paths = n["max_paths"].index();
  return opt;
}

/// {"kind": "atom" | "word" | "explicit", "shocks": [...], "labels": [...], ...}
template <Scalar S>
RegenDriver<S> read_driver(const Node& n) {
  const std::string kind = n["kind"].str();
  auto shocks = read_shocks<S>(n["shocks"]);
  const auto labels = n.has("labels") ? n["labels"].strings() : std::vector<std::string>{};
  try {
    if (kind == "atom") {
      return markov_atom_driver<S>(n["transition"].template matrix<S>(), n.has("atom") ? n["atom"].index() : 0,
                                   std::move(shocks), read_enumeration(n), labels);
    }
    if (kind == "word") {
      std::vector<std::vector<EnvState>> words;
      const Node w = n["words"];
      for (std::size_t i = 0; i < w.size(); ++i) words.push_back(w[i].indices());
      return word_driver<S>(n["transition"].template matrix<S>(), std::move(words), std::move(shocks),
                            read_enumeration(n), labels);
    }
    if (kind == "explicit") {
      std::vector<WeightedCycle<S>> cycles;
      const Node c = n["cycles"];
      for (std::size_t i = 0; i < c.size(); ++i) {
        cycles.push_back({c[i]["p"].template scalar<S>(), Cycle{c[i]["states"].indices()}});
      }
      return explicit_cycle_driver<S>(std::move(cycles), std::move(shocks), labels);
    }
  } catch (const SpecError&) {
    throw;
  } catch (const ValidationError& e) {
    n.fail(e.what());
  }
  throw SpecError(n.path() + "/kind", "unknown driver kind '" + kind + "' (expected atom, word or explicit)");
}

/// Maps: identity x; reset v; clamp_add min(hi, max(lo, x + v));
/// clamp_interval clamp(x, I_v) with v an interval index;
/// table next[v][i] = grid index of f(x_i, v).
template <Scalar S>
MonotoneMap<S> read_map(const Node& n, const StateGrid<S>& grid) {
  const std::string type = n["type"].str();
  const S lo = n.has("lo") ? n["lo"].template scalar<S>() : grid.bottom();
  const S hi = n.has("hi") ? n["hi"].template scalar<S>() : grid.top();
  if (hi < lo) n.fail("map interval has hi < lo");
  if (type == "identity") return {[](const S& x, const S&) { return x; }, lo, hi, "identity"};
  if (type == "reset") return {[](const S&, const S& v) { return v; }, lo, hi, "reset to the shock"};
  if (type == "clamp_add") return clamp_add_map<S>(lo, hi);
  if (type == "clamp_interval") {
    auto iv = std::make_shared<std::vector<std::pair<S, S>>>();
    const Node list = n["intervals"];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const S a = list[i][0].template scalar<S>(), b = list[i][1].template scalar<S>();
      if (b < a) list[i].fail("interval has hi < lo");
      iv->emplace_back(a, b);
    }
    return {[iv](const S& x, const S& v) {
              const auto k = static_cast<std::size_t>(to_double(v));
              if (k >= iv->size()) throw ValidationError("clamp_interval: shock does not name an interval");
              const auto& [a, b] = (*iv)[k];
              return x < a ? a : (b < x ? b : x);
            },
            lo, hi, "clamp into interval v"};
  }
  if (type == "table") {
    auto table = std::make_shared<std::vector<std::vector<std::size_t>>>();
    const Node rows = n["next"];
    for (std::size_t z = 0; z < rows.size(); ++z) {
      auto row = rows[z].indices();
      if (row.size() != grid.size()) rows[z].fail("table row needs one entry per grid point");
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] >= grid.size()) rows[z][i].fail("grid index out of range");
      }
      table->push_back(std::move(row));
    }
    auto g = std::make_shared<StateGrid<S>>(grid);
    return {[table, g](const S& x, const S& v) {
              const auto z = static_cast<std::size_t>(to_double(v));
              if (z >= table->size()) throw ValidationError("table map: shock does not name a row");
              return (*g)[(*table)[z][g->floor_index(x)]];
            },
            lo, hi, "tabulated map"};
  }
  throw SpecError(n.path() + "/type", "unknown map type '" + type +
                                          "' (expected identity, reset, clamp_add, clamp_interval or table)");
}

/// {"kind": "srs", "grid": [...] | {"lo","hi","n"}, "map": {...}, "driver": {...}}
template <Scalar S>
SrsModel<S> read_srs(const json& doc) {
  const Node root(doc, "");
  auto grid = read_grid<S>(root["grid"]);
  auto map = read_map<S>(root["map"], grid);
  auto driver = read_driver<S>(root["driver"]);
  return {std::move(grid), std::move(map), std::move(driver)};
}

template <Scalar S>
struct ChainSpec {
  Matrix<S> transition;
  std::vector<std::string> labels;
};

/// {"kind": "chain", "transition": [[...]], "labels": [...]}
template <Scalar S>
ChainSpec<S> read_chain(const json& doc) {
  const Node root(doc, "");
  ChainSpec<S> out{root["transition"].template matrix<S>(), {}};
  if (root.has("labels")) out.labels = root["labels"].strings();
  try {
    detail::validate_stochastic(out.transition);
  } catch (const ValidationError& e) {
    root["transition"].fail(e.what());
  }
  if (!out.labels.empty() && out.labels.size() != out.transition.size()) root["labels"].fail("one label per state");
  return out;
}

inline econ::HuggettSpec read_huggett(const json& doc) {
  const Node root(doc, "");
  econ::HuggettSpec s;
  auto real = [](const Node& n) { return n.real(); };
  auto count = [](const Node& n) { return n.index(); };
  s.gamma = root.get_or("gamma", s.gamma, real);
  s.beta = root.get_or("beta", s.beta, real);
  s.R = root.get_or("R", s.R, real);
  s.endowments = root["endowments"].scalars<double>();
  s.transition = root["transition"].matrix<double>();
  s.a_lower = root.get_or("a_lower", s.a_lower, real);
  s.a_max = root.get_or("a_max", s.a_max, real);
  s.nodes = root.get_or("nodes", s.nodes, count);
  s.curvature = root.get_or("curvature", s.curvature, real);
  if (root.has("labels")) s.labels = root["labels"].strings();
  return s;
}

inline econ::GrowthSpec read_growth(const json& doc) {
  const Node root(doc, "");
  econ::GrowthSpec s;
  auto real = [](const Node& n) { return n.real(); };
  auto count = [](const Node& n) { return n.index(); };
  s.alpha = root.get_or("alpha", s.alpha, real);
  s.beta = root.get_or("beta", s.beta, real);
  s.gamma = root.get_or("gamma", s.gamma, real);
  s.delta = root.get_or("delta", s.delta, real);
  s.shocks = root["shocks"].scalars<double>();
  s.transition = root["transition"].matrix<double>();
  s.k_lo = root.get_or("k_lo", s.k_lo, real);
  s.k_max = root.get_or("k_max", s.k_max, real);
  s.nodes = root.get_or("nodes", s.nodes, count);
  if (root.has("labels")) s.labels = root["labels"].strings();
  return s;
}

inline econ::RiskSharingSpec read_risksharing(const json& doc) {
  const Node root(doc, "");
  econ::RiskSharingSpec s;
  auto real = [](const Node& n) { return n.real(); };
  s.gamma = root.get_or("gamma", s.gamma, real);
  s.beta = root.get_or("beta", s.beta, real);
  s.Y = root.get_or("Y", s.Y, real);
  s.endowments = root["endowments"].scalars<double>();
  s.transition = root["transition"].matrix<double>();
  if (root.has("intervals")) {
    const Node list = root["intervals"];
    for (std::size_t i = 0; i < list.size(); ++i) s.intervals.push_back({list[i][0].real(), list[i][1].real()});
  }
  if (root.has("labels")) s.labels = root["labels"].strings();
  return s;
}

// ---- writers ----

/// Exact JSON value: "p/q" strings for rationals (numbers would overflow), numbers for floats.
template <Scalar S>
json exact_json(const S& x) {
  if constexpr (is_exact_v<S>) {
    return format_exact(x);
  } else {
    return x;
  }
}

template <Scalar S>
json exact_json(std::span<const S> xs) {
  json out = json::array();
  for (const auto& x : xs) out.push_back(exact_json(x));
  return out;
}

template <Scalar S>
json exact_json(const std::vector<S>& xs) {
  return exact_json(std::span<const S>(xs));
}

template <Scalar S>
json exact_json(const Matrix<S>& m) {
  json out = json::array();
  for (const auto& row : m) out.push_back(exact_json(row));
  return out;
}

/// Writes text with LF endings exactly as given.
inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace regen_srs::io

#endif  // REGEN_SRS_IO_SPEC_JSON_HPP
