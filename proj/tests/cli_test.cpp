#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "regen_srs/io/commands.hpp"

namespace fs = std::filesystem;
using namespace regen_srs;
using io::RunConfig;

namespace {

const fs::path kFixtures = REGEN_SRS_FIXTURES;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("regen_srs_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

RunConfig config(const std::string& verb, const std::string& spec, const fs::path& out) {
  RunConfig c;
  c.verb = verb;
  if (!spec.empty()) c.spec_path = (kFixtures / spec).string();
  c.out = out.string();
  return c;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) row.push_back(f);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

int run(const RunConfig& c, std::string* log = nullptr) {
  std::ostringstream os;
  const int code = io::run(c, os);
  if (log) *log = os.str();
  return code;
}

}  // namespace

TEST(Reproduce, Example4MatchesGoldenBytes) {
  const auto out = scratch("golden");
  auto c = config("reproduce", "", out);
  c.target = "example4";
  c.backend = "rational";
  ASSERT_EQ(run(c), 0);
  const fs::path golden = kFixtures / "golden" / "example4";
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(golden)) {
    EXPECT_EQ(slurp(out / e.path().filename()), slurp(e.path())) << e.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 6u);
}

TEST(Reproduce, Example4PublishedValues) {
  const auto out = scratch("published");
  auto c = config("reproduce", "", out);
  c.target = "example4";
  c.backend = "rational";
  ASSERT_EQ(run(c), 0);
  const auto p = read_csv(out / "embedded_matrix.csv");
  const std::vector<std::vector<std::string>> rows{{"1/4", "1/4", "1/4", "1/4"},
                                                   {"1/4", "1/4", "1/4", "1/4"},
                                                   {"3/16", "1/4", "1/4", "5/16"},
                                                   {"3/32", "3/16", "1/4", "15/32"}};
  ASSERT_EQ(p.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::vector<std::string>(p[i + 1].begin() + 1, p[i + 1].end()), rows[i]);
  const auto pi = read_csv(out / "stationary.csv");
  EXPECT_EQ(pi[1][1], "29/160");
  EXPECT_EQ(pi[2][1], "183/800");
  EXPECT_EQ(pi[3][1], "1/4");
  EXPECT_EQ(pi[4][1], "17/50");
  const auto meta = nlohmann::json::parse(slurp(out / "metadata.json"));
  for (const char* k : {"mu1_formula", "mu2_formula", "mu3_eq_2pi3_over_5", "mu_sums_to_one"}) {
    EXPECT_TRUE(meta["summary"][k].get<bool>()) << k;
  }
}

TEST(Stationary, TwoStateBalance) {
  const auto out = scratch("chain");
  auto c = config("stationary", "two_state_chain.json", out);
  c.backend = "rational";
  ASSERT_EQ(run(c), 0);
  // [[1-a, a], [b, 1-b]] with a = 3/10, b = 1/5 balances at (b, a) / (a + b).
  const Rational a(3, 10), b(1, 5);
  const auto rows = read_csv(out / "stationary.csv");
  EXPECT_EQ(rows[1][1], format_exact(Rational(b / (a + b))));
  EXPECT_EQ(rows[2][1], format_exact(Rational(a / (a + b))));
}

TEST(Simulate, IdentityMapStaysPut) {
  const auto out = scratch("identity");
  auto c = config("simulate", "identity.json", out);
  c.x0 = "0.75";
  c.horizon = 200;
  c.streams = 3;
  ASSERT_EQ(run(c), 0);
  const auto rows = read_csv(out / "trajectory.csv");
  ASSERT_EQ(rows.size(), 1 + 3 * 201u);
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_EQ(rows[r][2], "0.75");
}

TEST(Replay, ByteIdenticalOutputs) {
  struct Case {
    std::string verb, spec;
  };
  for (const auto& [verb, spec] : std::vector<Case>{{"simulate", "example4.json"},
                                                    {"couple", "example4.json"},
                                                    {"splitting", "example4.json"},
                                                    {"limit", "example4.json"},
                                                    {"contraction", "example4.json"}}) {
    const auto out = scratch("replay");
    auto c = config(verb, spec, out);
    c.streams = 4;
    c.seed = 77;
    c.samples = 20000;
    c.cycles = 5000;
    c.replications = 500;
    c.k_max = 10;
    ASSERT_EQ(run(c), 0) << verb;
    const auto first = read_dir(out);
    fs::remove_all(out);
    ASSERT_EQ(run(c), 0) << verb;
    EXPECT_EQ(read_dir(out), first) << verb;
  }
}

TEST(Replay, MetadataIsEnoughToRerun) {
  const auto out = scratch("meta");
  auto c = config("limit", "example4.json", out);
  c.streams = 2;
  c.samples = 10000;
  c.cycles = 2000;
  ASSERT_EQ(run(c), 0);
  const auto first = read_dir(out);
  const auto meta = nlohmann::json::parse(first.at("metadata.json"));
  // Rebuild the job from the sidecar alone: its config plus the embedded spec.
  const auto spec_copy = scratch("meta_spec.json");
  io::write_file(spec_copy.string(), meta["spec_document"].dump());
  auto again = RunConfig::from_json(meta["config"]);
  again.spec_path = spec_copy.string();
  fs::remove_all(out);
  ASSERT_EQ(run(again), 0);
  const auto second = read_dir(out);
  EXPECT_EQ(second.at("limit.csv"), first.at("limit.csv"));
  EXPECT_EQ(second.at("mu_exact.csv"), first.at("mu_exact.csv"));
}

TEST(Validate, Example4PassesWithLengthsTwoAndThree) {
  std::string log;
  EXPECT_EQ(run(config("validate", "example4.json", scratch("v")), &log), 0);
  EXPECT_NE(log.find("PASS aperiodicity (cycle lengths {2, 3})"), std::string::npos) << log;
  EXPECT_EQ(log.find("FAIL"), std::string::npos) << log;
}

TEST(Validate, PeriodicDriverFails) {
  std::string log;
  EXPECT_EQ(run(config("validate", "periodic.json", scratch("v")), &log), 2);
  EXPECT_NE(log.find("FAIL aperiodicity (cycle lengths {2, 4})"), std::string::npos) << log;
}

TEST(Validate, BorrowingLimitCitesCondition) {
  std::string log;
  EXPECT_EQ(run(config("validate", "huggett_bad_limit.json", scratch("v")), &log), 2);
  EXPECT_NE(log.find("FAIL borrowing limit a_lower + e^1 - a_lower/R > 0"), std::string::npos) << log;
}

TEST(Validate, ModelFixturesPass) {
  for (const char* f : {"huggett.json", "growth.json", "risksharing_beta0.7.json", "two_state_chain.json",
                        "growth_single_state.json", "identity.json"}) {
    std::string log;
    EXPECT_EQ(run(config("validate", f, scratch("v")), &log), 0) << f << "\n" << log;
  }
}

TEST(Errors, SchemaViolationNamesThePath) {
  const auto dir = scratch("schema");
  fs::create_directories(dir);
  const auto spec = dir / "spec.json";
  io::write_file(spec.string(), R"({"kind": "srs", "grid": [0, 1], "map": {"type": "identity"},
    "driver": {"kind": "atom", "shocks": [{"value": 0}], "transition": [[1, "x/y"]]}})");
  RunConfig c;
  c.verb = "simulate";
  c.spec_path = spec.string();
  c.out = (dir / "out").string();
  std::string log;
  EXPECT_EQ(run(c, &log), 2);
  EXPECT_NE(log.find("/driver/transition/0/1"), std::string::npos) << log;

  io::write_file(spec.string(), R"({"kind": "srs", "grid": [0, 1], "driver": {}})");
  EXPECT_EQ(run(c, &log), 2);
  EXPECT_NE(log.find("/map"), std::string::npos) << log;

  io::write_file(spec.string(), R"({"kind": "banana"})");
  EXPECT_EQ(run(c, &log), 2);
  EXPECT_NE(log.find("/kind"), std::string::npos) << log;
}

TEST(Errors, UnknownVerbAndBadBackend) {
  auto c = config("teleport", "example4.json", scratch("e"));
  EXPECT_EQ(run(c), 2);
  c = config("simulate", "example4.json", scratch("e"));
  c.backend = "quad";
  EXPECT_EQ(run(c), 2);
}

TEST(Errors, NonConvergenceExitsThree) {
  auto c = config("solve", "huggett.json", scratch("nc"));
  c.target = "huggett";
  c.max_iter = 3;
  std::string log;
  EXPECT_EQ(run(c, &log), 3);
  EXPECT_NE(log.find("did not converge"), std::string::npos) << log;
}

TEST(Errors, SolveRejectsMismatchedKind) {
  auto c = config("solve", "growth.json", scratch("kind"));
  c.target = "huggett";
  EXPECT_EQ(run(c), 2);
}

TEST(Binary, ExitCodesThroughTheShell) {
  const std::string bin = REGEN_SRS_CLI;
  const auto out = scratch("bin");
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("reproduce example4 --backend rational --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "metadata.json"));
  EXPECT_EQ(status("validate " + (kFixtures / "periodic.json").string()), 2);
  EXPECT_EQ(status("simulate " + (kFixtures / "example4.json").string() + " --backend quad"), 2);
  EXPECT_EQ(status("solve huggett " + (kFixtures / "huggett.json").string() + " --max-iter 2 --out " + out.string()), 3);
}

TEST(Solve, RiskSharingReportsIntervals) {
  const auto out = scratch("rs");
  auto c = config("solve", "risksharing_beta0.7.json", out);
  c.target = "risksharing";
  ASSERT_EQ(run(c), 0);
  const auto rows = read_csv(out / "intervals.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t y = 1; y < rows.size(); ++y) {
    // each interval contains its own endowment
    EXPECT_LE(std::stod(rows[y][3]), std::stod(rows[y][2]) + 1e-8);
    EXPECT_GE(std::stod(rows[y][4]), std::stod(rows[y][2]) - 1e-8);
  }
  const auto meta = nlohmann::json::parse(slurp(out / "metadata.json"));
  EXPECT_FALSE(meta["summary"]["first_best"].get<bool>());
}
