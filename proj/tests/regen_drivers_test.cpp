#include <gtest/gtest.h>

#include <map>
#include <random>

#include "regen_srs/example4.hpp"
#include "regen_srs/regen_drivers.hpp"

using namespace regen_srs;

namespace {

std::vector<ShockLaw<double>> zero_shocks(std::size_t n) {
  return std::vector<ShockLaw<double>>(n, ShockLaw<double>::degenerate(0.0));
}

std::vector<ShockLaw<Rational>> zero_shocks_q(std::size_t n) {
  return std::vector<ShockLaw<Rational>>(n, ShockLaw<Rational>::degenerate(Rational(0)));
}

// Plain Gaussian elimination, kept separate from the library solver.
std::vector<double> gauss(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    }
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

// Expected return time to `atom` via the absorbing-chain system h = 1 + Q h.
double return_time_oracle(const Matrix<double>& p, std::size_t atom) {
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != atom) others.push_back(i);
  }
  const std::size_t m = others.size();
  std::vector<std::vector<double>> a(m, std::vector<double>(m));
  std::vector<double> b(m, 1.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) a[r][c] = (r == c ? 1.0 : 0.0) - p[others[r]][others[c]];
  }
  const auto h = m ? gauss(a, b) : std::vector<double>{};
  double mean = 1;
  for (std::size_t r = 0; r < m; ++r) mean += p[atom][others[r]] * h[r];
  return mean;
}

const Matrix<double> three_state{{0.2, 0.5, 0.3}, {0.4, 0.1, 0.5}, {0.6, 0.3, 0.1}};

}  // namespace

TEST(MarkovAtomDriver, GeometricReturnTimes) {
  const Matrix<Rational> p{{Rational(1, 2), Rational(1, 2)}, {Rational(1, 2), Rational(1, 2)}};
  const auto d = markov_atom_driver(p, 0, zero_shocks_q(2));
  ASSERT_TRUE(d.enumeration());
  std::map<std::size_t, Rational> law;
  for (const auto& wc : d.enumeration()->cycles) law[wc.cycle.length()] += wc.probability;
  for (std::size_t k = 1; k <= 20; ++k) {
    EXPECT_EQ(law[k], Rational(BigInt(1), BigInt(1) << k)) << "k=" << k;
  }
  const Matrix<double> pd{{0.5, 0.5}, {0.5, 0.5}};
  const auto m = mean_cycle_length(d);
  EXPECT_TRUE(m.exact);
  EXPECT_NEAR(to_double(m.value), return_time_oracle(pd, 0), 1e-15);
}

TEST(MarkovAtomDriver, TruncationReportsTail) {
  const Matrix<Rational> p{{Rational(1, 2), Rational(1, 2)}, {Rational(1, 2), Rational(1, 2)}};
  const auto d = markov_atom_driver(p, 0, zero_shocks_q(2), {30});
  const auto m = mean_cycle_length(d);
  EXPECT_EQ(m.tail_mass, Rational(BigInt(1), BigInt(1) << 30));
  // Closed form: sum_{k<=30} k 2^-k = 2 - 32 * 2^-30.
  EXPECT_EQ(m.value, Rational(2) - Rational(32) * m.tail_mass);
  EXPECT_NEAR(to_double(m.value), 2.0, 1e-6);
}

TEST(MarkovAtomDriver, SingleStateHasUnitCycles) {
  const auto d = markov_atom_driver<double>({{1.0}}, 0, zero_shocks(1));
  CounterRng rng(1, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(d.sample_cycle(rng).length(), 1u);
  EXPECT_EQ(d.enumeration()->cycles.size(), 1u);
  EXPECT_EQ(d.enumeration()->tail_mass, 0.0);
}

TEST(MarkovAtomDriver, Validation) {
  EXPECT_THROW(markov_atom_driver<double>({{0.5, 0.4}, {0.5, 0.5}}, 0, zero_shocks(2)), ValidationError);
  EXPECT_THROW(markov_atom_driver<double>({{1.0, 0.0}, {0.0, 1.0}}, 0, zero_shocks(2)), ValidationError);
  EXPECT_THROW(markov_atom_driver<double>({{0.5, 0.5}, {0.5, 0.5}}, 0, zero_shocks(1)), ValidationError);
  EXPECT_THROW(markov_atom_driver<double>({{0.5, 0.5}, {0.5, 0.5}}, 2, zero_shocks(2)), ValidationError);
}

TEST(MarkovAtomDriver, EmpiricalReturnTimeMatchesStationaryOracle) {
  const auto d = markov_atom_driver(three_state, 1, zero_shocks(3), {0});
  // 1 / pi_atom, with pi from power iteration.
  std::vector<double> pi{1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> next(3, 0.0);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) next[j] += pi[i] * three_state[i][j];
    }
    pi = next;
  }
  const auto m = mean_cycle_length(d, 100000, 77);
  EXPECT_FALSE(m.exact);
  EXPECT_NEAR(m.value, 1.0 / pi[1], 3 * m.standard_error);
  EXPECT_NEAR(1.0 / pi[1], return_time_oracle(three_state, 1), 1e-12);
}

TEST(MarkovAtomDriver, CycleLawGoodnessOfFit) {
  const auto d = markov_atom_driver(three_state, 0, zero_shocks(3));
  std::map<std::size_t, double> exact;
  for (const auto& wc : d.enumeration()->cycles) exact[wc.cycle.length()] += wc.probability;
  const std::size_t n = 100000;
  std::map<std::size_t, double> seen;
  CounterRng rng(9, 3);
  for (std::size_t i = 0; i < n; ++i) seen[d.sample_cycle(rng).length()] += 1;
  for (const auto& [len, p] : exact) {
    const double se = std::sqrt(p * (1 - p) / n);
    if (p < 1e-6) continue;
    EXPECT_NEAR(seen[len] / n, p, 4 * se + 1e-12) << "length " << len;
  }
}

TEST(MarkovAtomDriver, SuccessiveCycleLengthsUncorrelated) {
  const auto d = markov_atom_driver(three_state, 2, zero_shocks(3), {0});
  const std::size_t n = 100000;
  std::vector<double> len(n);
  CounterRng rng(4, 0);
  for (auto& l : len) l = static_cast<double>(d.sample_cycle(rng).length());
  double mean = 0;
  for (double l : len) mean += l;
  mean /= n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) num += (len[i] - mean) * (len[i + 1] - mean);
  for (double l : len) den += (l - mean) * (l - mean);
  EXPECT_LT(std::abs(num / den), 4 / std::sqrt(static_cast<double>(n)));
}

TEST(MarkovAtomDriver, ConcatenatedCyclesReproduceTransitions) {
  const auto d = markov_atom_driver(three_state, 0, zero_shocks(3), {0});
  std::vector<std::vector<double>> counts(3, std::vector<double>(3, 0.0));
  CounterRng rng(12, 0);
  std::vector<EnvState> path;
  while (path.size() < 300000) {
    const auto c = d.sample_cycle(rng);
    path.insert(path.end(), c.states.begin(), c.states.end());
  }
  for (std::size_t t = 0; t + 1 < path.size(); ++t) counts[path[t]][path[t + 1]] += 1;
  for (int i = 0; i < 3; ++i) {
    double row = 0;
    for (double c : counts[i]) row += c;
    for (int j = 0; j < 3; ++j) {
      const double p = three_state[i][j];
      EXPECT_NEAR(counts[i][j] / row, p, 4 * std::sqrt(p * (1 - p) / row));
    }
  }
}

TEST(WordDriver, SingleLetterWordMatchesAtomDriver) {
  const Matrix<Rational> p{{Rational(1, 3), Rational(2, 3)}, {Rational(3, 4), Rational(1, 4)}};
  const auto a = markov_atom_driver(p, 0, zero_shocks_q(2), {20});
  const auto w = word_driver(p, {{0}}, zero_shocks_q(2), {20});
  ASSERT_EQ(a.enumeration()->cycles.size(), w.enumeration()->cycles.size());
  for (std::size_t i = 0; i < a.enumeration()->cycles.size(); ++i) {
    EXPECT_EQ(a.enumeration()->cycles[i].cycle, w.enumeration()->cycles[i].cycle);
    EXPECT_EQ(a.enumeration()->cycles[i].probability, w.enumeration()->cycles[i].probability);
  }
  EXPECT_EQ(a.enumeration()->tail_mass, w.enumeration()->tail_mass);
}

TEST(WordDriver, PatternRenewalGap) {
  const Matrix<double> p{{0.5, 0.5}, {0.5, 0.5}};
  const auto d = word_driver(p, {{0, 1}}, zero_shocks(2));
  const auto m = mean_cycle_length(d);
  EXPECT_NEAR(m.value, 4.0, 1e-12);

  // Oracle: direct simulation of the chain, counting completions of "01"
  // spaced at least two steps apart.
  std::mt19937_64 gen(99);
  std::bernoulli_distribution coin(0.5);
  const std::size_t steps = 1000000;
  int prev = coin(gen), last = -10, hits = 0;
  long first = -1, final_hit = -1;
  for (std::size_t t = 1; t < steps; ++t) {
    const int cur = coin(gen);
    if (prev == 0 && cur == 1 && static_cast<long>(t) - last >= 2) {
      ++hits;
      last = static_cast<int>(t);
      if (first < 0) first = static_cast<long>(t);
      final_hit = static_cast<long>(t);
    }
    prev = cur;
  }
  const double gap = static_cast<double>(final_hit - first) / (hits - 1);
  EXPECT_NEAR(gap, m.value, 0.05);

  CounterRng rng(5, 0);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(d.sample_cycle(rng).length());
  EXPECT_NEAR(sum / n, 4.0, 0.05);
}

TEST(WordDriver, Validation) {
  const Matrix<double> p{{0.5, 0.5}, {0.5, 0.5}};
  const Matrix<double> q{{0.0, 1.0}, {0.5, 0.5}};
  EXPECT_THROW(word_driver(p, {{0, 1}, {1, 0}}, zero_shocks(2)), ValidationError);
  EXPECT_THROW(word_driver(q, {{0, 0, 1}}, zero_shocks(2)), ValidationError);
  EXPECT_THROW(word_driver(p, {{0, 1}, {1, 0, 1}}, zero_shocks(2)), ValidationError);
  EXPECT_THROW(word_driver(p, {{}}, zero_shocks(2)), ValidationError);
  EXPECT_NO_THROW(word_driver(p, {{0, 0, 1}, {1, 1, 1}}, zero_shocks(2)));
}

TEST(ExplicitDriver, ExampleMeans) {
  const auto ex4 = example4_model<Rational>();
  EXPECT_EQ(mean_cycle_length(ex4.driver).value, Rational(5, 2));
  EXPECT_TRUE(aperiodicity_check(ex4.driver));

  const Rational h(1, 2);
  const auto ex3 = explicit_cycle_driver<Rational>({{h, Cycle{{1, 0, 0}}}, {h, Cycle{{1, 1, 1, 0}}}},
                                                   zero_shocks_q(2));
  EXPECT_EQ(mean_cycle_length(ex3).value, Rational(7, 2));
  EXPECT_TRUE(aperiodicity_check(ex3));
}

TEST(ExplicitDriver, SingleUnitCycleIsIid) {
  const auto d = explicit_cycle_driver<double>({{1.0, Cycle{{0}}}}, zero_shocks(1));
  CounterRng rng(0, 0);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(d.sample_cycle(rng).length(), 1u);
  EXPECT_EQ(mean_cycle_length(d).value, 1.0);
}

TEST(ExplicitDriver, Validation) {
  EXPECT_THROW(explicit_cycle_driver<double>({{0.5, Cycle{{0}}}, {0.4, Cycle{{0, 0}}}}, zero_shocks(1)),
               ValidationError);
  EXPECT_THROW(explicit_cycle_driver<double>({{1.0, Cycle{{0, 1}}}}, zero_shocks(1)), ValidationError);
  EXPECT_THROW(explicit_cycle_driver<double>({}, zero_shocks(1)), ValidationError);
}

TEST(ExplicitDriver, SamplingAgreesWithLaw) {
  const auto d = example4_model<double>().driver;
  CounterRng rng(21, 0);
  const int n = 100000;
  int twos = 0;
  for (int i = 0; i < n; ++i) twos += d.sample_cycle(rng).length() == 2;
  EXPECT_NEAR(twos / double(n), 0.5, 4 * std::sqrt(0.25 / n));
}

TEST(Aperiodicity, Cases) {
  auto lengths = [](std::vector<std::size_t> ls) {
    std::vector<WeightedCycle<Rational>> cs;
    for (auto l : ls) cs.push_back({Rational(1, static_cast<long>(ls.size())), Cycle{std::vector<EnvState>(l, 0)}});
    return explicit_cycle_driver<Rational>(cs, zero_shocks_q(1));
  };
  EXPECT_TRUE(aperiodicity_check(lengths({2, 3})));
  EXPECT_FALSE(aperiodicity_check(lengths({2, 4})));
  EXPECT_TRUE(aperiodicity_check(lengths({1})));
  const auto sampled = markov_atom_driver<double>({{0.5, 0.5}, {0.5, 0.5}}, 0, zero_shocks(2), {0});
  EXPECT_THROW(aperiodicity_check(sampled), ValidationError);
  EXPECT_THROW(mean_cycle_length(sampled), ValidationError);
}

TEST(ShockLaw, ValidatesAndSamples) {
  EXPECT_THROW(ShockLaw<double>({1.0, 2.0}, {0.5}), ValidationError);
  EXPECT_THROW(ShockLaw<double>({1.0, 2.0}, {0.7, 0.7}), ValidationError);
  EXPECT_THROW(ShockLaw<Rational>({Rational(1)}, {Rational(-1)}), ValidationError);
  const ShockLaw<double> law({-1.0, 5.0}, {0.25, 0.75});
  CounterRng rng(3, 1);
  int high = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) high += law.sample(rng) == 5.0;
  EXPECT_NEAR(high / double(n), 0.75, 4 * std::sqrt(0.75 * 0.25 / n));
}

TEST(Driver, ConvertKeepsStructure) {
  const auto q = example4_model<Rational>().driver;
  const auto d = q.convert<double>();
  EXPECT_EQ(d.labels(), q.labels());
  EXPECT_EQ(mean_cycle_length(d).value, 2.5);
  EXPECT_EQ(d.shock_law(1).values(), (std::vector<double>{-1.0, -2.0}));
  const auto back = d.convert<Rational>();
  EXPECT_EQ(mean_cycle_length(back).value, Rational(5, 2));
}

TEST(CounterRng, DeterministicPerStream) {
  CounterRng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs |= x != c();
  }
  EXPECT_TRUE(differs);
}
