#include <actsketch/stats.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace actsketch;

namespace {

PValueMatrix degenerate_matrix(std::size_t rows, std::size_t cols, std::mt19937_64 &rng) {
  PValueMatrix p(rows, cols, Method::empirical);
  std::uniform_int_distribution<int> k(1, 51);
  for (auto &r : p.entries) {
    const double v = k(rng) / 51.0;
    r = {v, v};
  }
  return p;
}

std::string temp_path(const std::string &name) {
  return (std::filesystem::temp_directory_path() / ("actsketch_stats_" + name)).string();
}

}  // namespace

TEST(KolmogorovSurvival, MatchesReferenceValues) {
  // scipy.special.kolmogorov
  EXPECT_NEAR(kolmogorov_survival(0.2), 0.999999999999495, 1e-9);
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-9);
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-9);
  EXPECT_NEAR(kolmogorov_survival(1.5), 0.022217962616525127, 1e-9);
  EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
  EXPECT_EQ(kolmogorov_survival(-1.0), 1.0);
  EXPECT_LT(kolmogorov_survival(10.0), 1e-80);
}

TEST(KolmogorovSurvival, ContinuousAcrossBranchAndMonotone) {
  EXPECT_NEAR(kolmogorov_survival(std::nextafter(1.18, 0.0)), kolmogorov_survival(1.18), 1e-9);
  double prev = 1.0;
  for (double l = 0.01; l < 4.0; l += 0.01) {
    const double s = kolmogorov_survival(l);
    ASSERT_LE(s, prev + 1e-12);
    prev = s;
  }
}

TEST(KsTwoSample, IdenticalAndDisjoint) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const auto same = ks_two_sample(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  const std::vector<double> b{10, 11, 12};
  const auto apart = ks_two_sample(a, b);
  EXPECT_EQ(apart.statistic, 1.0);
  EXPECT_EQ(apart.n1, 5u);
  EXPECT_EQ(apart.n2, 3u);
  EXPECT_THROW(ks_two_sample(a, std::vector<double>{}), Error);
}

TEST(KsTwoSample, ShiftedGrid) {
  std::vector<double> a, b;
  for (int k = 1; k <= 10; ++k) {
    a.push_back(k / 10.0);
    b.push_back(k / 10.0 + 0.05);
  }
  const auto r = ks_two_sample(a, b);
  EXPECT_NEAR(r.statistic, 0.1, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-9);
}

TEST(KsTwoSample, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n1 = 1 + rng() % 200, n2 = 1 + rng() % 200;
    const bool ties = rng() % 2;
    std::uniform_int_distribution<int> coarse(0, 8);
    std::normal_distribution<double> fine(0.0, 1.0);
    std::vector<double> a(n1), b(n2);
    for (auto &x : a) x = ties ? coarse(rng) : fine(rng);
    for (auto &x : b) x = ties ? coarse(rng) : fine(rng) + 0.3;
    const auto r = ks_two_sample(a, b);
    ASSERT_NEAR(r.statistic, oracle::ks_statistic(a, b), 1e-12);
    ASSERT_EQ(r.statistic, ks_two_sample(b, a).statistic);
    ASSERT_GE(r.p_value, 0.0);
    ASSERT_LE(r.p_value, 1.0);
  }
}

TEST(KsTwoSample, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> a(80), b(60);
  for (auto &x : a) x = d(rng);
  for (auto &x : b) x = d(rng) + 0.5;
  auto ta = a, tb = b;
  for (auto &x : ta) x = std::exp(x);
  for (auto &x : tb) x = std::exp(x);
  EXPECT_EQ(ks_two_sample(a, b).statistic, ks_two_sample(ta, tb).statistic);
}

TEST(Auroc, Examples) {
  // 6 strict wins and 2 ties among the 9 pairs
  const std::vector<double> neg{1, 2, 3}, pos{2, 3, 4};
  EXPECT_DOUBLE_EQ(auroc(neg, pos), 7.0 / 9.0);
  EXPECT_DOUBLE_EQ(auroc(neg, pos), oracle::auroc(neg, pos));
  EXPECT_EQ(auroc(std::vector<double>{1, 2}, std::vector<double>{3, 4}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{3, 4}, std::vector<double>{1, 2}), 0.0);
  EXPECT_EQ(auroc(std::vector<double>{5, 5}, std::vector<double>{5}), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{1}), Error);
}

TEST(Auroc, MatchesPairEnumerationAndComplement) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> v(0, 6);
    std::vector<double> neg(1 + rng() % 40), pos(1 + rng() % 40);
    for (auto &x : neg) x = v(rng);
    for (auto &x : pos) x = v(rng) + 1;
    const double a = auroc(neg, pos);
    ASSERT_NEAR(a, oracle::auroc(neg, pos), 1e-12);
    ASSERT_NEAR(a + auroc(pos, neg), 1.0, 1e-12);
    auto tn = neg, tp = pos;
    for (auto &x : tn) x = 3.0 * x - 1.0;
    for (auto &x : tp) x = 3.0 * x - 1.0;
    ASSERT_NEAR(auroc(tn, tp), a, 1e-12);
  }
}

TEST(CompareRepresentations, IdenticalInputsGiveZero) {
  std::mt19937_64 rng(1);
  const auto p = degenerate_matrix(100, 7, rng);
  const auto r = compare_representations(p, p, 5);
  ASSERT_EQ(r.per_node.size(), 7u);
  EXPECT_EQ(r.mean_statistic, 0.0);
  EXPECT_EQ(r.mean_p_value, 1.0);
  for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(r.per_node[j].node, j);
}

TEST(CompareRepresentations, SimilarDistributionsOnSingleNode) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> bg(500), test(500);
  for (auto &x : bg) x = d(rng);
  for (auto &x : test) x = d(rng);
  const ActivationMatrix background(500, 1, bg);
  const ActivationMatrix clean(500, 1, test, Role::clean);
  const auto ref = score_matrix(build_empirical(background), clean);
  const auto cand = score_matrix(build_sketch(background), clean);
  const auto r = compare_representations(ref, cand, 7);
  EXPECT_LT(r.mean_statistic, 0.10);
  EXPECT_GE(r.mean_p_value, 0.05);
}

TEST(CompareRepresentations, DeterminismRepeatsAndThreads) {
  std::mt19937_64 rng(4);
  const auto ref = degenerate_matrix(60, 9, rng);
  PValueMatrix cand = ref;
  for (auto &e : cand.entries) e = {e.p_min * 0.5, e.p_min};
  const auto a = compare_representations(ref, cand, 11);
  const auto b = compare_representations(ref, cand, 11, 1, 4);
  EXPECT_EQ(to_json_value(a), to_json_value(b));
  const auto c = compare_representations(ref, cand, 11, 5);
  EXPECT_EQ(to_json_value(c), to_json_value(compare_representations(ref, cand, 11, 5, 3)));
  EXPECT_EQ(to_json_value(c)["repeats"], 5);
  EXPECT_FALSE(to_json_value(a).contains("repeats"));
}

TEST(CompareRepresentations, Errors) {
  std::mt19937_64 rng(5);
  const auto a = degenerate_matrix(10, 3, rng);
  const auto b = degenerate_matrix(10, 4, rng);
  try {
    compare_representations(a, b, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
  auto wide = a;
  wide.entries[0] = {0.1, 0.9};
  try {
    compare_representations(wide, a, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_THROW(compare_representations(a, a, 0, 0), Error);
}

TEST(ComparisonReport, JsonFields) {
  std::mt19937_64 rng(6);
  const auto p = degenerate_matrix(20, 2, rng);
  const auto j = to_json_value(compare_representations(p, p, 3));
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["per_node"].size(), 2u);
  EXPECT_EQ(j["per_node"][1]["node"], 1);
  EXPECT_TRUE(j.contains("mean_statistic"));
  EXPECT_TRUE(j.contains("mean_p_value"));
}

TEST(ExportDistribution, RowsAndDeterminism) {
  std::mt19937_64 rng(7);
  PValueMatrix p(25, 12, Method::histogram_range);
  for (auto &e : p.entries) e = {0.2, 0.6};
  std::vector<std::size_t> nodes(10);
  for (std::size_t j = 0; j < 10; ++j) nodes[j] = j;
  const auto csv = distribution_to_csv(p, nodes, 1);
  const auto rows = detail::lines(csv);
  ASSERT_EQ(rows.size(), 1 + 10 * 25u);
  EXPECT_EQ(rows.front(), "node,sample,p_min,p_max,drawn_value");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto cells = detail::split(rows[k], ',');
    ASSERT_EQ(cells.size(), 5u);
    const double v = *detail::parse_double(cells[4]);
    ASSERT_GE(v, 0.2);
    ASSERT_LE(v, 0.6);
  }
  EXPECT_EQ(csv, distribution_to_csv(p, nodes, 1));
  EXPECT_NE(csv, distribution_to_csv(p, nodes, 2));

  EXPECT_EQ(distribution_to_csv(p, {}, 1), "node,sample,p_min,p_max,drawn_value\n");
  const std::vector<std::size_t> bad{12};
  EXPECT_THROW(distribution_to_csv(p, bad, 1), Error);

  const auto path = temp_path("export.csv");
  export_distribution(p, nodes, path, 1);
  EXPECT_EQ(detail::read_file(path), csv);
  std::filesystem::remove(path);
}
