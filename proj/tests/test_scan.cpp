#include <actsketch/scan.hpp>
#include <actsketch/stats.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <random>

using namespace actsketch;

TEST(BerkJones, Examples) {
  EXPECT_EQ(berk_jones_score(1, 10, 0.1), 0.0);
  EXPECT_EQ(berk_jones_score(0, 10, 0.1), 0.0);
  EXPECT_NEAR(berk_jones_score(10, 10, 0.1), 23.02585092994046, 1e-12);
  EXPECT_NEAR(berk_jones_score(5, 10, 0.1), 5.108256237659907, 1e-12);
  EXPECT_EQ(berk_jones_score(0, 0, 0.1), 0.0);
  EXPECT_THROW(berk_jones_score(1, 10, 0.0), Error);
  EXPECT_THROW(berk_jones_score(1, 10, 1.0), Error);
  EXPECT_THROW(berk_jones_score(11, 10, 0.5), Error);
}

TEST(BerkJones, MatchesKlOracle) {
  for (std::size_t n = 1; n <= 30; ++n)
    for (std::size_t k = 0; k <= n; ++k)
      for (double a : {0.01, 0.05, 0.2, 0.5}) {
        const double q = static_cast<double>(k) / static_cast<double>(n);
        const double expected = q > a ? static_cast<double>(n) * oracle::bernoulli_kl(q, a) : 0.0;
        ASSERT_NEAR(berk_jones_score(k, n, a), expected, 1e-12 * (1.0 + expected));
      }
}

TEST(AlphaGrid, DefaultAndValidation) {
  const auto g = default_alpha_grid();
  ASSERT_EQ(g.size(), 50u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_DOUBLE_EQ(g.back(), 0.50);
  EXPECT_NO_THROW(validate_alphas(g));
  EXPECT_THROW(validate_alphas(std::vector<double>{}), Error);
  EXPECT_THROW(validate_alphas(std::vector<double>{0.1, 0.1}), Error);
  EXPECT_THROW(validate_alphas(std::vector<double>{0.2, 0.1}), Error);
  EXPECT_THROW(validate_alphas(std::vector<double>{0.0, 0.1}), Error);
  EXPECT_THROW(validate_alphas(std::vector<double>{0.5, 1.0}), Error);
}

TEST(LtssScan, AllOnesGivesEmptySubset) {
  const std::vector<double> p(20, 1.0);
  const auto alphas = default_alpha_grid();
  const auto r = ltss_scan(p, alphas);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_TRUE(r.node_subset.empty());
  EXPECT_EQ(r.alpha_star, alphas.front());
}

TEST(LtssScan, SingleSmallPValue) {
  std::vector<double> p(100, 1.0);
  p[37] = 0.001;
  const auto r = ltss_scan(p, default_alpha_grid());
  ASSERT_EQ(r.node_subset, std::vector<std::size_t>{37});
  EXPECT_NEAR(r.score, -std::log(0.01), 1e-12);
  EXPECT_DOUBLE_EQ(r.alpha_star, 0.01);
}

TEST(LtssScan, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(77);
  std::vector<double> alphas;
  for (int k = 1; k <= 20; ++k) alphas.push_back(k * 0.025);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 15;
    std::vector<double> p(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grid(1, 41);
    const bool ties = rng() % 2;
    for (auto &x : p) x = ties ? grid(rng) / 41.0 : std::pow(u(rng), 1.0 + (rng() % 4));
    const auto r = ltss_scan(p, alphas);
    const double best = oracle::exhaustive_scan(p, alphas);
    ASSERT_NEAR(r.score, best, 1e-12 * (1.0 + best)) << "trial " << trial;

    // the reported subset and alpha reproduce the score
    std::size_t sig = 0;
    for (auto j : r.node_subset) sig += p[j] <= r.alpha_star;
    ASSERT_NEAR(berk_jones_score(sig, r.node_subset.size(), r.alpha_star), r.score, 1e-12);
    ASSERT_TRUE(std::is_sorted(r.node_subset.begin(), r.node_subset.end()));
  }
}

TEST(LtssScan, InvariantUnderNodePermutation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(40);
  for (auto &x : p) x = u(rng) * u(rng);
  const auto alphas = default_alpha_grid();
  const double s = ltss_scan(p, alphas).score;
  for (int k = 0; k < 10; ++k) {
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(ltss_scan(p, alphas).score, s);
  }
  EXPECT_THROW(ltss_scan(std::vector<double>{}, alphas), Error);
}

namespace {

ActivationMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed, Role role) {
  GeneratorSpec spec;
  spec.n_samples = rows;
  spec.n_nodes = cols;
  spec.seed = seed;
  spec.role = role;
  return synthesize(spec);
}

}  // namespace

TEST(ScoreSamples, DeterminismAndSeparation) {
  const auto bg = gaussian(300, 40, 1, Role::background);
  const auto clean = gaussian(60, 40, 2, Role::clean);
  std::vector<std::size_t> shifted{0, 1, 2, 3};
  const auto anomalous = inject_anomaly(clean, shifted, 3.0, 3);
  const auto sketch = build_sketch(bg);
  const auto pc = score_matrix(sketch, clean);
  const auto pa = score_matrix(sketch, anomalous);
  const auto alphas = default_alpha_grid();

  for (auto mode : {ScanMode::p_max, ScanMode::draw}) {
    const auto sc = score_samples(pc, alphas, mode, 5);
    const auto sa = score_samples(pa, alphas, mode, 5);
    ASSERT_EQ(sc.size(), 60u);
    EXPECT_EQ(sc, score_samples(pc, alphas, mode, 5, 4));
    EXPECT_GT(std::accumulate(sa.begin(), sa.end(), 0.0), std::accumulate(sc.begin(), sc.end(), 0.0));
    EXPECT_GT(auroc(sc, sa), 0.75);
  }
  EXPECT_NE(score_samples(pc, alphas, ScanMode::draw, 5),
            score_samples(pc, alphas, ScanMode::draw, 6));

  const auto results = scan_samples(pa, alphas, ScanMode::p_max);
  for (std::size_t i = 0; i < results.size(); ++i) EXPECT_EQ(results[i].sample_index, i);
}

TEST(ScoreSamples, SingleSampleAndErrors) {
  PValueMatrix p(1, 3, Method::empirical);
  p.entries = {{0.01, 0.01}, {0.5, 0.5}, {0.9, 0.9}};
  const auto s = score_samples(p, default_alpha_grid(), ScanMode::p_max);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_GT(s[0], 0.0);
  EXPECT_THROW(score_samples(PValueMatrix{}, default_alpha_grid(), ScanMode::p_max), Error);
  EXPECT_THROW(score_samples(p, std::vector<double>{0.3, 0.2}, ScanMode::p_max), Error);
}

TEST(RepresentativePValues, Modes) {
  const std::vector<PValueRange> row{{0.1, 0.4}, {0.2, 0.2}};
  EXPECT_EQ(representative_pvalues(row, ScanMode::p_max, 0), (std::vector<double>{0.4, 0.2}));
  const auto d = representative_pvalues(row, ScanMode::draw, 3);
  EXPECT_GE(d[0], 0.1);
  EXPECT_LE(d[0], 0.4);
  EXPECT_EQ(d[1], 0.2);
  EXPECT_EQ(d, representative_pvalues(row, ScanMode::draw, 3));
}

TEST(ScoresCsv, RoundTripAndErrors) {
  PValueMatrix p(3, 2, Method::empirical);
  p.entries = {{0.01, 0.01}, {0.02, 0.02}, {0.9, 0.9}, {0.8, 0.8}, {0.03, 0.03}, {0.5, 0.5}};
  const auto results = scan_samples(p, default_alpha_grid(), ScanMode::p_max);
  const auto csv = scores_to_csv(results);
  EXPECT_EQ(detail::lines(csv).front(), "sample_index,score,alpha_star,subset_size");
  const auto back = scores_from_csv(csv);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i], results[i].score);

  const auto path = (std::filesystem::temp_directory_path() / "actsketch_scores.csv").string();
  detail::write_file(path, csv);
  EXPECT_EQ(read_scores(path), back);
  std::filesystem::remove(path);

  EXPECT_THROW(scores_from_csv("score\n1\n"), Error);
  EXPECT_THROW(scores_from_csv("sample_index,score,alpha_star,subset_size\n"), Error);
  EXPECT_THROW(scores_from_csv("sample_index,score,alpha_star,subset_size\n0,x,0.1,1\n"), Error);
  EXPECT_THROW(read_scores("/nonexistent/scores.csv"), Error);
}
