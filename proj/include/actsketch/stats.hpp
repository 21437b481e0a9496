#pragma once

// Two-sample KS comparison of p-value representations, AUROC, and
// long-form distribution export.

#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>
#include <actsketch/pvalue.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace actsketch {

/// P(K > lambda) for the limiting Kolmogorov distribution. Series are
/// truncated once a term drops below 1e-10.
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double eps = 1e-10;
  if (lambda < 1.18) {
    // Jacobi-theta form, fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k < 1000; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * c);
      cdf += term;
      if (term < eps) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < eps) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

inline KSResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw Error(ErrorKind::validation, "KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto n1 = static_cast<double>(x.size());
  const auto n2 = static_cast<double>(y.size());

  // Walk the merged order, consuming every copy of a value before comparing
  // the two step functions.
  double d = 0.0;
  std::size_t i = 0, k = 0;
  while (i < x.size() && k < y.size()) {
    const double v = std::min(x[i], y[k]);
    while (i < x.size() && x[i] == v) ++i;
    while (k < y.size() && y[k] == v) ++k;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(k) / n2));
  }
  if (i < x.size() || k < y.size())
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(k) / n2));

  const double effective = n1 * n2 / (n1 + n2);
  return {d, kolmogorov_survival(std::sqrt(effective) * d), x.size(), y.size()};
}

struct NodeComparison {
  std::size_t node = 0;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct ComparisonReport {
  std::vector<NodeComparison> per_node;
  double mean_statistic = 0.0;
  double mean_p_value = 0.0;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
};

/// Draws one value per candidate range and KS-tests it against the
/// reference column, node by node. With repeats > 1 the per-node results
/// are averaged over draws made with seeds derived from (seed, repeat).
inline ComparisonReport compare_representations(const PValueMatrix &reference,
                                                 const PValueMatrix &candidate,
                                                 std::uint64_t seed,
                                                 std::size_t repeats = 1,
                                                 std::size_t threads = 1) {
  if (reference.n_samples != candidate.n_samples || reference.n_nodes != candidate.n_nodes)
    throw Error(ErrorKind::shape, "reference and candidate p-value matrices differ in shape");
  if (reference.n_samples == 0 || reference.n_nodes == 0)
    throw Error(ErrorKind::shape, "cannot compare empty p-value matrices");
  if (repeats == 0) throw Error(ErrorKind::config, "repeats must be >= 1");
  for (const auto &r : reference.entries)
    if (!r.degenerate())
      throw Error(ErrorKind::validation, "reference p-values must be degenerate ranges");

  ComparisonReport report;
  report.seed = seed;
  report.repeats = repeats;
  report.per_node.resize(reference.n_nodes);
  parallel_for(reference.n_nodes, threads, [&](std::size_t j) {
    std::vector<double> ref(reference.n_samples), drawn(reference.n_samples);
    for (std::size_t i = 0; i < reference.n_samples; ++i) ref[i] = reference(i, j).p_min;
    NodeComparison c{j, 0.0, 0.0};
    for (std::size_t r = 0; r < repeats; ++r) {
      const std::uint64_t stream_seed = repeats == 1 ? seed : mix_seed(seed, 1'000'003 + r);
      std::mt19937_64 rng(mix_seed(stream_seed, j));
      for (std::size_t i = 0; i < candidate.n_samples; ++i)
        drawn[i] = draw_from_range(candidate(i, j), rng);
      const auto ks = ks_two_sample(ref, drawn);
      c.statistic += ks.statistic;
      c.p_value += ks.p_value;
    }
    c.statistic /= static_cast<double>(repeats);
    c.p_value /= static_cast<double>(repeats);
    report.per_node[j] = c;
  });
  for (const auto &c : report.per_node) {
    report.mean_statistic += c.statistic;
    report.mean_p_value += c.p_value;
  }
  report.mean_statistic /= static_cast<double>(report.per_node.size());
  report.mean_p_value /= static_cast<double>(report.per_node.size());
  return report;
}

inline nlohmann::json to_json_value(const ComparisonReport &r) {
  nlohmann::json per_node = nlohmann::json::array();
  for (const auto &c : r.per_node)
    per_node.push_back({{"node", c.node}, {"statistic", c.statistic}, {"p_value", c.p_value}});
  nlohmann::json j = {{"mean_statistic", r.mean_statistic},
                      {"mean_p_value", r.mean_p_value},
                      {"seed", r.seed},
                      {"per_node", std::move(per_node)}};
  if (r.repeats != 1) j["repeats"] = r.repeats;
  return j;
}

/// Mann-Whitney AUROC: (#{pos > neg} + 0.5 #{ties}) / (n_pos n_neg).
inline double auroc(std::span<const double> scores_negative,
                    std::span<const double> scores_positive) {
  if (scores_negative.empty() || scores_positive.empty())
    throw Error(ErrorKind::validation, "AUROC needs non-empty score sets");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(scores_negative.size() + scores_positive.size());
  for (double s : scores_negative) all.push_back({s, false});
  for (double s : scores_positive) all.push_back({s, true});
  std::sort(all.begin(), all.end(),
            [](const Scored &a, const Scored &b) { return a.score < b.score; });

  // Sum of midranks (1-based) of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t k = i;
    std::size_t pos_in_group = 0;
    while (k < all.size() && all[k].score == all[i].score) pos_in_group += all[k++].positive;
    const double midrank = 0.5 * static_cast<double>(i + 1 + k);
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = k;
  }
  const auto n_pos = static_cast<double>(scores_positive.size());
  const auto n_neg = static_cast<double>(scores_negative.size());
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

/// Long-form CSV (node,sample,p_min,p_max,drawn_value) for the selected
/// nodes, one row per sample. Draws use one stream per node.
inline std::string distribution_to_csv(const PValueMatrix &p,
                                       std::span<const std::size_t> node_indices,
                                       std::uint64_t seed) {
  for (auto j : node_indices)
    if (j >= p.n_nodes)
      throw Error(ErrorKind::validation, "node index " + std::to_string(j) + " out of range");
  std::string out = "node,sample,p_min,p_max,drawn_value\n";
  for (auto j : node_indices) {
    std::mt19937_64 rng(mix_seed(seed, j));
    for (std::size_t i = 0; i < p.n_samples; ++i) {
      const auto &r = p(i, j);
      out += std::to_string(j);
      out += ',';
      out += std::to_string(i);
      out += ',';
      detail::append_double(out, r.p_min);
      out += ',';
      detail::append_double(out, r.p_max);
      out += ',';
      detail::append_double(out, draw_from_range(r, rng));
      out += '\n';
    }
  }
  return out;
}

inline void export_distribution(const PValueMatrix &p,
                                std::span<const std::size_t> node_indices,
                                const std::filesystem::path &path, std::uint64_t seed = 0) {
  const auto csv = distribution_to_csv(p, node_indices, seed);
  detail::write_file(path, csv);
}

}  // namespace actsketch
