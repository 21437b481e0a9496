#pragma once

// Berk-Jones subset scanning over the node p-values of a single sample.

#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>
#include <actsketch/pvalue.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace actsketch {

/// n * KL(n_alpha / n || alpha) when n_alpha / n > alpha, else 0.
inline double berk_jones_score(std::size_t n_alpha, std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::validation, "alpha must lie in (0,1)");
  if (n == 0) return 0.0;
  if (n_alpha > n) throw Error(ErrorKind::validation, "n_alpha exceeds n");
  const double q = static_cast<double>(n_alpha) / static_cast<double>(n);
  if (q <= alpha) return 0.0;
  double kl = q * std::log(q / alpha);
  if (q < 1.0) kl += (1.0 - q) * std::log((1.0 - q) / (1.0 - alpha));
  return static_cast<double>(n) * kl;
}

/// {0.01, 0.02, ..., 0.50}
inline std::vector<double> default_alpha_grid() {
  std::vector<double> alphas(50);
  for (std::size_t k = 0; k < alphas.size(); ++k)
    alphas[k] = static_cast<double>(k + 1) / 100.0;
  return alphas;
}

inline void validate_alphas(std::span<const double> alphas) {
  if (alphas.empty()) throw Error(ErrorKind::validation, "alpha grid is empty");
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0.0 && alphas[k] < 1.0))
      throw Error(ErrorKind::validation, "alphas must lie in (0,1)");
    if (k > 0 && !(alphas[k] > alphas[k - 1]))
      throw Error(ErrorKind::validation, "alphas must be strictly increasing");
  }
}

struct SubsetScanResult {
  std::vector<std::size_t> node_subset;  // ascending node indices
  double score = 0.0;
  double alpha_star = 0.0;
  std::size_t sample_index = 0;
};

/// Scans representative p-values (one per node). Sorting the nodes once by
/// p-value, the best subset at any alpha is a prefix of that order, so every
/// (alpha, prefix) pair is evaluated. Ties keep the earlier, smaller
/// candidate; an all-zero scan returns the empty subset at alphas.front().
inline SubsetScanResult ltss_scan(std::span<const double> pvalues,
                                  std::span<const double> alphas) {
  if (pvalues.empty()) throw Error(ErrorKind::validation, "scan needs at least one p-value");
  validate_alphas(alphas);

  std::vector<std::size_t> order(pvalues.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

  SubsetScanResult best;
  best.alpha_star = alphas.front();
  std::size_t best_size = 0;
  for (double alpha : alphas) {
    std::size_t n_alpha = 0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
      if (pvalues[order[k - 1]] <= alpha) ++n_alpha;
      const double s = berk_jones_score(n_alpha, k, alpha);
      if (s > best.score) {
        best.score = s;
        best.alpha_star = alpha;
        best_size = k;
      }
    }
  }
  best.node_subset.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best_size));
  std::sort(best.node_subset.begin(), best.node_subset.end());
  return best;
}

enum class ScanMode { p_max, draw };

/// Representative p-value per node: p_max, or a uniform draw from the range.
inline std::vector<double> representative_pvalues(std::span<const PValueRange> row,
                                                  ScanMode mode, std::uint64_t seed) {
  std::vector<double> out(row.size());
  if (mode == ScanMode::p_max) {
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j].p_max;
  } else {
    std::mt19937_64 rng(seed);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = draw_from_range(row[j], rng);
  }
  return out;
}

/// Scans every sample; draw mode seeds sample i with mix_seed(seed, i).
inline std::vector<SubsetScanResult> scan_samples(const PValueMatrix &p,
                                                  std::span<const double> alphas,
                                                  ScanMode mode, std::uint64_t seed = 0,
                                                  std::size_t threads = 1) {
  validate_alphas(alphas);
  if (p.n_samples == 0 || p.n_nodes == 0)
    throw Error(ErrorKind::shape, "cannot scan an empty p-value matrix");
  std::vector<SubsetScanResult> out(p.n_samples);
  parallel_for(p.n_samples, threads, [&](std::size_t i) {
    const auto reps = representative_pvalues(p.row(i), mode, mix_seed(seed, i));
    out[i] = ltss_scan(reps, alphas);
    out[i].sample_index = i;
  });
  return out;
}

inline std::vector<double> score_samples(const PValueMatrix &p, std::span<const double> alphas,
                                         ScanMode mode, std::uint64_t seed = 0,
                                         std::size_t threads = 1) {
  const auto results = scan_samples(p, alphas, mode, seed, threads);
  std::vector<double> scores(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) scores[i] = results[i].score;
  return scores;
}

// Scores CSV: sample_index,score,alpha_star,subset_size

inline constexpr std::string_view kScoresCsvHeader = "sample_index,score,alpha_star,subset_size";

inline std::string scores_to_csv(std::span<const SubsetScanResult> results) {
  std::string out(kScoresCsvHeader);
  out += '\n';
  for (const auto &r : results) {
    out += std::to_string(r.sample_index);
    out += ',';
    detail::append_double(out, r.score);
    out += ',';
    detail::append_double(out, r.alpha_star);
    out += ',';
    out += std::to_string(r.node_subset.size());
    out += '\n';
  }
  return out;
}

/// The score column of a scores CSV, in file order.
inline std::vector<double> scores_from_csv(std::string_view text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows.front() != kScoresCsvHeader)
    throw Error(ErrorKind::ingest, "scores CSV: malformed header");
  std::vector<double> scores;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto cells = detail::split(rows[k], ',');
    const auto v = cells.size() == 4 ? detail::parse_double(cells[1]) : std::nullopt;
    if (!v || !std::isfinite(*v))
      throw Error(ErrorKind::ingest, "scores CSV row " + std::to_string(k - 1) + ": bad score");
    scores.push_back(*v);
  }
  if (scores.empty()) throw Error(ErrorKind::ingest, "scores CSV: no rows");
  return scores;
}

inline std::vector<double> read_scores(const std::filesystem::path &path) {
  try {
    return scores_from_csv(detail::read_file(path));
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace actsketch
