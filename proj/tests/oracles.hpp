#pragma once

// Brute-force reference implementations used only by the tests. None of
// these share code paths with the library.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

/// (1 + #{a >= t}) / (N + 1) by a linear count over unsorted data.
inline double empirical_pvalue(std::span<const double> background, double t) {
  std::size_t ge = 0;
  for (double a : background) ge += a >= t;
  return (1.0 + static_cast<double>(ge)) / (static_cast<double>(background.size()) + 1.0);
}

inline std::size_t count_ge(std::span<const double> background, double t) {
  std::size_t ge = 0;
  for (double a : background) ge += a >= t;
  return ge;
}

/// Sup over every observed threshold of |F_a - F_b|, O(n^2).
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  std::vector<double> thresholds(a.begin(), a.end());
  thresholds.insert(thresholds.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : thresholds) {
    double fa = 0, fb = 0;
    for (double v : a) fa += v <= x;
    for (double v : b) fb += v <= x;
    d = std::max(d, std::abs(fa / static_cast<double>(a.size()) -
                             fb / static_cast<double>(b.size())));
  }
  return d;
}

/// Pair enumeration: (#{pos > neg} + 0.5 #{ties}) / (n_pos n_neg).
inline double auroc(std::span<const double> neg, std::span<const double> pos) {
  double wins = 0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double bernoulli_kl(double q, double a) {
  auto term = [](double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); };
  return term(q, a) + term(1.0 - q, 1.0 - a);
}

/// Maximum Berk-Jones score over all 2^n subsets and every alpha.
inline double exhaustive_scan(std::span<const double> p, std::span<const double> alphas) {
  const std::size_t n = p.size();
  double best = 0.0;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    for (double alpha : alphas) {
      std::size_t sig = 0;
      for (std::size_t j = 0; j < n; ++j)
        if ((mask >> j) & 1U) sig += p[j] <= alpha;
      const double q = static_cast<double>(sig) / static_cast<double>(size);
      if (q > alpha) best = std::max(best, static_cast<double>(size) * bernoulli_kl(q, alpha));
    }
  }
  return best;
}

/// Integral of the Gaussian KDE density over [lo, hi] by adaptive
/// Gauss-Kronrod quadrature, split at every kernel centre inside the interval.
inline double kde_mass(std::span<const double> centres, double h, double lo, double hi) {
  const double norm = 1.0 / (static_cast<double>(centres.size()) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  auto density = [&](double x) {
    double s = 0.0;
    for (double c : centres) {
      const double z = (x - c) / h;
      s += std::exp(-0.5 * z * z);
    }
    return s * norm;
  };
  std::vector<double> cuts{lo};
  for (double c : centres)
    for (double k : {-4.0, 0.0, 4.0})
      if (c + k * h > lo && c + k * h < hi) cuts.push_back(c + k * h);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        density, cuts[i], cuts[i + 1], 8, 1e-10);
  }
  return total;
}

}  // namespace oracle
