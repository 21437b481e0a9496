#pragma once

// P-value representations of test activations: empirical (sorted
// background), Gaussian KDE tail mass, and histogram ranges.

#include <actsketch/activation_io.hpp>
#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>
#include <actsketch/sketch.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace actsketch {

struct PValueRange {
  double p_min = 1.0;
  double p_max = 1.0;

  bool degenerate() const noexcept { return p_min == p_max; }
  bool contains(double p) const noexcept { return p_min <= p && p <= p_max; }

  friend bool operator==(const PValueRange &, const PValueRange &) = default;
};

enum class Method { empirical, kde, histogram_range };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::empirical: return "empirical";
    case Method::kde: return "kde";
    case Method::histogram_range: return "histogram";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  if (s == "empirical") return Method::empirical;
  if (s == "kde") return Method::kde;
  if (s == "histogram" || s == "histogram_range") return Method::histogram_range;
  throw Error(ErrorKind::validation, "unknown method '" + std::string(s) + "'");
}

struct PValueMatrix {
  std::size_t n_samples = 0;
  std::size_t n_nodes = 0;
  Method method = Method::empirical;
  std::vector<PValueRange> entries;  // sample-major

  PValueMatrix() = default;
  PValueMatrix(std::size_t samples, std::size_t nodes, Method m)
      : n_samples(samples), n_nodes(nodes), method(m), entries(samples * nodes) {}

  PValueRange &operator()(std::size_t sample, std::size_t node) {
    return entries[sample * n_nodes + node];
  }
  const PValueRange &operator()(std::size_t sample, std::size_t node) const {
    return entries[sample * n_nodes + node];
  }
  std::span<const PValueRange> row(std::size_t sample) const {
    return std::span<const PValueRange>(entries).subspan(sample * n_nodes, n_nodes);
  }

  friend bool operator==(const PValueMatrix &, const PValueMatrix &) = default;
};

// ---------------------------------------------------------------------------
// Empirical
// ---------------------------------------------------------------------------

/// (1 + #{a >= t}) / (N + 1) over an ascending background.
inline double empirical_pvalue(std::span<const double> background_sorted, double t) {
  if (background_sorted.empty())
    throw Error(ErrorKind::validation, "empirical p-value needs a background");
  const auto first_ge =
      std::lower_bound(background_sorted.begin(), background_sorted.end(), t);
  const auto at_least = static_cast<double>(background_sorted.end() - first_ge);
  return (1.0 + at_least) / (static_cast<double>(background_sorted.size()) + 1.0);
}

/// Background columns sorted once per node.
struct EmpiricalModel {
  std::vector<std::vector<double>> sorted;

  std::size_t n_nodes() const noexcept { return sorted.size(); }
  std::size_t n_background() const noexcept {
    return sorted.empty() ? 0 : sorted.front().size();
  }
};

inline EmpiricalModel build_empirical(const ActivationMatrix &background,
                                      std::size_t threads = 1) {
  EmpiricalModel m;
  m.sorted.resize(background.n_nodes());
  parallel_for(background.n_nodes(), threads, [&](std::size_t j) {
    m.sorted[j] = background.column(j);
    std::sort(m.sorted[j].begin(), m.sorted[j].end());
  });
  return m;
}

// ---------------------------------------------------------------------------
// Histogram ranges
// ---------------------------------------------------------------------------

/// Background mass attributed strictly above t and at-or-above t.
struct TailCounts {
  std::uint64_t greater = 0;
  std::uint64_t greater_equal = 0;
};

inline TailCounts histogram_tail_counts(const NodeHistogram &h, double t) {
  TailCounts c;
  if (!h.bin_edges.empty()) {
    if (t < h.bin_edges.front()) {
      c.greater = std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0});
      c.greater_equal = c.greater;
    } else if (const auto bin = h.bin_of(t)) {
      // t's own bin could hold values on either side of t.
      c.greater = std::accumulate(h.counts.begin() + static_cast<std::ptrdiff_t>(*bin) + 1,
                                  h.counts.end(), std::uint64_t{0});
      c.greater_equal = c.greater + h.counts[*bin];
    }
  }
  for (const auto &m : h.modal_bins) {
    if (m.value > t) {
      c.greater += m.count;
      c.greater_equal += m.count;
    } else if (m.value == t) {
      c.greater_equal += m.count;
    }
  }
  return c;
}

/// [(1 + G) / (N + 1), (1 + GE) / (N + 1)]; always brackets the empirical
/// p-value of t against the background the histogram was built from.
inline PValueRange histogram_pvalue_range(const NodeHistogram &h, double t) {
  const auto c = histogram_tail_counts(h, t);
  const double denom = static_cast<double>(h.n_background) + 1.0;
  return {(1.0 + static_cast<double>(c.greater)) / denom,
          (1.0 + static_cast<double>(c.greater_equal)) / denom};
}

/// The range with the orientation as originally printed,
///   first  = (N - G) / (N + 1),   second = (N - GE + 1) / (N + 1),
/// kept for comparison only. `first` exceeds `second` whenever t's bin is
/// non-empty, so the pair is not a valid PValueRange in general.
inline std::pair<double, double> histogram_pvalue_range_printed(const NodeHistogram &h,
                                                                double t) {
  const auto c = histogram_tail_counts(h, t);
  const auto n = static_cast<double>(h.n_background);
  return {(n - static_cast<double>(c.greater)) / (n + 1.0),
          (n - static_cast<double>(c.greater_equal) + 1.0) / (n + 1.0)};
}

// ---------------------------------------------------------------------------
// Gaussian KDE
// ---------------------------------------------------------------------------

struct KdeModel {
  std::vector<std::vector<double>> values;
  std::vector<double> bandwidth;
  std::vector<double> omega;  // per-node background maximum

  std::size_t n_nodes() const noexcept { return values.size(); }
  std::size_t n_background() const noexcept {
    return values.empty() ? 0 : values.front().size();
  }
};

/// Silverman's rule 0.9 * min(sigma, IQR / 1.34) * n^(-1/5). A zero spread
/// estimate is skipped in favour of the other; when both vanish the
/// bandwidth falls to 1e-9 * (1 + |mean|).
inline double silverman_bandwidth(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::validation, "bandwidth of empty data");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sigma = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr_sigma = interquartile_range_sorted(sorted) / 1.34;

  double spread = std::min(sigma, iqr_sigma);
  if (spread <= 0.0) spread = std::max(sigma, iqr_sigma);
  const double floor = 1e-9 * (1.0 + std::abs(mean));
  return std::max(0.9 * spread * std::pow(n, -0.2), floor);
}

inline KdeModel fit_kde(const ActivationMatrix &background, std::size_t threads = 1) {
  if (background.role() != Role::background)
    throw Error(ErrorKind::validation, "KDE is fitted on a background matrix");
  KdeModel m;
  const auto nodes = background.n_nodes();
  m.values.resize(nodes);
  m.bandwidth.resize(nodes);
  m.omega.resize(nodes);
  parallel_for(nodes, threads, [&](std::size_t j) {
    m.values[j] = background.column(j);
    m.bandwidth[j] = silverman_bandwidth(m.values[j]);
    m.omega[j] = *std::max_element(m.values[j].begin(), m.values[j].end());
  });
  return m;
}

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Tail mass of the KDE between t and the background maximum, or
/// 1 / (N + 1) once t reaches the maximum.
inline double kde_pvalue(const KdeModel &m, std::size_t node, double t) {
  if (node >= m.n_nodes())
    throw Error(ErrorKind::validation, "node " + std::to_string(node) + " out of range");
  const auto &values = m.values[node];
  const auto n = static_cast<double>(values.size());
  const double omega = m.omega[node];
  if (t >= omega) return 1.0 / (n + 1.0);
  const double h = m.bandwidth[node];
  double mass = 0.0;
  for (double a : values)
    mass += standard_normal_cdf((omega - a) / h) - standard_normal_cdf((t - a) / h);
  return std::clamp(mass / n, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Matrix scoring
// ---------------------------------------------------------------------------

namespace detail {

inline void check_nodes(std::size_t repr_nodes, const ActivationMatrix &test) {
  if (repr_nodes != test.n_nodes())
    throw Error(ErrorKind::shape, "representation has " + std::to_string(repr_nodes) +
                                      " nodes but the test matrix has " +
                                      std::to_string(test.n_nodes()));
}

}  // namespace detail

inline PValueMatrix score_matrix(const SketchModel &sketch, const ActivationMatrix &test,
                                 std::size_t threads = 1) {
  detail::check_nodes(sketch.n_nodes(), test);
  PValueMatrix out(test.n_samples(), test.n_nodes(), Method::histogram_range);
  parallel_for(test.n_samples(), threads, [&](std::size_t i) {
    const auto row = test.row(i);
    for (std::size_t j = 0; j < row.size(); ++j)
      out(i, j) = histogram_pvalue_range(sketch.histograms[j], row[j]);
  });
  return out;
}

/// Histogram scoring with the printed orientation; endpoints are stored
/// in ascending order so the result stays a valid matrix of ranges.
inline PValueMatrix score_matrix_printed(const SketchModel &sketch,
                                         const ActivationMatrix &test,
                                         std::size_t threads = 1) {
  detail::check_nodes(sketch.n_nodes(), test);
  PValueMatrix out(test.n_samples(), test.n_nodes(), Method::histogram_range);
  parallel_for(test.n_samples(), threads, [&](std::size_t i) {
    const auto row = test.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      auto [a, b] = histogram_pvalue_range_printed(sketch.histograms[j], row[j]);
      out(i, j) = {std::clamp(std::min(a, b), 0.0, 1.0), std::clamp(std::max(a, b), 0.0, 1.0)};
    }
  });
  return out;
}

inline PValueMatrix score_matrix(const EmpiricalModel &model, const ActivationMatrix &test,
                                 std::size_t threads = 1) {
  detail::check_nodes(model.n_nodes(), test);
  PValueMatrix out(test.n_samples(), test.n_nodes(), Method::empirical);
  parallel_for(test.n_samples(), threads, [&](std::size_t i) {
    const auto row = test.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double p = empirical_pvalue(model.sorted[j], row[j]);
      out(i, j) = {p, p};
    }
  });
  return out;
}

inline PValueMatrix score_matrix(const KdeModel &model, const ActivationMatrix &test,
                                 std::size_t threads = 1) {
  detail::check_nodes(model.n_nodes(), test);
  PValueMatrix out(test.n_samples(), test.n_nodes(), Method::kde);
  parallel_for(test.n_samples(), threads, [&](std::size_t i) {
    const auto row = test.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double p = kde_pvalue(model, j, row[j]);
      out(i, j) = {p, p};
    }
  });
  return out;
}

/// Uniform draw on [p_min, p_max]; p_min itself for degenerate ranges.
template <typename Rng>
double draw_from_range(const PValueRange &r, Rng &rng) {
  if (r.degenerate()) return r.p_min;
  std::uniform_real_distribution<double> u(r.p_min, r.p_max);
  return std::min(u(rng), r.p_max);
}

// ---------------------------------------------------------------------------
// CSV export: sample_index,node_index,p_min,p_max,method
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPValueCsvHeader =
    "sample_index,node_index,p_min,p_max,method";

inline std::string pvalues_to_csv(const PValueMatrix &p) {
  std::string out(kPValueCsvHeader);
  out += '\n';
  const std::string method(to_string(p.method));
  for (std::size_t i = 0; i < p.n_samples; ++i) {
    for (std::size_t j = 0; j < p.n_nodes; ++j) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      detail::append_double(out, p(i, j).p_min);
      out += ',';
      detail::append_double(out, p(i, j).p_max);
      out += ',';
      out += method;
      out += '\n';
    }
  }
  return out;
}

inline PValueMatrix pvalues_from_csv(std::string_view text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows.front() != kPValueCsvHeader)
    throw Error(ErrorKind::ingest, "p-value CSV: malformed header");
  if (rows.size() < 2) throw Error(ErrorKind::ingest, "p-value CSV: no entries");

  struct Row {
    std::size_t i, j;
    PValueRange r;
  };
  std::vector<Row> parsed;
  parsed.reserve(rows.size() - 1);
  std::size_t n_samples = 0, n_nodes = 0;
  std::string method_name;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto where = "p-value CSV row " + std::to_string(k - 1) + ": ";
    const auto cells = detail::split(rows[k], ',');
    if (cells.size() != 5) throw Error(ErrorKind::ingest, where + "expected 5 cells");
    const auto i = detail::parse_int<std::size_t>(cells[0]);
    const auto j = detail::parse_int<std::size_t>(cells[1]);
    const auto lo = detail::parse_double(cells[2]);
    const auto hi = detail::parse_double(cells[3]);
    if (!i || !j || !lo || !hi) throw Error(ErrorKind::ingest, where + "unparsable cell");
    if (!(0.0 <= *lo && *lo <= *hi && *hi <= 1.0))
      throw Error(ErrorKind::ingest, where + "need 0 <= p_min <= p_max <= 1");
    if (method_name.empty()) method_name = cells[4];
    if (cells[4] != method_name) throw Error(ErrorKind::ingest, where + "mixed methods");
    n_samples = std::max(n_samples, *i + 1);
    n_nodes = std::max(n_nodes, *j + 1);
    parsed.push_back({*i, *j, {*lo, *hi}});
  }
  if (n_samples * n_nodes != parsed.size())
    throw Error(ErrorKind::shape, "p-value CSV: " + std::to_string(parsed.size()) +
                                      " rows do not fill a " + std::to_string(n_samples) +
                                      "x" + std::to_string(n_nodes) + " matrix");
  PValueMatrix p(n_samples, n_nodes, method_from_string(method_name));
  std::vector<bool> seen(parsed.size(), false);
  for (const auto &r : parsed) {
    const auto k = r.i * n_nodes + r.j;
    if (seen[k])
      throw Error(ErrorKind::ingest, "p-value CSV: duplicate entry (" + std::to_string(r.i) +
                                         ", " + std::to_string(r.j) + ")");
    seen[k] = true;
    p.entries[k] = r.r;
  }
  return p;
}

inline void write_pvalues(const PValueMatrix &p, const std::filesystem::path &path) {
  detail::write_file(path, pvalues_to_csv(p));
}

inline PValueMatrix read_pvalues(const std::filesystem::path &path) {
  try {
    return pvalues_from_csv(detail::read_file(path));
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace actsketch
