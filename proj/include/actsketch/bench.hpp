#pragma once

// Desk-scale memory and runtime comparison of the three representations.
//
// Memory is the serialized representation size under a fixed accounting
// rule, not process RSS:
//   histogram  8 B per edge and count, 16 B per modal bin, 32 B per node
//   empirical  8 B per retained value, 32 B per node
//   kde        empirical + 16 B per node (bandwidth and maximum)

#include <actsketch/activation_io.hpp>
#include <actsketch/error.hpp>
#include <actsketch/pvalue.hpp>
#include <actsketch/sketch.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace actsketch {

inline std::size_t representation_size_bytes(const EmpiricalModel &m) {
  std::size_t total = 0;
  for (const auto &v : m.sorted) total += kBytesPerValue * v.size() + kPerNodeOverheadBytes;
  return total;
}

inline std::size_t representation_size_bytes(const KdeModel &m) {
  std::size_t total = 0;
  for (const auto &v : m.values) total += kBytesPerValue * v.size() + kPerNodeOverheadBytes + 16;
  return total;
}

struct TimingStats {
  double mean = 0.0;
  double std = 0.0;
};

inline TimingStats summarize(std::span<const double> samples) {
  TimingStats t;
  if (samples.empty()) return t;
  const auto n = static_cast<double>(samples.size());
  t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - t.mean) * (s - t.mean);
    t.std = std::sqrt(ss / (n - 1.0));
  }
  return t;
}

enum class BenchKind { build, query };

struct BenchReport {
  BenchKind kind = BenchKind::build;
  Method method = Method::histogram_range;
  std::size_t n_nodes = 0;
  std::size_t n_background = 0;
  double background_fraction = 1.0;
  std::size_t repr_bytes = 0;
  TimingStats build_time;             // seconds
  TimingStats query_time_per_sample;  // seconds
  std::size_t repetitions = 0;
};

namespace detail {

using BenchClock = std::chrono::steady_clock;

/// One discarded warm-up call, then `reps` timed calls.
template <typename F>
std::vector<double> time_runs(std::size_t reps, F &&f) {
  f();
  std::vector<double> out;
  out.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = BenchClock::now();
    f();
    out.push_back(std::chrono::duration<double>(BenchClock::now() - start).count());
  }
  return out;
}

inline void check_reps(std::size_t reps) {
  if (reps < 3) throw Error(ErrorKind::config, "benchmarks need at least 3 repetitions");
}

// Keeps results observable so timed work is not optimized away.
inline volatile double bench_sink = 0.0;

}  // namespace detail

/// Build time and representation size for each method and node count.
/// The empirical "build" is its per-node sort.
inline std::vector<BenchReport> bench_build(std::span<const Method> methods,
                                            std::span<const std::size_t> node_counts,
                                            GeneratorSpec background, std::size_t reps,
                                            const SketchConfig &config = {},
                                            std::size_t threads = 1) {
  detail::check_reps(reps);
  background.role = Role::background;
  std::vector<BenchReport> reports;
  for (auto nodes : node_counts) {
    background.n_nodes = nodes;
    const auto matrix = synthesize(background, threads);
    for (auto method : methods) {
      BenchReport rep;
      rep.kind = BenchKind::build;
      rep.method = method;
      rep.n_nodes = nodes;
      rep.n_background = matrix.n_samples();
      rep.repetitions = reps;
      std::vector<double> times;
      switch (method) {
        case Method::histogram_range:
          times = detail::time_runs(reps, [&] {
            rep.repr_bytes = representation_size_bytes(build_sketch(matrix, config, threads));
          });
          break;
        case Method::empirical:
          times = detail::time_runs(reps, [&] {
            rep.repr_bytes = representation_size_bytes(build_empirical(matrix, threads));
          });
          break;
        case Method::kde:
          times = detail::time_runs(reps, [&] {
            rep.repr_bytes = representation_size_bytes(fit_kde(matrix, threads));
          });
          break;
      }
      rep.build_time = summarize(times);
      reports.push_back(rep);
    }
  }
  return reports;
}

/// Rows kept when subsampling `n` background rows to `fraction`: a seeded
/// shuffle truncated to round(fraction * n), at least one row.
inline std::vector<std::size_t> subsample_rows(std::size_t n, double fraction,
                                               std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorKind::config, "background fractions must lie in (0,1]");
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  rows.resize(std::min(keep, n));
  std::sort(rows.begin(), rows.end());
  return rows;
}

/// Mean per-sample p-value computation time for each method and background
/// fraction. Representations are built outside the timed region.
inline std::vector<BenchReport> bench_query(std::span<const Method> methods,
                                            std::span<const double> background_fractions,
                                            const ActivationMatrix &background,
                                            const ActivationMatrix &test, std::size_t reps,
                                            std::uint64_t seed = 0,
                                            const SketchConfig &config = {},
                                            std::size_t threads = 1) {
  detail::check_reps(reps);
  detail::check_nodes(background.n_nodes(), test);
  std::vector<BenchReport> reports;
  const auto per_sample = static_cast<double>(test.n_samples());
  for (double fraction : background_fractions) {
    const auto rows = subsample_rows(background.n_samples(), fraction, seed);
    const auto subset = background.select_rows(rows).with_role(Role::background);
    for (auto method : methods) {
      BenchReport rep;
      rep.kind = BenchKind::query;
      rep.method = method;
      rep.n_nodes = subset.n_nodes();
      rep.n_background = subset.n_samples();
      rep.background_fraction = fraction;
      rep.repetitions = reps;
      std::vector<double> times;
      auto run = [&](const auto &model) {
        rep.repr_bytes = representation_size_bytes(model);
        times = detail::time_runs(reps, [&] {
          const auto p = score_matrix(model, test, threads);
          detail::bench_sink = detail::bench_sink + p.entries.back().p_max;
        });
      };
      switch (method) {
        case Method::histogram_range: run(build_sketch(subset, config, threads)); break;
        case Method::empirical: run(build_empirical(subset, threads)); break;
        case Method::kde: run(fit_kde(subset, threads)); break;
      }
      for (auto &t : times) t /= per_sample;
      rep.query_time_per_sample = summarize(times);
      reports.push_back(rep);
    }
  }
  return reports;
}

inline std::string_view to_string(BenchKind k) {
  return k == BenchKind::build ? "build" : "query";
}

inline nlohmann::json to_json_value(const BenchReport &r) {
  return {{"kind", std::string(to_string(r.kind))},
          {"method", std::string(to_string(r.method))},
          {"n_nodes", r.n_nodes},
          {"n_background", r.n_background},
          {"background_fraction", r.background_fraction},
          {"repr_bytes", r.repr_bytes},
          {"build_time", {{"mean", r.build_time.mean}, {"std", r.build_time.std}}},
          {"query_time_per_sample",
           {{"mean", r.query_time_per_sample.mean}, {"std", r.query_time_per_sample.std}}},
          {"repetitions", r.repetitions}};
}

inline nlohmann::json reports_to_json(std::span<const BenchReport> reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &r : reports) out.push_back(to_json_value(r));
  return out;
}

namespace detail {

inline std::string fmt_seconds(const TimingStats &t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e ± %.1e", t.mean, t.std);
  return buf;
}

}  // namespace detail

/// Markdown table, rows ordered by (kind, nodes, fraction, method).
inline std::string report_to_markdown(std::span<const BenchReport> reports) {
  std::vector<BenchReport> rows(reports.begin(), reports.end());
  std::stable_sort(rows.begin(), rows.end(), [](const BenchReport &a, const BenchReport &b) {
    return std::tuple(a.kind, a.n_nodes, a.background_fraction, a.method) <
           std::tuple(b.kind, b.n_nodes, b.background_fraction, b.method);
  });
  std::string out =
      "| stage | method | nodes | background | fraction | repr bytes | build (s) | "
      "query per sample (s) | reps |\n"
      "|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto &r : rows) {
    char fraction[32];
    std::snprintf(fraction, sizeof fraction, "%.2f", r.background_fraction);
    out += "| " + std::string(to_string(r.kind)) + " | " + std::string(to_string(r.method)) +
           " | " + std::to_string(r.n_nodes) + " | " + std::to_string(r.n_background) + " | " +
           fraction + " | " + std::to_string(r.repr_bytes) + " | " +
           (r.kind == BenchKind::build ? detail::fmt_seconds(r.build_time) : "-") + " | " +
           (r.kind == BenchKind::query ? detail::fmt_seconds(r.query_time_per_sample) : "-") +
           " | " + std::to_string(r.repetitions) + " |\n";
  }
  return out;
}

}  // namespace actsketch
