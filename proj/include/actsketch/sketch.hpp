#pragma once

// Node-specific histograms of background activations.
//
// Each node keeps explicit bins for exactly-repeated (modal) values and a
// small equal-width histogram for everything else. Bins are right-open
// except the last one, which is closed:
//
//   [e0, e1) [e1, e2) ... [e_{B-1}, e_B]

#include <actsketch/activation_io.hpp>
#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actsketch {

/// Quantile of ascending data by linear interpolation between order
/// statistics (the "type 7" rule).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::validation, "quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double interquartile_range_sorted(std::span<const double> sorted) {
  return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
}

/// Freedman-Diaconis bin width 2 * IQR / n^(1/3). Zero when IQR is zero.
inline double freedman_diaconis_width(std::span<const double> values) {
  if (values.empty())
    throw Error(ErrorKind::validation, "Freedman-Diaconis width of empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = interquartile_range_sorted(sorted);
  if (iqr <= 0.0) return 0.0;
  return 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
}

/// Sturges bin count ceil(log2(n) + 1).
inline std::size_t sturges_bins(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::validation, "Sturges bin count of n = 0");
  return static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(n)) + 1.0));
}

struct ModalBin {
  double value = 0.0;
  std::uint64_t count = 0;

  friend bool operator==(const ModalBin &, const ModalBin &) = default;
};

/// Values that occur at least twice and more than threshold_fraction * n
/// times, ascending.
inline std::vector<ModalBin> detect_modes(std::span<const double> values,
                                          double threshold_fraction) {
  if (values.empty())
    throw Error(ErrorKind::validation, "mode detection on empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double limit = threshold_fraction * static_cast<double>(sorted.size());
  std::vector<ModalBin> modes;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t k = i + 1;
    while (k < sorted.size() && sorted[k] == sorted[i]) ++k;
    if (k - i >= 2 && static_cast<double>(k - i) > limit)
      // +0.0 and -0.0 compare equal and are merged under +0.0.
      modes.push_back({sorted[i] == 0.0 ? 0.0 : sorted[i], k - i});
    i = k;
  }
  return modes;
}

struct SketchConfig {
  double modal_threshold_fraction = 0.10;
  std::size_t max_bins = 10;

  void validate() const {
    if (!(modal_threshold_fraction > 0.0 && modal_threshold_fraction <= 1.0))
      throw Error(ErrorKind::config, "modal threshold fraction must lie in (0,1]");
    if (max_bins < 1) throw Error(ErrorKind::config, "max_bins must be >= 1");
  }

  friend bool operator==(const SketchConfig &, const SketchConfig &) = default;
};

struct NodeHistogram {
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> counts;
  std::vector<ModalBin> modal_bins;
  std::uint64_t n_background = 0;

  std::size_t n_bins() const noexcept { return counts.size(); }

  /// Index of the bin holding t, or nullopt when t lies outside the edges.
  std::optional<std::size_t> bin_of(double t) const {
    if (bin_edges.empty() || t < bin_edges.front() || t > bin_edges.back())
      return std::nullopt;
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), t);
    const auto idx = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
    return std::min(idx, counts.size() - 1);
  }

  void validate(std::size_t max_bins) const {
    if (bin_edges.empty() != counts.empty() ||
        (!bin_edges.empty() && bin_edges.size() != counts.size() + 1))
      throw Error(ErrorKind::schema, "histogram needs len(bin_edges) = len(counts) + 1");
    if (counts.size() > max_bins)
      throw Error(ErrorKind::schema, "histogram has more bins than max_bins");
    for (std::size_t i = 0; i < bin_edges.size(); ++i) {
      if (!std::isfinite(bin_edges[i]))
        throw Error(ErrorKind::schema, "non-finite bin edge");
      if (i > 0 && !(bin_edges[i] > bin_edges[i - 1]))
        throw Error(ErrorKind::schema, "bin edges must be strictly increasing");
    }
    std::uint64_t total = std::accumulate(counts.begin(), counts.end(),
                                          std::uint64_t{0});
    for (const auto &m : modal_bins) {
      if (m.count == 0 || !std::isfinite(m.value))
        throw Error(ErrorKind::schema, "modal bins need a finite value and count > 0");
      total += m.count;
    }
    if (total != n_background)
      throw Error(ErrorKind::schema,
                  "bin counts sum to " + std::to_string(total) +
                      " but n_background is " + std::to_string(n_background));
  }

  friend bool operator==(const NodeHistogram &, const NodeHistogram &) = default;
};

inline NodeHistogram build_node_histogram(std::span<const double> values,
                                          const SketchConfig &config) {
  config.validate();
  if (values.empty())
    throw Error(ErrorKind::validation, "histogram of empty data");
  for (double v : values)
    if (!std::isfinite(v))
      throw Error(ErrorKind::validation, "histogram of non-finite data");

  NodeHistogram h;
  h.n_background = values.size();
  h.modal_bins = detect_modes(values, config.modal_threshold_fraction);

  std::vector<double> rest;
  rest.reserve(values.size());
  for (double v : values) {
    const bool modal = std::any_of(h.modal_bins.begin(), h.modal_bins.end(),
                                   [v](const ModalBin &m) { return m.value == v; });
    if (!modal) rest.push_back(v);
  }
  if (rest.empty()) return h;

  std::sort(rest.begin(), rest.end());
  const double lo = rest.front();
  const double hi = rest.back();
  if (lo == hi) {
    // One distinct value left: a single closed bin one ulp wide.
    h.bin_edges = {lo, std::nextafter(lo, std::numeric_limits<double>::infinity())};
    h.counts = {rest.size()};
    return h;
  }

  const double range = hi - lo;
  const double width = freedman_diaconis_width(rest);
  std::size_t bins = sturges_bins(rest.size());
  if (width > 0.0) {
    const double fd = std::ceil(range / width);
    bins = std::max(bins, static_cast<std::size_t>(std::min(fd, 1e9)));
  }
  bins = std::min(bins, config.max_bins);

  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i < bins; ++i)
    h.bin_edges[i] = std::min(
        hi, lo + range * static_cast<double>(i) / static_cast<double>(bins));
  h.bin_edges[bins] = hi;
  // Edges can collide when the range spans only a few ulps.
  h.bin_edges.erase(std::unique(h.bin_edges.begin(), h.bin_edges.end()),
                    h.bin_edges.end());

  h.counts.assign(h.bin_edges.size() - 1, 0);
  for (double v : rest) ++h.counts[*h.bin_of(v)];
  return h;
}

struct SketchModel {
  std::vector<NodeHistogram> histograms;
  std::string layer_label;
  SketchConfig config;
  std::uint64_t n_background = 0;

  std::size_t n_nodes() const noexcept { return histograms.size(); }

  void validate() const {
    config.validate();
    if (histograms.empty()) throw Error(ErrorKind::schema, "sketch has no nodes");
    for (std::size_t j = 0; j < histograms.size(); ++j) {
      try {
        if (histograms[j].n_background != n_background)
          throw Error(ErrorKind::schema, "n_background differs from the sketch");
        histograms[j].validate(config.max_bins);
      } catch (const Error &e) {
        throw Error(e.kind(), "node " + std::to_string(j) + ": " + e.what());
      }
    }
  }

  friend bool operator==(const SketchModel &, const SketchModel &) = default;
};

inline SketchModel build_sketch(const ActivationMatrix &background,
                                const SketchConfig &config = {},
                                std::size_t threads = 1) {
  if (background.role() != Role::background)
    throw Error(ErrorKind::validation,
                "sketches are built from a background matrix, got role '" +
                    std::string(to_string(background.role())) + "'");
  config.validate();
  SketchModel model;
  model.layer_label = background.layer_label();
  model.config = config;
  model.n_background = background.n_samples();
  model.histograms.resize(background.n_nodes());
  parallel_for(background.n_nodes(), threads, [&](std::size_t j) {
    try {
      model.histograms[j] = build_node_histogram(background.column(j), config);
    } catch (const Error &e) {
      throw Error(e.kind(), "node " + std::to_string(j) + ": " + e.what());
    }
  });
  return model;
}

// ---------------------------------------------------------------------------
// JSON persistence
// ---------------------------------------------------------------------------

inline constexpr int kSketchVersion = 1;

inline nlohmann::json sketch_to_json_value(const SketchModel &s) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto &h : s.histograms) {
    nlohmann::json modal = nlohmann::json::array();
    for (const auto &m : h.modal_bins)
      modal.push_back({{"value", m.value}, {"count", m.count}});
    nodes.push_back(
        {{"bin_edges", h.bin_edges}, {"counts", h.counts}, {"modal_bins", modal}});
  }
  return {{"version", kSketchVersion},
          {"layer_label", s.layer_label},
          {"n_background", s.n_background},
          {"config",
           {{"modal_threshold_fraction", s.config.modal_threshold_fraction},
            {"max_bins", s.config.max_bins}}},
          {"nodes", std::move(nodes)}};
}

inline std::string sketch_to_json(const SketchModel &s) {
  return sketch_to_json_value(s).dump() + "\n";
}

inline SketchModel sketch_from_json(std::string_view text) {
  SketchModel s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != kSketchVersion)
      throw Error(ErrorKind::schema, "unsupported sketch version");
    s.layer_label = j.at("layer_label").get<std::string>();
    s.n_background = j.at("n_background").get<std::uint64_t>();
    const auto &cfg = j.at("config");
    s.config.modal_threshold_fraction =
        cfg.at("modal_threshold_fraction").get<double>();
    s.config.max_bins = cfg.at("max_bins").get<std::size_t>();
    for (const auto &node : j.at("nodes")) {
      NodeHistogram h;
      h.bin_edges = node.at("bin_edges").get<std::vector<double>>();
      h.counts = node.at("counts").get<std::vector<std::uint64_t>>();
      for (const auto &m : node.at("modal_bins"))
        h.modal_bins.push_back(
            {m.at("value").get<double>(), m.at("count").get<std::uint64_t>()});
      h.n_background = s.n_background;
      s.histograms.push_back(std::move(h));
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::schema, std::string("sketch JSON: ") + e.what());
  }
  try {
    s.validate();
  } catch (const Error &e) {
    throw Error(ErrorKind::schema, std::string("sketch JSON: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Size accounting shared with the benchmarks
// ---------------------------------------------------------------------------

inline constexpr std::size_t kBytesPerValue = 8;
inline constexpr std::size_t kBytesPerModalBin = 16;
inline constexpr std::size_t kPerNodeOverheadBytes = 32;

/// 8 bytes per edge and per count, 16 per modal bin, 32 per node.
inline std::size_t node_size_bytes(const NodeHistogram &h) {
  return kBytesPerValue * (h.bin_edges.size() + h.counts.size()) +
         kBytesPerModalBin * h.modal_bins.size() + kPerNodeOverheadBytes;
}

inline std::size_t representation_size_bytes(const SketchModel &s) {
  std::size_t total = 0;
  for (const auto &h : s.histograms) total += node_size_bytes(h);
  return total;
}

}  // namespace actsketch
