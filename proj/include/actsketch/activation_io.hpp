#pragma once

// Activation matrices: storage, the binary/CSV file contract, synthetic
// generators, and anomaly injection.

#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace actsketch {

enum class Role : std::uint8_t { background = 0, clean = 1, anomalous = 2 };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::background: return "background";
    case Role::clean: return "clean";
    case Role::anomalous: return "anomalous";
  }
  return "unknown";
}

inline Role role_from_string(std::string_view s) {
  if (s == "background") return Role::background;
  if (s == "clean") return Role::clean;
  if (s == "anomalous") return Role::anomalous;
  throw Error(ErrorKind::validation, "unknown role '" + std::string(s) + "'");
}

/// Samples x nodes matrix of activations, stored sample-major.
class ActivationMatrix {
 public:
  ActivationMatrix(std::size_t n_samples, std::size_t n_nodes,
                   std::vector<double> values, Role role = Role::background,
                   std::string layer_label = {})
      : n_samples_(n_samples),
        n_nodes_(n_nodes),
        values_(std::move(values)),
        role_(role),
        layer_label_(std::move(layer_label)) {
    if (n_samples_ == 0 || n_nodes_ == 0)
      throw Error(ErrorKind::validation,
                  "activation matrix needs at least one sample and one node");
    if (values_.size() != n_samples_ * n_nodes_)
      throw Error(ErrorKind::shape,
                  "activation matrix holds " + std::to_string(values_.size()) +
                      " values, expected " + std::to_string(n_samples_) + "x" +
                      std::to_string(n_nodes_));
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k]))
        throw Error(ErrorKind::ingest,
                    "non-finite activation at row " +
                        std::to_string(k / n_nodes_) + ", column " +
                        std::to_string(k % n_nodes_));
    }
  }

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t n_nodes() const noexcept { return n_nodes_; }
  Role role() const noexcept { return role_; }
  const std::string &layer_label() const noexcept { return layer_label_; }
  std::span<const double> values() const noexcept { return values_; }

  double operator()(std::size_t sample, std::size_t node) const {
    return values_[sample * n_nodes_ + node];
  }

  std::span<const double> row(std::size_t sample) const {
    return std::span<const double>(values_).subspan(sample * n_nodes_,
                                                    n_nodes_);
  }

  std::vector<double> column(std::size_t node) const {
    std::vector<double> out(n_samples_);
    for (std::size_t i = 0; i < n_samples_; ++i) out[i] = (*this)(i, node);
    return out;
  }

  /// Copy of the selected rows, in the given order.
  ActivationMatrix select_rows(std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size() * n_nodes_);
    for (auto r : rows) {
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.end());
    }
    return ActivationMatrix(rows.size(), n_nodes_, std::move(out), role_,
                            layer_label_);
  }

  ActivationMatrix with_role(Role role) const {
    return ActivationMatrix(n_samples_, n_nodes_, values_, role, layer_label_);
  }

  friend bool operator==(const ActivationMatrix &,
                         const ActivationMatrix &) = default;

 private:
  std::size_t n_samples_;
  std::size_t n_nodes_;
  std::vector<double> values_;
  Role role_;
  std::string layer_label_;
};

// ---------------------------------------------------------------------------
// File contract
//
// Binary (little-endian): "ACTV", u16 version = 1, u8 dtype (1 = f32,
// 2 = f64), u8 role, u64 n_samples, u64 n_nodes, u16 label length, label
// bytes, then n_samples * n_nodes values row-major.
//
// CSV: header node_0,...,node_{J-1}, one row per sample. Role and label are
// not stored in CSV files.
// ---------------------------------------------------------------------------

enum class FileFormat { automatic, binary, csv };
enum class DType : std::uint8_t { float32 = 1, float64 = 2 };

inline constexpr std::array<char, 4> kActivationMagic = {'A', 'C', 'T', 'V'};
inline constexpr std::uint16_t kActivationVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string &out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char *p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;)
    u = static_cast<decltype(u)>((u << 8) | p[i]);
  return static_cast<T>(u);
}

inline std::string read_file(const std::filesystem::path &path) {
  if (path.empty()) throw Error(ErrorKind::io, "empty input path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad())
    throw Error(ErrorKind::io, "read failure on '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path &path,
                       std::string_view data) {
  if (path.empty()) throw Error(ErrorKind::io, "empty output path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out)
    throw Error(ErrorKind::io, "write failure on '" + path.string() + "'");
}

/// Shortest decimal form that parses back to the same double.
inline void append_double(std::string &out, double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), end);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    cells.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) out.push_back(line);
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

}  // namespace detail

inline std::string encode_binary(const ActivationMatrix &m,
                                 DType dtype = DType::float64) {
  if (m.layer_label().size() > 0xFFFF)
    throw Error(ErrorKind::validation, "layer label longer than 65535 bytes");
  std::string out(kActivationMagic.begin(), kActivationMagic.end());
  detail::put_le<std::uint16_t>(out, kActivationVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(m.role()));
  detail::put_le<std::uint64_t>(out, m.n_samples());
  detail::put_le<std::uint64_t>(out, m.n_nodes());
  detail::put_le<std::uint16_t>(
      out, static_cast<std::uint16_t>(m.layer_label().size()));
  out += m.layer_label();
  for (double v : m.values()) {
    if (dtype == DType::float32)
      detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      detail::put_le(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline ActivationMatrix decode_binary(std::string_view data) {
  constexpr std::size_t fixed_header = 4 + 2 + 1 + 1 + 8 + 8 + 2;
  if (data.size() < fixed_header)
    throw Error(ErrorKind::ingest, "malformed header: file shorter than " +
                                       std::to_string(fixed_header) + " bytes");
  const auto *p = reinterpret_cast<const unsigned char *>(data.data());
  if (std::memcmp(p, kActivationMagic.data(), 4) != 0)
    throw Error(ErrorKind::ingest, "malformed header: bad magic bytes");
  const auto version = detail::get_le<std::uint16_t>(p + 4);
  if (version != kActivationVersion)
    throw Error(ErrorKind::ingest, "malformed header: unsupported version " +
                                       std::to_string(version));
  const auto dtype_code = p[6];
  if (dtype_code != 1 && dtype_code != 2)
    throw Error(ErrorKind::ingest, "malformed header: unknown dtype code " +
                                       std::to_string(dtype_code));
  const auto role_code = p[7];
  if (role_code > 2)
    throw Error(ErrorKind::ingest, "malformed header: unknown role code " +
                                       std::to_string(role_code));
  const auto n_samples = detail::get_le<std::uint64_t>(p + 8);
  const auto n_nodes = detail::get_le<std::uint64_t>(p + 16);
  const auto label_len = detail::get_le<std::uint16_t>(p + 24);
  if (n_samples == 0 || n_nodes == 0)
    throw Error(ErrorKind::ingest, "malformed header: zero dimension");
  if (data.size() < fixed_header + label_len)
    throw Error(ErrorKind::ingest, "malformed header: truncated layer label");
  std::string label(data.substr(fixed_header, label_len));

  const std::size_t width = dtype_code == 1 ? 4 : 8;
  const std::size_t payload = data.size() - fixed_header - label_len;
  const bool overflow = n_samples > UINT64_MAX / n_nodes;
  if (overflow || payload % width != 0 ||
      payload / width != n_samples * n_nodes)
    throw Error(ErrorKind::ingest,
                "dimension mismatch: header declares " +
                    std::to_string(n_samples) + "x" + std::to_string(n_nodes) +
                    " values but payload holds " +
                    std::to_string(payload / width) +
                    (payload % width ? " values plus a partial record" : ""));

  std::vector<double> values(n_samples * n_nodes);
  const unsigned char *v = p + fixed_header + label_len;
  for (std::size_t k = 0; k < values.size(); ++k, v += width) {
    values[k] = width == 4
                    ? static_cast<double>(std::bit_cast<float>(
                          detail::get_le<std::uint32_t>(v)))
                    : std::bit_cast<double>(detail::get_le<std::uint64_t>(v));
  }
  return ActivationMatrix(n_samples, n_nodes, std::move(values),
                          static_cast<Role>(role_code), std::move(label));
}

inline std::string encode_csv(const ActivationMatrix &m) {
  std::string out;
  for (std::size_t j = 0; j < m.n_nodes(); ++j) {
    if (j) out += ',';
    out += "node_" + std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < m.n_samples(); ++i) {
    for (std::size_t j = 0; j < m.n_nodes(); ++j) {
      if (j) out += ',';
      detail::append_double(out, m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline ActivationMatrix decode_csv(std::string_view text,
                                   Role role = Role::background,
                                   std::string layer_label = {}) {
  auto rows = detail::lines(text);
  if (rows.empty()) throw Error(ErrorKind::ingest, "malformed header: empty CSV");
  const auto header = detail::split(rows[0], ',');
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] != "node_" + std::to_string(j))
      throw Error(ErrorKind::ingest, "malformed header: column " +
                                         std::to_string(j) + " is '" +
                                         std::string(header[j]) + "'");
  }
  const std::size_t n_nodes = header.size();
  const std::size_t n_samples = rows.size() - 1;
  if (n_samples == 0) throw Error(ErrorKind::ingest, "CSV has no sample rows");
  std::vector<double> values;
  values.reserve(n_samples * n_nodes);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto cells = detail::split(rows[i + 1], ',');
    if (cells.size() != n_nodes)
      throw Error(ErrorKind::ingest,
                  "dimension mismatch at row " + std::to_string(i) + ": " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(n_nodes));
    for (std::size_t j = 0; j < n_nodes; ++j) {
      auto v = detail::parse_double(cells[j]);
      if (!v)
        throw Error(ErrorKind::ingest, "unparsable value at row " +
                                           std::to_string(i) + ", column " +
                                           std::to_string(j));
      if (!std::isfinite(*v))
        throw Error(ErrorKind::ingest, "non-finite value at row " +
                                           std::to_string(i) + ", column " +
                                           std::to_string(j));
      values.push_back(*v);
    }
  }
  return ActivationMatrix(n_samples, n_nodes, std::move(values), role,
                          std::move(layer_label));
}

/// Reads a binary or CSV activation file. Binary files are recognized by
/// their magic bytes; role and label arguments apply to CSV input only.
inline ActivationMatrix read_activations(const std::filesystem::path &path,
                                         Role csv_role = Role::background,
                                         std::string csv_label = {}) {
  const std::string data = detail::read_file(path);
  try {
    if (data.size() >= 4 &&
        std::memcmp(data.data(), kActivationMagic.data(), 4) == 0)
      return decode_binary(data);
    return decode_csv(data, csv_role, std::move(csv_label));
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

inline void write_activations(const ActivationMatrix &m,
                              const std::filesystem::path &path,
                              FileFormat format = FileFormat::automatic,
                              DType dtype = DType::float64) {
  if (path.empty()) throw Error(ErrorKind::io, "empty output path");
  if (format == FileFormat::automatic)
    format = path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
  detail::write_file(path, format == FileFormat::csv ? encode_csv(m)
                                                     : encode_binary(m, dtype));
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Gaussian mixture with an optional exact point mass.
struct NodeDistribution {
  std::vector<double> means{0.0};
  std::vector<double> stds{1.0};
  std::vector<double> weights{1.0};
  double modal_value = 0.0;
  double modal_fraction = 0.0;

  void validate() const {
    if (means.empty())
      throw Error(ErrorKind::validation, "mixture needs at least one component");
    if (means.size() != stds.size() || means.size() != weights.size())
      throw Error(ErrorKind::validation,
                  "means, stds and weights must have equal length");
    if (!(modal_fraction >= 0.0 && modal_fraction < 1.0))
      throw Error(ErrorKind::validation, "point-mass fraction must lie in [0,1)");
    for (double s : stds)
      if (!(s > 0.0) || !std::isfinite(s))
        throw Error(ErrorKind::validation, "mixture std-devs must be > 0");
    for (double w : weights)
      if (!(w >= 0.0))
        throw Error(ErrorKind::validation, "mixture weights must be >= 0");
    for (double m : means)
      if (!std::isfinite(m))
        throw Error(ErrorKind::validation, "mixture means must be finite");
    if (!std::isfinite(modal_value))
      throw Error(ErrorKind::validation, "modal value must be finite");
    const double total =
        std::accumulate(weights.begin(), weights.end(), 0.0) + modal_fraction;
    if (std::abs(total - 1.0) > 1e-9)
      throw Error(ErrorKind::validation,
                  "mixture weights plus point-mass fraction must sum to 1");
  }

  double mean() const {
    double m = modal_fraction * modal_value;
    for (std::size_t c = 0; c < means.size(); ++c) m += weights[c] * means[c];
    return m;
  }

  double stddev() const {
    double second = modal_fraction * modal_value * modal_value;
    for (std::size_t c = 0; c < means.size(); ++c)
      second += weights[c] * (stds[c] * stds[c] + means[c] * means[c]);
    const double m = mean();
    return std::sqrt(std::max(0.0, second - m * m));
  }
};

struct GeneratorSpec {
  std::size_t n_samples = 0;
  std::size_t n_nodes = 0;
  /// One entry shared by every node, or exactly n_nodes entries.
  std::vector<NodeDistribution> nodes{NodeDistribution{}};
  std::uint64_t seed = 0;
  Role role = Role::background;
  std::string layer_label;

  const NodeDistribution &node(std::size_t j) const {
    return nodes.size() == 1 ? nodes.front() : nodes[j];
  }

  void validate() const {
    if (n_samples == 0 || n_nodes == 0)
      throw Error(ErrorKind::validation,
                  "generator needs n_samples >= 1 and n_nodes >= 1");
    if (nodes.size() != 1 && nodes.size() != n_nodes)
      throw Error(ErrorKind::validation,
                  "generator needs one distribution or one per node");
    for (const auto &d : nodes) d.validate();
  }
};

inline void from_json(const nlohmann::json &j, NodeDistribution &d) {
  d = NodeDistribution{};
  d.means = j.value("means", d.means);
  d.stds = j.value("stds", d.stds);
  d.weights = j.value("weights", d.weights);
  if (auto it = j.find("point_mass"); it != j.end()) {
    d.modal_value = it->at("value").get<double>();
    d.modal_fraction = it->at("fraction").get<double>();
  }
}

inline void to_json(nlohmann::json &j, const NodeDistribution &d) {
  j = {{"means", d.means}, {"stds", d.stds}, {"weights", d.weights}};
  if (d.modal_fraction > 0)
    j["point_mass"] = {{"value", d.modal_value},
                       {"fraction", d.modal_fraction}};
}

inline void from_json(const nlohmann::json &j, GeneratorSpec &s) {
  s = GeneratorSpec{};
  s.n_samples = j.at("n_samples").get<std::size_t>();
  s.n_nodes = j.at("n_nodes").get<std::size_t>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.role = role_from_string(j.value("role", std::string("background")));
  s.layer_label = j.value("layer_label", std::string{});
  if (auto it = j.find("nodes"); it != j.end())
    s.nodes = it->get<std::vector<NodeDistribution>>();
}

inline void to_json(nlohmann::json &j, const GeneratorSpec &s) {
  j = {{"n_samples", s.n_samples}, {"n_nodes", s.n_nodes},
       {"seed", s.seed},           {"role", std::string(to_string(s.role))},
       {"layer_label", s.layer_label}, {"nodes", s.nodes}};
}

inline GeneratorSpec parse_generator_spec(std::string_view text) {
  try {
    auto spec = nlohmann::json::parse(text).get<GeneratorSpec>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::schema, std::string("generator spec: ") + e.what());
  }
}

/// Draws a matrix from the spec. Node j uses its own stream derived from
/// (seed, j), so the result does not depend on the thread count.
inline ActivationMatrix synthesize(const GeneratorSpec &spec,
                                   std::size_t threads = 1) {
  spec.validate();
  std::vector<double> values(spec.n_samples * spec.n_nodes);
  parallel_for(spec.n_nodes, threads, [&](std::size_t j) {
    const auto &dist = spec.node(j);
    std::mt19937_64 rng(mix_seed(spec.seed, j));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double gaussian_mass = 1.0 - dist.modal_fraction;
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
      double u = unit(rng);
      double v;
      if (u < dist.modal_fraction) {
        v = dist.modal_value;
      } else {
        u = (u - dist.modal_fraction) / gaussian_mass;
        std::size_t c = 0;
        double acc = dist.weights[0] / gaussian_mass;
        while (c + 1 < dist.weights.size() && u >= acc)
          acc += dist.weights[++c] / gaussian_mass;
        v = dist.means[c] + dist.stds[c] * normal(rng);
      }
      values[i * spec.n_nodes + j] = v;
    }
  });
  return ActivationMatrix(spec.n_samples, spec.n_nodes, std::move(values),
                          spec.role, spec.layer_label);
}

/// Adds `shift` plus N(0, (|shift|/4)^2) noise to the selected nodes of a
/// clean matrix. All other nodes are copied unchanged.
inline ActivationMatrix inject_anomaly(const ActivationMatrix &m,
                                       std::span<const std::size_t> node_indices,
                                       double shift, std::uint64_t seed) {
  if (m.role() != Role::clean)
    throw Error(ErrorKind::validation,
                "anomalies can only be injected into a clean matrix");
  if (!std::isfinite(shift))
    throw Error(ErrorKind::validation, "shift must be finite");
  for (auto j : node_indices)
    if (j >= m.n_nodes())
      throw Error(ErrorKind::validation,
                  "node index " + std::to_string(j) + " out of range for " +
                      std::to_string(m.n_nodes()) + " nodes");
  std::vector<double> values(m.values().begin(), m.values().end());
  std::vector<std::size_t> selected(node_indices.begin(), node_indices.end());
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  const double noise_std = std::abs(shift) / 4.0;
  for (auto j : selected) {
    std::mt19937_64 rng(mix_seed(seed, j));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
      double &v = values[i * m.n_nodes() + j];
      v += shift;
      if (noise_std > 0) v += noise_std * normal(rng);
    }
  }
  return ActivationMatrix(m.n_samples(), m.n_nodes(), std::move(values),
                          Role::anomalous, m.layer_label());
}

}  // namespace actsketch
