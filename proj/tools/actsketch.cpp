// actsketch: command-line pipeline over activation files.
//
//   synth -> build -> pvalues -> compare / scan -> evaluate, plus bench.
//
// Every command reads and validates all of its inputs before any output
// file is written.

#include <actsketch/actsketch.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace actsketch;

std::vector<double> parse_real_list(const std::string &text) {
  std::vector<double> out;
  for (auto cell : detail::split(text, ',')) {
    auto v = detail::parse_double(cell);
    if (!v) throw Error(ErrorKind::config, "cannot parse '" + std::string(cell) + "' as a number");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string &text) {
  std::vector<std::size_t> out;
  if (detail::trim(text).empty()) return out;
  for (auto cell : detail::split(text, ',')) {
    auto v = detail::parse_int<std::size_t>(cell);
    if (!v) throw Error(ErrorKind::config, "cannot parse '" + std::string(cell) + "' as an index");
    out.push_back(*v);
  }
  return out;
}

FileFormat parse_format(const std::string &s) {
  if (s == "auto") return FileFormat::automatic;
  if (s == "binary") return FileFormat::binary;
  if (s == "csv") return FileFormat::csv;
  throw Error(ErrorKind::config, "unknown format '" + s + "'");
}

std::string dump(const nlohmann::json &j) { return j.dump(2) + "\n"; }

struct BenchConfig {
  std::vector<Method> methods{Method::empirical, Method::kde, Method::histogram_range};
  std::vector<std::size_t> node_counts{100, 1000, 5000};
  GeneratorSpec background;
  std::vector<double> fractions{0.2, 0.5, 1.0};
  std::size_t query_nodes = 1000;
  std::size_t n_test = 50;
  std::size_t reps = 5;
  std::uint64_t seed = 1;
  SketchConfig sketch;

  BenchConfig() {
    background.n_samples = 500;
    background.n_nodes = 1;
    background.seed = 1;
  }
};

BenchConfig parse_bench_config(const std::string &text) {
  BenchConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (auto it = j.find("methods"); it != j.end()) {
      c.methods.clear();
      for (const auto &m : *it) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    c.node_counts = j.value("node_counts", c.node_counts);
    c.fractions = j.value("fractions", c.fractions);
    c.query_nodes = j.value("query_nodes", c.query_nodes);
    c.n_test = j.value("n_test", c.n_test);
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    if (auto it = j.find("background"); it != j.end()) {
      auto spec = *it;
      if (!spec.contains("n_nodes")) spec["n_nodes"] = 1;
      c.background = spec.get<GeneratorSpec>();
    }
    if (auto it = j.find("sketch"); it != j.end()) {
      c.sketch.modal_threshold_fraction =
          it->value("modal_threshold_fraction", c.sketch.modal_threshold_fraction);
      c.sketch.max_bins = it->value("max_bins", c.sketch.max_bins);
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::schema, std::string("bench config: ") + e.what());
  }
  c.background.validate();
  c.sketch.validate();
  if (c.n_test == 0 || c.query_nodes == 0)
    throw Error(ErrorKind::config, "bench config needs n_test >= 1 and query_nodes >= 1");
  return c;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Node-specific histogram p-values for DNN activation spaces"};
  app.require_subcommand(1);
  app.set_config("--run-config", "", "INI/TOML file with default flag values");

  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (env ACTSKETCH_THREADS)")
      ->check(CLI::PositiveNumber);

  // synth
  std::string spec_path, synth_out, synth_format = "auto", synth_role;
  std::optional<std::uint64_t> synth_seed;
  auto *synth = app.add_subcommand("synth", "Draw a synthetic activation matrix");
  synth->add_option("--spec", spec_path, "Generator spec JSON")->required();
  synth->add_option("--out", synth_out, "Output activation file")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed");
  synth->add_option("--format", synth_format, "auto|binary|csv");
  synth->add_option("--role", synth_role, "Override the spec role")
      ->check(CLI::IsMember({"background", "clean", "anomalous"}));

  // inject
  std::string inject_in, inject_out, inject_nodes;
  double inject_shift = 0.0;
  std::uint64_t inject_seed = 0;
  auto *inject = app.add_subcommand("inject", "Shift selected nodes of a clean matrix");
  inject->add_option("--input", inject_in, "Clean activation file")->required();
  inject->add_option("--nodes", inject_nodes, "Comma-separated node indices")->required();
  inject->add_option("--shift", inject_shift, "Additive shift")->required();
  inject->add_option("--seed", inject_seed, "Noise seed");
  inject->add_option("--out", inject_out, "Output activation file")->required();

  // build
  std::string build_bg, build_out, build_label;
  SketchConfig sketch_config;
  auto *build = app.add_subcommand("build", "Build node-specific histograms");
  build->add_option("--background", build_bg, "Background activation file")->required();
  build->add_option("--max-bins", sketch_config.max_bins, "Cap on bins per node");
  build->add_option("--modal-threshold", sketch_config.modal_threshold_fraction,
                    "Fraction above which a repeated value gets its own bin");
  build->add_option("--label", build_label, "Layer label for CSV input");
  build->add_option("--out", build_out, "Output sketch JSON")->required();

  // pvalues
  std::string pv_repr, pv_test, pv_method = "histogram", pv_out;
  bool pv_printed = false;
  auto *pvalues = app.add_subcommand("pvalues", "Score a test matrix");
  pvalues->add_option("--repr", pv_repr,
                      "Sketch JSON (histogram) or background activations (empirical, kde)")
      ->required();
  pvalues->add_option("--test", pv_test, "Test activation file")->required();
  pvalues->add_option("--method", pv_method, "empirical|kde|histogram")
      ->check(CLI::IsMember({"empirical", "kde", "histogram"}));
  pvalues->add_flag("--printed-orientation", pv_printed,
                    "Histogram ranges with the original printed orientation (comparison only)");
  pvalues->add_option("--out", pv_out, "Output p-value CSV")->required();

  // compare
  std::string cmp_ref, cmp_cand, cmp_out;
  std::uint64_t cmp_seed = 0;
  std::size_t cmp_repeats = 1;
  auto *compare = app.add_subcommand("compare", "KS-compare two p-value representations");
  compare->add_option("--reference", cmp_ref, "Degenerate p-value CSV")->required();
  compare->add_option("--candidate", cmp_cand, "Candidate p-value CSV")->required();
  compare->add_option("--seed", cmp_seed, "Draw seed");
  compare->add_option("--repeats", cmp_repeats, "Average over this many seeded draws")
      ->check(CLI::PositiveNumber);
  compare->add_option("--out", cmp_out, "Output report JSON")->required();

  // scan
  std::string scan_pv, scan_alphas, scan_mode = "pmax", scan_out;
  std::uint64_t scan_seed = 0;
  auto *scan = app.add_subcommand("scan", "Subset-scan each test sample");
  scan->add_option("--pvalues", scan_pv, "P-value CSV")->required();
  scan->add_option("--alphas", scan_alphas, "Comma-separated alpha grid (default 0.01..0.50)");
  scan->add_option("--mode", scan_mode, "pmax|draw")->check(CLI::IsMember({"pmax", "draw"}));
  scan->add_option("--seed", scan_seed, "Seed for draw mode");
  scan->add_option("--out", scan_out, "Output scores CSV")->required();

  // evaluate
  std::string eval_clean, eval_anom, eval_out;
  auto *evaluate = app.add_subcommand("evaluate", "AUROC of anomalous vs clean scores");
  evaluate->add_option("--clean", eval_clean, "Clean scores CSV")->required();
  evaluate->add_option("--anomalous", eval_anom, "Anomalous scores CSV")->required();
  evaluate->add_option("--out", eval_out, "Optional JSON output");

  // export
  std::string exp_pv, exp_nodes, exp_out;
  std::uint64_t exp_seed = 0;
  auto *exportc = app.add_subcommand("export", "Long-form p-value distribution CSV");
  exportc->add_option("--pvalues", exp_pv, "P-value CSV")->required();
  exportc->add_option("--nodes", exp_nodes, "Comma-separated node indices")->required();
  exportc->add_option("--seed", exp_seed, "Draw seed");
  exportc->add_option("--out", exp_out, "Output CSV")->required();

  // bench
  std::string bench_cfg, bench_out, bench_md;
  auto *bench = app.add_subcommand("bench", "Memory and runtime benchmarks");
  bench->add_option("--config", bench_cfg, "Bench config JSON (defaults when omitted)");
  bench->add_option("--out", bench_out, "Output report JSON")->required();
  bench->add_option("--markdown", bench_md, "Also write a markdown table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      auto spec = parse_generator_spec(detail::read_file(spec_path));
      if (synth_seed) spec.seed = *synth_seed;
      if (!synth_role.empty()) spec.role = role_from_string(synth_role);
      const auto m = synthesize(spec, threads);
      write_activations(m, synth_out, parse_format(synth_format));
    } else if (*inject) {
      const auto nodes = parse_index_list(inject_nodes);
      const auto m = read_activations(inject_in, Role::clean);
      const auto anomalous = inject_anomaly(m, nodes, inject_shift, inject_seed);
      write_activations(anomalous, inject_out);
    } else if (*build) {
      sketch_config.validate();
      const auto bg = read_activations(build_bg, Role::background, build_label);
      const auto sketch = build_sketch(bg, sketch_config, threads);
      detail::write_file(build_out, sketch_to_json(sketch));
    } else if (*pvalues) {
      const auto method = method_from_string(pv_method);
      const auto test = read_activations(pv_test, Role::clean);
      PValueMatrix p;
      if (method == Method::histogram_range) {
        const auto sketch = sketch_from_json(detail::read_file(pv_repr));
        p = pv_printed ? score_matrix_printed(sketch, test, threads)
                       : score_matrix(sketch, test, threads);
      } else {
        if (pv_printed)
          throw Error(ErrorKind::config, "--printed-orientation applies to histogram only");
        const auto bg = read_activations(pv_repr, Role::background).with_role(Role::background);
        p = method == Method::empirical ? score_matrix(build_empirical(bg, threads), test, threads)
                                        : score_matrix(fit_kde(bg, threads), test, threads);
      }
      write_pvalues(p, pv_out);
    } else if (*compare) {
      const auto ref = read_pvalues(cmp_ref);
      const auto cand = read_pvalues(cmp_cand);
      const auto report = compare_representations(ref, cand, cmp_seed, cmp_repeats, threads);
      detail::write_file(cmp_out, dump(to_json_value(report)));
      std::printf("mean KS statistic %.6f, mean p-value %.6f\n", report.mean_statistic,
                  report.mean_p_value);
    } else if (*scan) {
      const auto alphas = scan_alphas.empty() ? default_alpha_grid() : parse_real_list(scan_alphas);
      validate_alphas(alphas);
      const auto p = read_pvalues(scan_pv);
      const auto mode = scan_mode == "draw" ? ScanMode::draw : ScanMode::p_max;
      const auto results = scan_samples(p, alphas, mode, scan_seed, threads);
      detail::write_file(scan_out, scores_to_csv(results));
    } else if (*evaluate) {
      const auto clean = read_scores(eval_clean);
      const auto anomalous = read_scores(eval_anom);
      const double value = auroc(clean, anomalous);
      const nlohmann::json j = {{"auroc", value},
                                {"n_clean", clean.size()},
                                {"n_anomalous", anomalous.size()}};
      if (!eval_out.empty()) detail::write_file(eval_out, dump(j));
      std::cout << j.dump() << "\n";
    } else if (*exportc) {
      const auto nodes = parse_index_list(exp_nodes);
      const auto p = read_pvalues(exp_pv);
      detail::write_file(exp_out, distribution_to_csv(p, nodes, exp_seed));
    } else if (*bench) {
      const auto cfg = bench_cfg.empty() ? BenchConfig{} : parse_bench_config(detail::read_file(bench_cfg));
      auto reports = bench_build(cfg.methods, cfg.node_counts, cfg.background, cfg.reps,
                                 cfg.sketch, threads);
      auto spec = cfg.background;
      spec.n_nodes = cfg.query_nodes;
      spec.role = Role::background;
      const auto bg = synthesize(spec, threads);
      spec.n_samples = cfg.n_test;
      spec.seed = mix_seed(cfg.seed, 17);
      spec.role = Role::clean;
      const auto test = synthesize(spec, threads);
      const auto query = bench_query(cfg.methods, cfg.fractions, bg, test, cfg.reps, cfg.seed,
                                     cfg.sketch, threads);
      reports.insert(reports.end(), query.begin(), query.end());
      detail::write_file(bench_out, dump(reports_to_json(reports)));
      const auto md = report_to_markdown(reports);
      if (!bench_md.empty()) detail::write_file(bench_md, md);
      std::cout << md;
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
