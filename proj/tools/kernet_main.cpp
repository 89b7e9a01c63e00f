#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kernet/config.hpp"
#include "kernet/diagnostics.hpp"
#include "kernet/distributed.hpp"
#include "kernet/estimator.hpp"
#include "kernet/experiment.hpp"
#include "kernet/rng.hpp"
#include "kernet/selftest.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  int threads = 0;
  bool quiet = false;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KERNET_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || value < 1) {
      throw kernet::ConfigError("KERNET_THREADS must be a positive integer");
    }
    return static_cast<int>(value);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

kernet::ConfigMap load_config(const Options& opt) {
  kernet::ConfigMap map;
  if (!opt.config_path.empty()) map = kernet::ConfigMap::parse_file(opt.config_path);
  for (const auto& kv : opt.overrides) map.apply_override(kv);
  return map;
}

void write_csv_file(const fs::path& path, const kernet::ExperimentConfig& cfg,
                    const std::vector<kernet::ResultRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw kernet::IoError("cannot open output file: " + path.string());
  kernet::write_csv(os, cfg, rows);
  if (!os) throw kernet::IoError("failed writing output file: " + path.string());
}

double resolve_single_lambda(const kernet::ExperimentConfig& cfg, const kernet::LabeledSet& data,
                             std::uint64_t seed) {
  using Kind = kernet::LambdaRule::Kind;
  switch (cfg.lambda_rule.kind) {
    case Kind::Fixed:
      return cfg.lambda_rule.value;
    case Kind::Power:
      return kernet::lambda_from_power(cfg.n_total, cfg.lambda_rule.theta);
    case Kind::LocalTuned: {
      const auto grid = cfg.lambda_rule.grid();
      return kernet::tune_local_then_underregularize(data, cfg.n_total, grid,
                                                     cfg.lambda_rule.holdout_fraction, seed,
                                                     cfg.variants.front(), cfg.kernel);
    }
  }
  throw kernet::ConfigError("unknown lambda rule");
}

int run_fit(const Options& opt) {
  const kernet::ConfigMap map = load_config(opt);
  const kernet::ExperimentConfig cfg = kernet::resolve_experiment(map);
  const std::uint64_t seed = cfg.seeds.front();
  const kernet::LabeledSet data = kernet::problem_data(cfg, cfg.n_total, seed);
  const double lambda = resolve_single_lambda(cfg, data, seed);
  const kernet::Variant variant = cfg.variants.front();
  const kernet::FitResult fit = variant == kernet::Variant::Rkn
                                    ? kernet::fit_rkn(data, lambda, cfg.kernel)
                                    : kernet::fit_bcrkn(data, lambda, cfg.kernel);
  fs::create_directories(opt.out_dir);
  const fs::path path = fs::path(opt.out_dir) / "model.kernet";
  kernet::save_model(path, fit.model);
  if (!opt.quiet) {
    std::cout.precision(17);
    std::cout << "fit.variant=" << kernet::to_string(variant) << "\n";
    std::cout << "fit.n=" << data.size() << "\n";
    std::cout << "fit.lambda=" << lambda << "\n";
    std::cout << "fit.jitter=" << fit.report.jitter_applied << "\n";
    if (fit.report.condition_estimate) {
      std::cout << "fit.condition_estimate=" << *fit.report.condition_estimate << "\n";
    }
    std::cout << "fit.rkhs_norm=" << kernet::rkhs_norm(fit.model) << "\n";
    std::cout << "fit.model=" << path.string() << "\n";
  }
  return 0;
}

int run_distribute(const Options& opt, int threads) {
  const kernet::ConfigMap map = load_config(opt);
  const kernet::ExperimentConfig cfg = kernet::resolve_experiment(map);
  const std::uint64_t seed = cfg.seeds.front();
  const int m = cfg.m_list.front();
  const kernet::LabeledSet data = kernet::problem_data(cfg, cfg.n_total, seed);
  const kernet::Partition part = kernet::partition(
      data, m, kernet::rng::bits(seed, kernet::rng::kPartition, static_cast<std::uint64_t>(m)));
  double lambda = 0.0;
  if (cfg.lambda_rule.kind == kernet::LambdaRule::Kind::LocalTuned) {
    lambda = kernet::tune_local_then_underregularize(
        kernet::subset(data, part.blocks.front()), cfg.n_total, cfg.lambda_rule.grid(),
        cfg.lambda_rule.holdout_fraction, seed, cfg.variants.front(), cfg.kernel);
  } else {
    lambda = resolve_single_lambda(cfg, data, seed);
  }
  const kernet::AveragedModel average =
      kernet::fit_distributed(data, part, lambda, cfg.kernel, cfg.variants.front(), threads);
  fs::create_directories(opt.out_dir);
  const fs::path path = fs::path(opt.out_dir) / "average.manifest";
  kernet::save_averaged(path, average);
  if (!opt.quiet) {
    std::cout.precision(17);
    std::cout << "distribute.variant=" << kernet::to_string(cfg.variants.front()) << "\n";
    std::cout << "distribute.blocks=" << m << "\n";
    std::cout << "distribute.lambda=" << lambda << "\n";
    std::cout << "distribute.manifest=" << path.string() << "\n";
  }
  return 0;
}

int run_figure1(const Options& opt, int threads) {
  const kernet::ConfigMap base = load_config(opt);
  fs::create_directories(opt.out_dir);
  const struct {
    const char* name;
    const char* rule;
  } panels[] = {{"panel_a", "power"}, {"panel_b", "local_tuned"}};
  for (const auto& panel : panels) {
    kernet::ConfigMap map = base;
    map.set("lambda.rule", kernet::ConfigValue::scalar(std::string(panel.rule)));
    const kernet::ExperimentConfig cfg = kernet::resolve_experiment(map);
    const auto rows = kernet::run_comparison(cfg, threads);
    const fs::path path = fs::path(opt.out_dir) / (std::string(panel.name) + ".csv");
    write_csv_file(path, cfg, rows);
    if (!opt.quiet) {
      std::cout << panel.name << ": " << rows.size() << " cells -> " << path.string() << "\n";
    }
  }
  return 0;
}

int run_rates(const Options& opt, int threads) {
  kernet::ConfigMap map = load_config(opt);
  std::vector<long long> default_seeds;
  for (long long s = 1; s <= 50; ++s) default_seeds.push_back(s);
  const std::vector<long long> n_list =
      map.get_int_array("rates.n_list", {256, 512, 1024, 2048, 4096, 8192});
  if (!map.contains("experiment.seeds")) {
    std::vector<kernet::ConfigScalar> seeds(default_seeds.begin(), default_seeds.end());
    map.set("experiment.seeds", kernet::ConfigValue::array(std::move(seeds)));
  }
  if (!map.contains("experiment.m_list")) {
    map.set("experiment.m_list",
            kernet::ConfigValue::array({kernet::ConfigScalar(static_cast<long long>(1))}));
  }

  struct Series {
    std::vector<long long> n;
    std::vector<double> mse;
  };
  std::map<kernet::Variant, Series> series;
  kernet::ExperimentConfig echo_cfg = kernet::resolve_experiment(map);

  std::ostringstream body;
  for (long long n : n_list) {
    kernet::ConfigMap step = map;
    step.set("experiment.n_total", kernet::ConfigValue::scalar(n));
    const kernet::ExperimentConfig cfg = kernet::resolve_experiment(step);
    const auto rows = kernet::run_comparison(cfg, threads);
    for (kernet::Variant variant : cfg.variants) {
      double total = 0.0;
      int count = 0;
      for (const auto& row : rows) {
        if (row.variant == variant && row.failure.empty()) {
          total += row.mse;
          ++count;
        }
      }
      if (count == 0) {
        throw kernet::NumericalError("all cells failed at n=" + std::to_string(n));
      }
      const double mean = total / count;
      series[variant].n.push_back(n);
      series[variant].mse.push_back(mean);
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", mean);
      body << n << ',' << kernet::to_string(variant) << ',' << buf << '\n';
    }
    if (!opt.quiet) std::cout << "rates: finished n=" << n << "\n";
  }

  fs::create_directories(opt.out_dir);
  const fs::path path = fs::path(opt.out_dir) / "rates.csv";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw kernet::IoError("cannot open output file: " + path.string());
  os << "# kernet-rates v1\n";
  for (const auto& [key, value] : kernet::echo_config(echo_cfg)) {
    if (key == "experiment.n_total") continue;  // swept, not fixed
    os << "# " << key << '=' << value << '\n';
  }
  os << "# rates.n_list=[";
  for (std::size_t i = 0; i < n_list.size(); ++i) os << (i ? "," : "") << n_list[i];
  os << "]\n";
  for (const auto& [variant, data] : series) {
    const double slope = kernet::estimate_rate(data.n, data.mse);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", slope);
    os << "# rate." << kernet::to_string(variant) << '=' << buf << '\n';
    if (!opt.quiet) std::cout << "rate." << kernet::to_string(variant) << '=' << buf << "\n";
  }
  os << "n,variant,mean_mse\n" << body.str();
  if (!os) throw kernet::IoError("failed writing output file: " + path.string());
  if (!opt.quiet) std::cout << "rates: wrote " << path.string() << "\n";
  return 0;
}

int run_diagnose(const Options& opt) {
  kernet::ConfigMap map = load_config(opt);
  std::ostringstream sink;
  std::ostream& out = opt.quiet ? static_cast<std::ostream&>(sink) : std::cout;
  const kernet::ExperimentConfig cfg = kernet::resolve_experiment(map);
  const long long grid_size = map.get_int("diagnose.grid_size", 1024);
  if (grid_size < 2) throw kernet::ConfigError("diagnose.grid_size must be at least 2");
  if (cfg.kernel.domain().dim() != 1) {
    throw kernet::ConfigError("diagnose needs a one-dimensional kernel domain");
  }

  kernet::Points grid(grid_size, 1);
  const kernet::Box& box = cfg.kernel.domain();
  for (long long i = 0; i < grid_size; ++i) {
    grid(i, 0) = box.lo(0) + (box.hi(0) - box.lo(0)) * static_cast<double>(i) /
                                 static_cast<double>(grid_size - 1);
  }
  const kernet::EmpiricalSpectrum spectrum = kernet::empirical_spectrum(cfg.kernel, grid);
  const double lambda =
      cfg.lambda_rule.kind == kernet::LambdaRule::Kind::Fixed
          ? cfg.lambda_rule.value
          : kernet::lambda_from_power(cfg.n_total,
                                      cfg.lambda_rule.kind == kernet::LambdaRule::Kind::Power
                                          ? cfg.lambda_rule.theta
                                          : 2.0 / 3.0);
  const double n_eff = kernet::effective_dimension(spectrum, lambda);
  const double bound =
      kernet::bound_quantity(cfg.n_total, lambda, n_eff, cfg.kernel.kappa());
  kernet::Vector capacity_grid(20);
  for (kernet::Index i = 0; i < 20; ++i) {
    capacity_grid(i) = std::pow(10.0, -4.0 + 3.0 * static_cast<double>(i) / 19.0);
  }
  const kernet::CapacityEstimate capacity = kernet::fit_capacity(spectrum, capacity_grid);

  out.precision(17);
  out << "diagnostics.kernel=" << kernet::to_string(cfg.kernel.family()) << "\n";
  out << "diagnostics.kappa=" << cfg.kernel.kappa() << "\n";
  out << "diagnostics.spectrum_grid=" << grid_size << "\n";
  for (kernet::Index i = 0; i < std::min<kernet::Index>(5, spectrum.size()); ++i) {
    out << "diagnostics.eigenvalue_" << i << '=' << spectrum.eigenvalues(i) << "\n";
  }
  out << "diagnostics.n_total=" << cfg.n_total << "\n";
  out << "diagnostics.lambda=" << lambda << "\n";
  out << "diagnostics.effective_dimension=" << n_eff << "\n";
  out << "diagnostics.bound=" << bound << "\n";
  out << "diagnostics.capacity_beta=" << capacity.beta << "\n";
  out << "diagnostics.capacity_c0=" << capacity.c0 << "\n";
  return 0;
}

int run_selftest(const Options& opt) {
  std::ostringstream sink;
  std::ostream& os = opt.quiet ? static_cast<std::ostream&>(sink) : std::cout;
  const bool ok = kernet::selftest::run(os);
  if (!ok && opt.quiet) std::cout << sink.str();
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed kernel regression with bias corrected regularization"};
  app.require_subcommand(1);
  app.fallthrough(true);
  app.failure_message(CLI::FailureMessage::help);

  Options opt;
  app.add_option("--config", opt.config_path, "TOML configuration file");
  app.add_option("--override", opt.overrides, "key=value applied after the config file")
      ->take_all();
  app.add_option("--out", opt.out_dir, "Output directory");
  app.add_option("--threads", opt.threads,
                 "Worker threads (default: KERNET_THREADS or hardware)");
  app.add_flag("--quiet", opt.quiet, "Suppress progress output");

  auto* fit = app.add_subcommand("fit", "Fit one model and save it");
  auto* distribute = app.add_subcommand("distribute", "Fit a distributed average and save it");
  auto* figure1 =
      app.add_subcommand("figure1", "Run the two-panel m-sweep comparison, writing CSVs");
  auto* rates = app.add_subcommand("rates", "Sweep sample sizes and estimate rates");
  auto* diagnose = app.add_subcommand("diagnose", "Print spectrum and complexity reports");
  auto* selftest = app.add_subcommand("selftest", "Run the library invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const int threads = resolve_threads(opt.threads);
    if (fit->parsed()) return run_fit(opt);
    if (distribute->parsed()) return run_distribute(opt, threads);
    if (figure1->parsed()) return run_figure1(opt, threads);
    if (rates->parsed()) return run_rates(opt, threads);
    if (diagnose->parsed()) return run_diagnose(opt);
    if (selftest->parsed()) return run_selftest(opt);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const kernet::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const kernet::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const kernet::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const kernet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
