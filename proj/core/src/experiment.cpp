#include "kernet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "kernet/config.hpp"
#include "kernet/parallel.hpp"
#include "kernet/rng.hpp"

namespace kernet {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Points uniform_grid_1d(const Box& box, Index g) {
  Points grid(g, 1);
  for (Index i = 0; i < g; ++i) {
    grid(i, 0) = box.lo(0) + (box.hi(0) - box.lo(0)) * static_cast<double>(i) /
                                 static_cast<double>(g - 1);
  }
  return grid;
}

// Exact kernel expansion of the simulation target: interpolating
// min(x, 1-x) on a fine grid containing the kink reproduces it exactly
// under the 1 + min kernel, whose sections are piecewise linear.
KernelModel paper_target_expansion() {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  LabeledSet nodes;
  nodes.domain = k.domain();
  nodes.inputs = uniform_grid_1d(k.domain(), 1001);
  nodes.labels.resize(1001);
  for (Index i = 0; i < 1001; ++i) nodes.labels(i) = paper_target(nodes.inputs(i, 0));
  return interpolate(nodes, k);
}

double holdout_mean_square(const KernelModel& model, const LabeledSet& holdout) {
  const Vector residual = predict(model, holdout.inputs) - holdout.labels;
  return residual.squaredNorm() / static_cast<double>(holdout.size());
}

struct Cell {
  std::size_t seed_index;
  int m;
  Variant variant;
};

}  // namespace

std::vector<double> LambdaRule::grid() const {
  if (grid_size < 1) throw ParameterError("lambda grid size must be positive");
  if (!(grid_min > 0.0) || !(grid_max >= grid_min)) {
    throw ParameterError("lambda grid bounds must satisfy 0 < min <= max");
  }
  std::vector<double> out(static_cast<std::size_t>(grid_size));
  if (grid_size == 1) {
    out[0] = grid_min;
    return out;
  }
  const double step = (std::log(grid_max) - std::log(grid_min)) / (grid_size - 1);
  for (int i = 0; i < grid_size; ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(std::log(grid_min) + step * i);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (n_total < 1) throw ParameterError("n_total must be positive");
  if (m_list.empty()) throw ParameterError("m_list must be nonempty");
  for (int m : m_list) {
    if (m < 1 || m > n_total) throw ParameterError("every m must lie in [1, n_total]");
  }
  if (variants.empty()) throw ParameterError("variants must be nonempty");
  if (seeds.empty()) throw ParameterError("seeds must be nonempty");
  if (quadrature_size < 2) throw ParameterError("quadrature_size must be at least 2");
  if (lambda_rule.kind == LambdaRule::Kind::Fixed && !(lambda_rule.value > 0.0)) {
    throw ParameterError("fixed lambda must be positive");
  }
  if (lambda_rule.kind == LambdaRule::Kind::Power && !(lambda_rule.theta > 0.0)) {
    throw ParameterError("power rule exponent must be positive");
  }
  if (lambda_rule.kind == LambdaRule::Kind::LocalTuned) {
    if (!(lambda_rule.holdout_fraction > 0.0 && lambda_rule.holdout_fraction < 1.0)) {
      throw ParameterError("holdout_fraction must lie in (0, 1)");
    }
    lambda_rule.grid();
  }
  if (problem == Problem::Synthetic) {
    if (!(synthetic.r > 0.0)) throw ParameterError("synthetic r must be positive");
    if (!(synthetic.noise_sd >= 0.0)) throw ParameterError("noise_sd must be nonnegative");
    if (synthetic.spectrum_grid < 2) throw ParameterError("spectrum_grid must be at least 2");
  }
}

double paper_target(double x) { return std::min(x, 1.0 - x); }

LabeledSet generate_paper_data(Index n, std::uint64_t seed, double noise_sd) {
  if (n < 1) throw ParameterError("sample size must be positive");
  if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be nonnegative");
  LabeledSet out;
  out.domain = Box::unit_interval();
  out.inputs = rng::uniform_points(out.domain, n, seed, rng::kInputs);
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.labels(i) = paper_target(out.inputs(i, 0)) +
                    noise_sd * rng::gaussian(seed, rng::kNoise, static_cast<std::uint64_t>(i));
  }
  return out;
}

double lambda_from_power(long long n, double theta) {
  if (n < 1) throw ParameterError("sample size must be positive");
  if (!(theta > 0.0)) throw ParameterError("theta must be positive");
  return std::pow(static_cast<double>(n), -theta);
}

double tune_local_then_underregularize(const LabeledSet& block, long long n_total,
                                       std::span<const double> grid, double holdout_fraction,
                                       std::uint64_t seed, Variant variant, const KernelSpec& k) {
  block.validate();
  if (grid.empty()) throw ParameterError("lambda grid must be nonempty");
  const Index nb = block.size();
  if (nb < 2 || n_total < 2) {
    throw ParameterError("underregularization needs at least 2 points");
  }
  const double exponent =
      std::log(static_cast<double>(n_total)) / std::log(static_cast<double>(nb));

  if (grid.size() == 1) return std::pow(grid[0], exponent);

  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ParameterError("holdout_fraction must lie in (0, 1)");
  }
  // Clamp the holdout into [2, nb - 1]; tiny blocks keep two points aside.
  const Index raw = static_cast<Index>(holdout_fraction * static_cast<double>(nb));
  const Index holdout_size = std::min<Index>(nb - 1, std::max<Index>(2, raw));
  if (holdout_size < 2 || holdout_size >= nb) {
    throw ParameterError("degenerate holdout split");
  }

  const std::vector<Index> perm =
      rng::shuffled_indices(nb, rng::bits(seed, rng::kHoldout, static_cast<std::uint64_t>(nb)));
  std::vector<Index> holdout_rows(perm.begin(), perm.begin() + holdout_size);
  std::vector<Index> train_rows(perm.begin() + holdout_size, perm.end());
  std::sort(holdout_rows.begin(), holdout_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const LabeledSet holdout = subset(block, holdout_rows);
  const LabeledSet train = subset(block, train_rows);

  double best_lambda = grid[0];
  double best_error = std::numeric_limits<double>::infinity();
  for (double candidate : grid) {
    if (!(candidate > 0.0)) throw ParameterError("lambda grid values must be positive");
    const FitResult fit = variant == Variant::Rkn ? fit_rkn(train, candidate, k)
                                                  : fit_bcrkn(train, candidate, k);
    const double err = holdout_mean_square(fit.model, holdout);
    if (err < best_error) {
      best_error = err;
      best_lambda = candidate;
    }
  }
  return std::pow(best_lambda, exponent);
}

ProblemTarget problem_target(const ExperimentConfig& cfg) {
  cfg.validate();
  ProblemTarget out;
  if (cfg.problem == ExperimentConfig::Problem::PaperSim) {
    out.f_star = [](const Point& x) { return paper_target(x(0)); };
    if (cfg.compute_rkhs_error) out.expansion = paper_target_expansion();
    return out;
  }
  const Points grid = uniform_grid_1d(cfg.kernel.domain(), cfg.synthetic.spectrum_grid);
  const EmpiricalSpectrum spectrum = empirical_spectrum(cfg.kernel, grid);
  RegularitySpec reg;
  reg.r = cfg.synthetic.r;
  reg.u_star = named_function(cfg.synthetic.u_star, cfg.kernel.domain());
  const SynthesizedTarget target = synthesize_target(spectrum, reg);
  out.f_star = [target](const Point& x) { return target(x); };
  if (cfg.compute_rkhs_error) out.expansion = target.to_model();
  return out;
}

LabeledSet problem_data(const ExperimentConfig& cfg, Index n, std::uint64_t seed) {
  if (cfg.problem == ExperimentConfig::Problem::PaperSim) {
    return generate_paper_data(n, seed);
  }
  const ProblemTarget target = problem_target(cfg);
  LabeledSet out;
  out.domain = cfg.kernel.domain();
  out.inputs = rng::uniform_points(out.domain, n, seed, rng::kInputs);
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.labels(i) = target.f_star(out.inputs.row(i)) +
                    cfg.synthetic.noise_sd *
                        rng::gaussian(seed, rng::kNoise, static_cast<std::uint64_t>(i));
  }
  return out;
}

std::vector<ResultRow> run_comparison(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  const ProblemTarget target = problem_target(cfg);
  const Quadrature quadrature = cfg.kernel.domain().dim() == 1
                                    ? Quadrature::uniform(cfg.quadrature_size)
                                    : Quadrature::monte_carlo(cfg.quadrature_size, 0);

  std::vector<LabeledSet> data_per_seed(cfg.seeds.size());
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    data_per_seed[s] = problem_data(cfg, cfg.n_total, cfg.seeds[s]);
  }

  std::vector<double> tuning_grid;
  if (cfg.lambda_rule.kind == LambdaRule::Kind::LocalTuned) {
    tuning_grid = cfg.lambda_rule.grid();
  }

  std::vector<Cell> cells;
  cells.reserve(cfg.seeds.size() * cfg.m_list.size() * cfg.variants.size());
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    for (int m : cfg.m_list) {
      for (Variant variant : cfg.variants) {
        cells.push_back(Cell{s, m, variant});
      }
    }
  }

  std::vector<ResultRow> rows(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    const std::uint64_t seed = cfg.seeds[cell.seed_index];
    const LabeledSet& data = data_per_seed[cell.seed_index];
    ResultRow& row = rows[ci];
    row.seed = seed;
    row.m = cell.m;
    row.variant = cell.variant;
    row.lambda_used = std::numeric_limits<double>::quiet_NaN();
    row.mse = std::numeric_limits<double>::quiet_NaN();
    const auto started = std::chrono::steady_clock::now();
    try {
      const Partition part = partition(
          data, cell.m, rng::bits(seed, rng::kPartition, static_cast<std::uint64_t>(cell.m)));
      double lambda = 0.0;
      switch (cfg.lambda_rule.kind) {
        case LambdaRule::Kind::Fixed:
          lambda = cfg.lambda_rule.value;
          break;
        case LambdaRule::Kind::Power:
          lambda = lambda_from_power(cfg.n_total, cfg.lambda_rule.theta);
          break;
        case LambdaRule::Kind::LocalTuned:
          lambda = tune_local_then_underregularize(
              subset(data, part.blocks.front()), cfg.n_total, tuning_grid,
              cfg.lambda_rule.holdout_fraction, seed, cell.variant, cfg.kernel);
          break;
      }
      row.lambda_used = lambda;
      const AveragedModel average =
          fit_distributed(data, part, lambda, cfg.kernel, cell.variant, 1);
      const double err = l2_error(average, target.f_star, quadrature);
      row.mse = err * err;
      if (cfg.compute_rkhs_error && target.expansion) {
        row.rkhs_error = rkhs_distance(combined_expansion(average), *target.expansion);
      }
    } catch (const Error& e) {
      row.failure = e.what();
    }
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - started)
                      .count();
  });

  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    if (a.m != b.m) return a.m < b.m;
    return static_cast<int>(a.variant) < static_cast<int>(b.variant);
  });
  return rows;
}

double estimate_rate(std::span<const long long> n_list, std::span<const double> mse_per_n) {
  if (n_list.size() != mse_per_n.size()) {
    throw ParameterError("estimate_rate: length mismatch");
  }
  if (n_list.size() < 3) throw ParameterError("estimate_rate needs at least 3 sample sizes");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1 || (i > 0 && n_list[i] <= n_list[i - 1])) {
      throw ParameterError("sample sizes must be positive and increasing");
    }
    if (!(mse_per_n[i] > 0.0)) throw ParameterError("mse values must be positive");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto g = static_cast<double>(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const double x = std::log(static_cast<double>(n_list[i]));
    const double y = std::log(mse_per_n[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (g * sxy - sx * sy) / (g * sxx - sx * sx);
}

void write_csv(std::ostream& os, const ExperimentConfig& cfg, std::span<const ResultRow> rows) {
  os << "# kernet-results v1\n";
  for (const auto& [key, value] : echo_config(cfg)) {
    os << "# " << key << '=' << value << '\n';
  }

  // Complexity report for the configured kernel, pinned to a deterministic
  // reference lambda so reruns stay byte-identical.
  const Index report_grid = cfg.problem == ExperimentConfig::Problem::Synthetic
                                ? cfg.synthetic.spectrum_grid
                                : 1024;
  const double report_lambda = cfg.lambda_rule.kind == LambdaRule::Kind::Fixed
                                   ? cfg.lambda_rule.value
                                   : lambda_from_power(cfg.n_total,
                                                       cfg.lambda_rule.kind ==
                                                               LambdaRule::Kind::Power
                                                           ? cfg.lambda_rule.theta
                                                           : 2.0 / 3.0);
  if (cfg.kernel.domain().dim() == 1) {
    const EmpiricalSpectrum spectrum =
        empirical_spectrum(cfg.kernel, uniform_grid_1d(cfg.kernel.domain(), report_grid));
    const double n_eff = effective_dimension(spectrum, report_lambda);
    const double bound =
        bound_quantity(cfg.n_total, report_lambda, n_eff, cfg.kernel.kappa());
    Vector capacity_grid(20);
    for (Index i = 0; i < 20; ++i) {
      capacity_grid(i) = std::pow(10.0, -4.0 + 3.0 * static_cast<double>(i) / 19.0);
    }
    const CapacityEstimate capacity = fit_capacity(spectrum, capacity_grid);
    os << "# diagnostics.spectrum_grid=" << report_grid << '\n';
    os << "# diagnostics.kappa=" << format_g17(cfg.kernel.kappa()) << '\n';
    os << "# diagnostics.top_eigenvalue=" << format_g17(spectrum.eigenvalues(0)) << '\n';
    os << "# diagnostics.lambda=" << format_g17(report_lambda) << '\n';
    os << "# diagnostics.effective_dimension=" << format_g17(n_eff) << '\n';
    os << "# diagnostics.bound=" << format_g17(bound) << '\n';
    os << "# diagnostics.capacity_beta=" << format_g17(capacity.beta) << '\n';
    os << "# diagnostics.capacity_c0=" << format_g17(capacity.c0) << '\n';
  }

  for (const auto& row : rows) {
    if (!row.failure.empty()) {
      os << "# failed seed=" << row.seed << " m=" << row.m << " variant="
         << to_string(row.variant) << " reason=" << row.failure << '\n';
    }
  }

  os << "seed,m,variant,lambda_used,mse,rkhs_error,wall_ms\n";
  for (const auto& row : rows) {
    os << row.seed << ',' << row.m << ',' << to_string(row.variant) << ','
       << format_g17(row.lambda_used) << ',' << format_g17(row.mse) << ',';
    if (row.rkhs_error) os << format_g17(*row.rkhs_error);
    // wall_ms is zeroed so identical configurations produce identical bytes.
    os << ',' << 0 << '\n';
  }
}

std::function<double(const Point&)> named_function(const std::string& name, const Box& box) {
  if (box.dim() != 1) throw ParameterError("named functions are one-dimensional");
  const double lo = box.lo(0);
  const double span = box.hi(0) - box.lo(0);
  auto unit = [lo, span](const Point& x) { return (x(0) - lo) / span; };
  if (name == "sin") {
    return [unit](const Point& x) { return std::sin(std::numbers::pi * unit(x)); };
  }
  if (name == "cos") {
    return [unit](const Point& x) { return std::cos(std::numbers::pi * unit(x)); };
  }
  if (name == "kink") {
    return [unit](const Point& x) { return std::min(unit(x), 1.0 - unit(x)); };
  }
  if (name == "linear") {
    return [unit](const Point& x) { return unit(x); };
  }
  throw ParameterError("unknown named function: " + name);
}

}  // namespace kernet
