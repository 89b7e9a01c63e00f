#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kernet/diagnostics.hpp"
#include "kernet/distributed.hpp"

namespace kernet {

/// How the regularization parameter is chosen for each cell.
struct LambdaRule {
  enum class Kind { Fixed, Power, LocalTuned };
  Kind kind = Kind::Power;

  double value = 0.0;        // fixed
  double theta = 2.0 / 3.0;  // power: lambda = n^(-theta)

  // local_tuned: log-spaced candidate grid and holdout share
  double grid_min = 1e-6;
  double grid_max = 1.0;
  int grid_size = 25;
  double holdout_fraction = 0.2;

  std::vector<double> grid() const;
};

/// Synthetic problem: target synthesized from the empirical spectrum so the
/// smoothness parameter r is known exactly.
struct SyntheticProblem {
  double r = 1.0;
  std::string u_star = "sin";
  double noise_sd = 0.1;
  int spectrum_grid = 256;
};

struct ExperimentConfig {
  enum class Problem { PaperSim, Synthetic };

  Problem problem = Problem::PaperSim;
  SyntheticProblem synthetic;
  KernelSpec kernel = KernelSpec::brownian_plus_one();
  int n_total = 4096;
  std::vector<int> m_list = {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  LambdaRule lambda_rule;
  std::vector<Variant> variants = {Variant::Rkn, Variant::Bcrkn};
  std::vector<std::uint64_t> seeds = {1};
  Index quadrature_size = 10001;
  bool compute_rkhs_error = false;
  std::string output_path;

  void validate() const;
};

/// One experiment cell. wall_ms is measured but written as zero in CSV
/// output, which keeps byte-identical reruns possible. A nonempty `failure`
/// marks a cell whose fit failed; its mse is NaN.
struct ResultRow {
  std::uint64_t seed = 0;
  int m = 0;
  Variant variant = Variant::Rkn;
  double lambda_used = 0.0;
  double mse = 0.0;
  std::optional<double> rkhs_error;
  std::int64_t wall_ms = 0;
  std::string failure;
};

/// min(x, 1-x), the simulation target.
double paper_target(double x);

inline constexpr double kPaperNoiseSd = 0.44721359549995793;  // sqrt(1/5)

/// n uniform inputs on [0,1] with labels min(x,1-x) + noise_sd * N(0,1).
LabeledSet generate_paper_data(Index n, std::uint64_t seed, double noise_sd = kPaperNoiseSd);

/// n^(-theta).
double lambda_from_power(long long n, double theta);

/// Picks the lambda from `grid` with the smallest holdout squared error on
/// the block, then raises it to log(n_total)/log(|block|). A single-element
/// grid skips the search entirely.
double tune_local_then_underregularize(const LabeledSet& block, long long n_total,
                                       std::span<const double> grid, double holdout_fraction,
                                       std::uint64_t seed, Variant variant, const KernelSpec& k);

/// Runs every (seed, m, variant) cell and returns rows sorted by that tuple.
/// Cells are independent; `threads` changes speed only, never values.
std::vector<ResultRow> run_comparison(const ExperimentConfig& cfg, int threads = 1);

/// Least-squares slope of log(mse) against log(n).
double estimate_rate(std::span<const long long> n_list, std::span<const double> mse_per_n);

/// Writes the pinned CSV: comment header (config echo, diagnostics report,
/// failures), column row, then one line per result at 17 significant digits.
void write_csv(std::ostream& os, const ExperimentConfig& cfg, std::span<const ResultRow> rows);

/// Named target/u* functions usable in configs: sin, cos, kink, linear.
/// Each maps the box coordinate to [0,1] first.
std::function<double(const Point&)> named_function(const std::string& name, const Box& box);

/// The problem's true target and, when representable, its kernel expansion.
struct ProblemTarget {
  std::function<double(const Point&)> f_star;
  std::optional<KernelModel> expansion;
};

/// Resolves the configured problem: data generator plus target description.
ProblemTarget problem_target(const ExperimentConfig& cfg);
LabeledSet problem_data(const ExperimentConfig& cfg, Index n, std::uint64_t seed);

}  // namespace kernet
