#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "kernet/distributed.hpp"
#include "kernet/experiment.hpp"
#include "kernet/rng.hpp"

using namespace kernet;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_total = 96;
  cfg.m_list = {2, 4};
  cfg.seeds = {1, 2};
  cfg.quadrature_size = 501;
  cfg.lambda_rule.kind = LambdaRule::Kind::Power;
  return cfg;
}

std::string csv_of(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_csv(os, cfg, rows);
  return os.str();
}

}  // namespace

TEST_CASE("paper target is the symmetric hat") {
  CHECK(paper_target(0.0) == 0.0);
  CHECK(paper_target(0.25) == 0.25);
  CHECK(paper_target(0.5) == 0.5);
  CHECK(paper_target(0.75) == 0.25);
  CHECK(paper_target(1.0) == 0.0);
}

TEST_CASE("generated data is reproducible with the stated noise") {
  const LabeledSet a = generate_paper_data(500, 13);
  const LabeledSet b = generate_paper_data(500, 13);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  const LabeledSet c = generate_paper_data(500, 14);
  CHECK(a.labels != c.labels);

  const LabeledSet clean = generate_paper_data(200, 5, 0.0);
  for (Index i = 0; i < 200; ++i) {
    CHECK(clean.labels(i) == paper_target(clean.inputs(i, 0)));
  }

  const LabeledSet big = generate_paper_data(100000, 7);
  double sq = 0.0;
  for (Index i = 0; i < big.size(); ++i) {
    const double eps = big.labels(i) - paper_target(big.inputs(i, 0));
    sq += eps * eps;
  }
  CHECK(sq / 100000.0 == doctest::Approx(0.2).epsilon(0.025));
}

TEST_CASE("power rule computes n to the minus theta") {
  CHECK(lambda_from_power(4098, 2.0 / 3.0) ==
        doctest::Approx(0.00390497895142176).epsilon(1e-14));
  CHECK(lambda_from_power(4096, 2.0 / 3.0) == doctest::Approx(0.00390625).epsilon(1e-14));
  CHECK(lambda_from_power(1, 0.7) == 1.0);
  CHECK(lambda_from_power(4096, 0.4) == doctest::Approx(0.035896823593657344).epsilon(1e-14));
  CHECK_THROWS_AS((void)lambda_from_power(0, 0.5), ParameterError);
  CHECK_THROWS_AS((void)lambda_from_power(10, 0.0), ParameterError);
}

TEST_CASE("local tuning underregularizes by the size-ratio exponent") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  LabeledSet block;
  block.domain = Box::unit_interval();
  block.inputs = rng::uniform_points(block.domain, 512, 3, rng::kInputs);
  block.labels.resize(512);
  for (Index i = 0; i < 512; ++i) {
    block.labels(i) = paper_target(block.inputs(i, 0)) +
                      0.447 * rng::gaussian(3, rng::kNoise, static_cast<std::uint64_t>(i));
  }

  const double single[] = {0.01};
  const double pinned =
      tune_local_then_underregularize(block, 4096, single, 0.2, 1, Variant::Rkn, k);
  CHECK(pinned == doctest::Approx(0.0021544346900318837).epsilon(1e-14));

  const double same_size =
      tune_local_then_underregularize(block, 512, single, 0.2, 1, Variant::Rkn, k);
  CHECK(same_size == doctest::Approx(0.01).epsilon(1e-14));

  const std::vector<double> grid = {1e-4, 1e-3, 1e-2, 1e-1};
  const double tuned =
      tune_local_then_underregularize(block, 4096, grid, 0.2, 1, Variant::Rkn, k);
  bool from_grid = false;
  const double exponent = std::log(4096.0) / std::log(512.0);
  for (double g : grid) {
    if (tuned == doctest::Approx(std::pow(g, exponent)).epsilon(1e-12)) from_grid = true;
  }
  CHECK(from_grid);

  CHECK_THROWS_AS((void)tune_local_then_underregularize(block, 4096, std::span<const double>(),
                                                        0.2, 1, Variant::Rkn, k),
                  ParameterError);
  LabeledSet tiny;
  tiny.domain = Box::unit_interval();
  tiny.inputs.resize(2, 1);
  tiny.inputs << 0.2, 0.8;
  tiny.labels.resize(2);
  tiny.labels << 0.1, 0.2;
  CHECK_THROWS_AS(
      (void)tune_local_then_underregularize(tiny, 4096, grid, 0.2, 1, Variant::Rkn, k),
      ParameterError);
}

TEST_CASE("tuning is deterministic in the seed") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet block = generate_paper_data(256, 21);
  const std::vector<double> grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  const double a = tune_local_then_underregularize(block, 4096, grid, 0.2, 9, Variant::Bcrkn, k);
  const double b = tune_local_then_underregularize(block, 4096, grid, 0.2, 9, Variant::Bcrkn, k);
  CHECK(a == b);
}

TEST_CASE("noiseless one-block runs reach near-interpolation error") {
  ExperimentConfig cfg;
  cfg.problem = ExperimentConfig::Problem::Synthetic;
  cfg.synthetic.r = 1.0;
  cfg.synthetic.u_star = "sin";
  cfg.synthetic.noise_sd = 0.0;
  cfg.synthetic.spectrum_grid = 128;
  cfg.n_total = 400;
  cfg.m_list = {1};
  cfg.seeds = {1};
  cfg.quadrature_size = 2001;
  cfg.lambda_rule.kind = LambdaRule::Kind::Fixed;
  cfg.lambda_rule.value = 1e-10;

  const auto rows = run_comparison(cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.failure.empty());
    CHECK(row.mse <= 1e-4);
  }
}

TEST_CASE("noiseless hat-target interpolation through the distributed path") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet clean = generate_paper_data(512, 3, 0.0);
  for (Variant variant : {Variant::Rkn, Variant::Bcrkn}) {
    const AveragedModel avg =
        fit_distributed(clean, partition(clean, 1, 1), 1e-10, k, variant);
    const double err =
        l2_error(avg, [](const Point& x) { return paper_target(x(0)); },
                 Quadrature::uniform(10001));
    CHECK(err * err <= 1e-4);
  }
}

TEST_CASE("variant subsets do not perturb each other") {
  ExperimentConfig both = small_config();
  ExperimentConfig only = small_config();
  only.variants = {Variant::Rkn};
  const auto rows_both = run_comparison(both);
  const auto rows_only = run_comparison(only);
  REQUIRE(rows_only.size() * 2 == rows_both.size());
  std::size_t j = 0;
  for (const auto& row : rows_both) {
    if (row.variant != Variant::Rkn) continue;
    CHECK(row.mse == rows_only[j].mse);
    CHECK(row.lambda_used == rows_only[j].lambda_used);
    CHECK(row.seed == rows_only[j].seed);
    CHECK(row.m == rows_only[j].m);
    ++j;
  }
}

TEST_CASE("rows come back sorted and deterministic across thread counts") {
  const ExperimentConfig cfg = small_config();
  const auto rows1 = run_comparison(cfg, 1);
  const auto rows4 = run_comparison(cfg, 4);
  REQUIRE(rows1.size() == rows4.size());
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    CHECK(rows1[i].mse == rows4[i].mse);
    CHECK(rows1[i].lambda_used == rows4[i].lambda_used);
  }
  for (std::size_t i = 1; i < rows1.size(); ++i) {
    const auto& a = rows1[i - 1];
    const auto& b = rows1[i];
    const bool ordered = a.seed < b.seed || (a.seed == b.seed && a.m < b.m) ||
                         (a.seed == b.seed && a.m == b.m &&
                          static_cast<int>(a.variant) < static_cast<int>(b.variant));
    CHECK(ordered);
  }
  CHECK(csv_of(cfg, rows1) == csv_of(cfg, rows4));
}

TEST_CASE("rate estimation recovers exact power laws") {
  const std::vector<long long> ns = {100, 200, 400, 800, 1600};
  std::vector<double> exact, flat;
  for (long long n : ns) {
    exact.push_back(std::pow(static_cast<double>(n), -0.5));
    flat.push_back(3.25);
  }
  CHECK(estimate_rate(ns, exact) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(estimate_rate(ns, flat) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<long long> two = {100, 200};
  const std::vector<double> two_vals = {1.0, 0.5};
  CHECK_THROWS_AS((void)estimate_rate(two, two_vals), ParameterError);
  const std::vector<long long> unsorted = {100, 50, 200};
  const std::vector<double> three_vals = {1.0, 0.5, 0.25};
  CHECK_THROWS_AS((void)estimate_rate(unsorted, three_vals), ParameterError);
  const std::vector<long long> ok = {100, 200, 400};
  const std::vector<double> nonpos = {1.0, 0.0, 0.25};
  CHECK_THROWS_AS((void)estimate_rate(ok, nonpos), ParameterError);
}

TEST_CASE("csv output pins its format") {
  const ExperimentConfig cfg = small_config();
  const auto rows = run_comparison(cfg);
  const std::string csv = csv_of(cfg, rows);

  CHECK(csv.rfind("# kernet-results v1\n", 0) == 0);
  CHECK(csv.find("\r") == std::string::npos);
  CHECK(csv.find("# experiment.n_total=96\n") != std::string::npos);
  CHECK(csv.find("# lambda.rule=power\n") != std::string::npos);
  CHECK(csv.find("# diagnostics.effective_dimension=") != std::string::npos);
  CHECK(csv.find("seed,m,variant,lambda_used,mse,rkhs_error,wall_ms\n") != std::string::npos);
  CHECK(csv.back() == '\n');

  std::istringstream is(csv);
  std::string line;
  std::size_t data_rows = 0;
  bool in_data = false;
  while (std::getline(is, line)) {
    if (line.rfind("seed,m,", 0) == 0) {
      in_data = true;
      continue;
    }
    if (!in_data || line.empty() || line[0] == '#') continue;
    ++data_rows;
    CHECK(line.substr(line.size() - 2) == ",0");
  }
  CHECK(data_rows == rows.size());
}

TEST_CASE("failed cells are reported in comments and kept out of means") {
  ExperimentConfig cfg = small_config();
  cfg.n_total = 24;
  cfg.m_list = {12};
  cfg.seeds = {1};
  cfg.lambda_rule.kind = LambdaRule::Kind::LocalTuned;
  cfg.lambda_rule.grid_min = 1e-4;
  cfg.lambda_rule.grid_max = 1e-1;
  cfg.lambda_rule.grid_size = 4;

  const auto rows = run_comparison(cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(!row.failure.empty());
    CHECK(std::isnan(row.mse));
  }
  const std::string csv = csv_of(cfg, rows);
  CHECK(csv.find("# failed seed=1 m=12") != std::string::npos);
}

TEST_CASE("rkhs error column fills only when an expansion target exists") {
  ExperimentConfig cfg = small_config();
  cfg.n_total = 64;
  cfg.m_list = {2};
  cfg.seeds = {1};
  cfg.compute_rkhs_error = true;
  const auto rows = run_comparison(cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    REQUIRE(row.rkhs_error.has_value());
    CHECK(*row.rkhs_error > 0.0);
    CHECK(std::isfinite(*row.rkhs_error));
  }
  const double rkn_err = *rows[0].rkhs_error;
  const double bcrkn_err = *rows[1].rkhs_error;
  CHECK(rkn_err != bcrkn_err);
}

TEST_CASE("named synthetic targets stay on the unit scale") {
  const Box unit = Box::unit_interval();
  const auto sin_f = named_function("sin", unit);
  const auto kink = named_function("kink", unit);
  const auto linear = named_function("linear", unit);
  Point x(1);
  x << 0.5;
  CHECK(sin_f(x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kink(x) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(linear(x) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS((void)named_function("mystery", unit), ParameterError);
}
