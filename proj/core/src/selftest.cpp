#include "kernet/selftest.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "kernet/config.hpp"
#include "kernet/diagnostics.hpp"
#include "kernet/distributed.hpp"
#include "kernet/experiment.hpp"
#include "kernet/rng.hpp"

namespace kernet::selftest {

namespace {

struct Suite {
  std::ostream& os;
  bool all_passed = true;

  void check(const char* name, const std::function<void(std::string&)>& body) {
    std::string detail;
    bool ok = true;
    try {
      body(detail);
      ok = detail.empty();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    if (ok) {
      os << "PASS " << name << "\n";
    } else {
      os << "FAIL " << name << ": " << detail << "\n";
      all_passed = false;
    }
  }
};

Points random_points(const Box& box, Index n, std::uint64_t seed) {
  return rng::uniform_points(box, n, seed, rng::kInputs);
}

void expect(std::string& detail, bool condition, const std::string& message) {
  if (!condition && detail.empty()) detail = message;
}

void expect_near(std::string& detail, double actual, double wanted, double tol,
                 const std::string& what) {
  if (!(std::abs(actual - wanted) <= tol) && detail.empty()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": got " << actual << ", wanted " << wanted << " +- " << tol;
    detail = msg.str();
  }
}

std::vector<KernelSpec> test_kernels() {
  Box box;
  box.lo = Eigen::RowVectorXd::Constant(1, -1.0);
  box.hi = Eigen::RowVectorXd::Constant(1, 2.0);
  return {KernelSpec::brownian_plus_one(), KernelSpec::gaussian(0.5, box),
          KernelSpec::polynomial(3, 1.0, box)};
}

}  // namespace

bool run(std::ostream& os) {
  Suite suite{os};

  suite.check("kernel symmetry is exact", [](std::string& detail) {
    for (const KernelSpec& k : test_kernels()) {
      const Points pts = random_points(k.domain(), 200, 11);
      for (Index i = 0; i + 1 < pts.rows(); i += 2) {
        const double ab = eval(k, pts.row(i), pts.row(i + 1));
        const double ba = eval(k, pts.row(i + 1), pts.row(i));
        expect(detail, ab == ba, "eval(x,t) != eval(t,x) for " + to_string(k.family()));
      }
    }
  });

  suite.check("gram matrices are positive semidefinite", [](std::string& detail) {
    for (const KernelSpec& k : test_kernels()) {
      const Points pts = random_points(k.domain(), 120, 12);
      const Matrix K = gram(k, pts);
      expect(detail, K == K.transpose(), "gram not exactly symmetric");
      const double max_diag = K.diagonal().maxCoeff();
      expect(detail, max_diag <= k.kappa() * k.kappa() + 1e-12,
             "diagonal exceeds kappa^2 for " + to_string(k.family()));
      Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
      expect(detail, eig.info() == Eigen::Success, "eigensolver failed");
      expect(detail, eig.eigenvalues().minCoeff() >= -psd_tolerance(k, pts.rows()),
             "gram eigenvalue below psd tolerance for " + to_string(k.family()));
    }
  });

  suite.check("cross_gram transposes exactly", [](std::string& detail) {
    for (const KernelSpec& k : test_kernels()) {
      const Points a = random_points(k.domain(), 40, 13);
      const Points b = random_points(k.domain(), 23, 14);
      const Matrix ab = cross_gram(k, a, b);
      const Matrix ba = cross_gram(k, b, a);
      expect(detail, ab == ba.transpose(), "cross_gram transpose mismatch");
    }
  });

  suite.check("bias corrected coefficients match the spectral path", [](std::string& detail) {
    const KernelSpec k = KernelSpec::brownian_plus_one();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const LabeledSet data = generate_paper_data(60, seed);
      const double lambda = 0.01 * static_cast<double>(seed);
      const FitResult fit = fit_bcrkn(data, lambda, k);
      const Vector direct = predict(fit.model, data.inputs);
      const Vector oracle = bcrkn_operator_oracle(data, lambda, k);
      const double rel = (direct - oracle).norm() / oracle.norm();
      expect_near(detail, rel, 0.0, 1e-8, "coefficient path vs spectral path");
    }
  });

  suite.check("solves are exactly linear in power-of-two label scaling",
              [](std::string& detail) {
                const KernelSpec k = KernelSpec::brownian_plus_one();
                LabeledSet data = generate_paper_data(50, 21);
                const FitResult base = fit_rkn(data, 0.01, k);
                data.labels *= 2.0;
                const FitResult doubled = fit_rkn(data, 0.01, k);
                expect(detail,
                       doubled.model.coefficients == 2.0 * base.model.coefficients,
                       "coefficients not exactly doubled");
              });

  suite.check("one-block distributed fit collapses to the single fit",
              [](std::string& detail) {
                const KernelSpec k = KernelSpec::brownian_plus_one();
                const LabeledSet data = generate_paper_data(64, 3);
                const Points test = random_points(k.domain(), 200, 4);
                for (Variant variant : {Variant::Rkn, Variant::Bcrkn}) {
                  const Partition part = partition(data, 1, 99);
                  const AveragedModel avg = fit_distributed(data, part, 0.01, k, variant);
                  const FitResult single = variant == Variant::Rkn
                                               ? fit_rkn(data, 0.01, k)
                                               : fit_bcrkn(data, 0.01, k);
                  const double diff =
                      (predict_averaged(avg, test) - predict(single.model, test))
                          .cwiseAbs()
                          .maxCoeff();
                  expect_near(detail, diff, 0.0, 1e-12, "m=1 collapse");
                }
              });

  suite.check("semi-supervised augmentation scales labels by the size ratio",
              [](std::string& detail) {
                LabeledSet data;
                data.domain = Box::unit_interval();
                data.inputs.resize(2, 1);
                data.inputs << 0.25, 0.75;
                data.labels.resize(2);
                data.labels << 1.0, 2.0;
                Points unlabeled(2, 1);
                unlabeled << 0.1, 0.9;
                const LabeledSet augmented = semi_supervised_augment(data, unlabeled);
                expect(detail, augmented.size() == 4, "augmented size");
                expect(detail,
                       augmented.labels(0) == 2.0 && augmented.labels(1) == 4.0 &&
                           augmented.labels(2) == 0.0 && augmented.labels(3) == 0.0,
                       "label scaling");
                const LabeledSet same = semi_supervised_augment(data, Points(0, 1));
                expect(detail,
                       same.inputs == data.inputs && same.labels == data.labels,
                       "no unlabeled points must reproduce the set");
              });

  suite.check("effective dimension of an identity gram is n/(1+n lambda)",
              [](std::string& detail) {
                const Index n = 4;
                const EmpiricalSpectrum s =
                    empirical_spectrum(Matrix::Identity(n, n),
                                       random_points(Box::unit_interval(), n, 5));
                expect_near(detail, effective_dimension(s, 0.25), 2.0, 1e-12,
                            "closed form at lambda=1/4");
              });

  suite.check("block-count bound matches hand-computed values", [](std::string& detail) {
    expect(detail, m_bound(4096, 1.0, 0.5) == 27, "(4096, r=1, beta=1/2)");
    expect(detail, m_bound(4096, 0.5, 0.5) == 1, "(4096, r=1/2, beta=1/2)");
    expect(detail, m_bound(4096, 2.0, 1.0) == 27, "(4096, r=2, beta=1)");
  });

  suite.check("data generation is reproducible and thread count changes nothing",
              [](std::string& detail) {
                const LabeledSet a = generate_paper_data(500, 77);
                const LabeledSet b = generate_paper_data(500, 77);
                expect(detail, a.inputs == b.inputs && a.labels == b.labels,
                       "same seed must give identical data");
                ExperimentConfig cfg;
                cfg.n_total = 128;
                cfg.m_list = {2, 4};
                cfg.seeds = {1, 2};
                cfg.quadrature_size = 501;
                const auto rows1 = run_comparison(cfg, 1);
                const auto rows4 = run_comparison(cfg, 4);
                expect(detail, rows1.size() == rows4.size(), "row count mismatch");
                for (std::size_t i = 0; i < rows1.size(); ++i) {
                  expect(detail,
                         rows1[i].mse == rows4[i].mse &&
                             rows1[i].lambda_used == rows4[i].lambda_used,
                         "rows differ across thread counts");
                }
              });

  suite.check("norms match hand-computed expansions", [](std::string& detail) {
    const KernelSpec k = KernelSpec::brownian_plus_one();
    Points anchor(1, 1);
    anchor << 0.5;
    Vector coeff(1);
    coeff << 1.0;
    const KernelModel one{k, anchor, coeff, 0.5, Variant::Rkn};
    expect_near(detail, rkhs_norm(one), std::sqrt(1.5), 1e-15, "single-anchor norm");
    Vector half(1);
    half << 0.5;
    const KernelModel scaled{k, anchor, half, 0.5, Variant::Rkn};
    expect_near(detail, rkhs_distance(one, scaled), 0.5 * std::sqrt(1.5), 1e-15,
                "distance of scaled expansions");
  });

  suite.check("interpolating the simulation target reproduces unit norm",
              [](std::string& detail) {
                const KernelSpec k = KernelSpec::brownian_plus_one();
                LabeledSet nodes;
                nodes.domain = k.domain();
                nodes.inputs.resize(101, 1);
                nodes.labels.resize(101);
                for (Index i = 0; i < 101; ++i) {
                  nodes.inputs(i, 0) = static_cast<double>(i) / 100.0;
                  nodes.labels(i) = paper_target(nodes.inputs(i, 0));
                }
                const KernelModel model = interpolate(nodes, k);
                expect_near(detail, rkhs_norm(model), 1.0, 1e-6, "target norm");
              });

  suite.check("quadrature error of the zero predictor matches the integral",
              [](std::string& detail) {
                const KernelSpec k = KernelSpec::brownian_plus_one();
                const auto zero = [](const Points& pts) {
                  return Vector(Vector::Zero(pts.rows()));
                };
                const double err =
                    l2_error(zero, [](const Point& x) { return paper_target(x(0)); },
                             Quadrature::uniform(10001), k.domain());
                expect_near(detail, err, std::sqrt(1.0 / 12.0), 1e-6,
                            "||min(x,1-x)||_{L2}");
              });

  suite.check("config values survive render and reparse", [](std::string& detail) {
    ExperimentConfig cfg;
    cfg.seeds = {1, 2, 3};
    ConfigMap map;
    for (const auto& [key, value] : echo_config(cfg)) {
      map.apply_override(key + "=" + value);
    }
    const ExperimentConfig round = resolve_experiment(map);
    expect(detail, round.n_total == cfg.n_total && round.seeds == cfg.seeds &&
                       round.m_list == cfg.m_list,
           "config did not round-trip");
    for (const auto& [key, value] : echo_config(round)) {
      ConfigMap probe;
      probe.apply_override(key + "=" + value);
      expect(detail, render_config_value(probe.entries().at(key)) == value,
             "echoed value not canonical: " + key);
    }
  });

  return suite.all_passed;
}

}  // namespace kernet::selftest
