#include "kernet/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "kernet/distributed.hpp"
#include "kernet/rng.hpp"

namespace kernet {

namespace {

constexpr double kEigenvalueFloorRatio = 1e-14;

EmpiricalSpectrum decompose(Matrix normalized, Points grid, std::optional<KernelSpec> kernel) {
  const Index n = normalized.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normalized);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of normalized gram failed");
  }
  const double tol = 1e-10 * std::max(1.0, normalized.trace());
  EmpiricalSpectrum out;
  out.grid = std::move(grid);
  out.kernel = std::move(kernel);
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  // The solver returns eigenvalues in increasing order; store them nonincreasing.
  for (Index i = 0; i < n; ++i) {
    const double value = eig.eigenvalues()(n - 1 - i);
    if (value < -tol) {
      throw NumericalError("normalized gram has an eigenvalue below the psd tolerance");
    }
    out.eigenvalues(i) = std::max(value, 0.0);
    out.eigenvectors.col(i) = eig.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Points uniform_grid(const Box& box, Index g) {
  Points grid(g, 1);
  const double lo = box.lo(0);
  const double hi = box.hi(0);
  for (Index i = 0; i < g; ++i) {
    grid(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(g - 1);
  }
  return grid;
}

}  // namespace

EmpiricalSpectrum empirical_spectrum(const KernelSpec& k, const Points& grid) {
  if (grid.rows() == 0) throw ParameterError("empirical_spectrum: empty grid");
  Matrix normalized = gram(k, grid) / static_cast<double>(grid.rows());
  return decompose(std::move(normalized), grid, k);
}

EmpiricalSpectrum empirical_spectrum(const Matrix& gram_matrix, const Points& grid) {
  if (gram_matrix.rows() == 0) throw ParameterError("empirical_spectrum: empty gram matrix");
  if (gram_matrix.rows() != gram_matrix.cols()) {
    throw ParameterError("empirical_spectrum: gram matrix must be square");
  }
  if (grid.rows() != gram_matrix.rows()) {
    throw ParameterError("empirical_spectrum: grid size does not match gram matrix");
  }
  Matrix normalized = gram_matrix / static_cast<double>(gram_matrix.rows());
  return decompose(std::move(normalized), grid, std::nullopt);
}

double effective_dimension(const EmpiricalSpectrum& s, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  double total = 0.0;
  for (Index i = 0; i < s.eigenvalues.size(); ++i) {
    total += s.eigenvalues(i) / (s.eigenvalues(i) + lambda);
  }
  return total;
}

double bound_quantity(long long n, double lambda, double n_eff, double kappa) {
  if (n < 1) throw ParameterError("sample size must be positive");
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  if (!(n_eff >= 0.0)) throw ParameterError("effective dimension must be nonnegative");
  if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
  const auto nd = static_cast<double>(n);
  return (2.0 * kappa / std::sqrt(nd)) *
         (kappa / std::sqrt(nd * lambda) + std::sqrt(n_eff));
}

void CapacityEstimate::validate() const {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("capacity exponent out of range");
  if (!(c0 > 0.0)) throw ParameterError("capacity constant must be positive");
  for (Index i = 0; i < lambdas.size(); ++i) {
    if (n_values(i) > c0 * std::pow(lambdas(i), -beta) * (1.0 + kCapacityFitSlack)) {
      throw ParameterError("capacity bound violated on its own grid");
    }
  }
}

CapacityEstimate fit_capacity(const EmpiricalSpectrum& s, const Vector& lambda_grid) {
  const Index g = lambda_grid.size();
  if (g < 3) throw ParameterError("capacity grid needs at least 3 points");
  double lo = lambda_grid.minCoeff();
  double hi = lambda_grid.maxCoeff();
  if (!(lo > 0.0)) throw ParameterError("capacity grid values must be positive");
  if (hi / lo < 100.0 * (1.0 - 1e-12)) {
    throw ParameterError("capacity grid must span at least two decades");
  }

  CapacityEstimate out;
  out.lambdas = lambda_grid;
  out.n_values.resize(g);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (Index i = 0; i < g; ++i) {
    out.n_values(i) = effective_dimension(s, lambda_grid(i));
    if (!(out.n_values(i) > 0.0)) {
      throw ParameterError("effective dimension vanishes on the capacity grid");
    }
    const double x = std::log(lambda_grid(i));
    const double y = std::log(out.n_values(i));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto gd = static_cast<double>(g);
  const double slope = (gd * sxy - sx * sy) / (gd * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / gd;
  out.beta = std::min(std::max(-slope, 1e-12), 1.0);
  out.c0 = std::exp(intercept);
  for (Index i = 0; i < g; ++i) {
    out.c0 = std::max(out.c0, out.n_values(i) * std::pow(lambda_grid(i), out.beta));
  }
  out.validate();
  return out;
}

double SynthesizedTarget::operator()(const Point& x) const {
  return cross_gram(kernel, x, grid).row(0).dot(weights);
}

Vector SynthesizedTarget::at(const Points& points) const {
  return predict(to_model(), points);
}

KernelModel SynthesizedTarget::to_model() const {
  return KernelModel{kernel, grid, weights, 0.0, Variant::Rkn};
}

SynthesizedTarget synthesize_target(const EmpiricalSpectrum& s, const RegularitySpec& spec) {
  if (!(spec.r > 0.0)) throw ParameterError("regularity exponent must be positive");
  if (!s.kernel) {
    throw ParameterError("synthesize_target needs a spectrum built from a kernel");
  }
  const Index g = s.size();
  const auto gd = static_cast<double>(g);

  // Eigenbasis coefficients of u*: either given directly or projected from
  // grid values of the function.
  Vector a(g);
  if (spec.u_coefficients) {
    if (spec.u_coefficients->size() != g) {
      throw ParameterError("u* coefficient vector length does not match the spectrum");
    }
    a = *spec.u_coefficients;
  } else {
    if (!spec.u_star) throw ParameterError("u* is missing");
    Vector u(g);
    for (Index i = 0; i < g; ++i) u(i) = spec.u_star(s.grid.row(i));
    a = s.eigenvectors.transpose() * u / std::sqrt(gd);
  }

  const double floor_value = kEigenvalueFloorRatio * s.eigenvalues(0);
  Vector scaled_for_weights(g);   // tau^(r-1) a
  Vector scaled_for_values(g);    // tau^r a
  double proxy_sq = 0.0;
  for (Index i = 0; i < g; ++i) {
    const double tau = s.eigenvalues(i);
    if (tau <= floor_value) {
      scaled_for_weights(i) = 0.0;
      scaled_for_values(i) = 0.0;
      continue;
    }
    scaled_for_weights(i) = std::pow(tau, spec.r - 1.0) * a(i);
    scaled_for_values(i) = std::pow(tau, spec.r) * a(i);
    proxy_sq += std::pow(tau, 2.0 * spec.r - 1.0) * a(i) * a(i);
  }

  SynthesizedTarget out{*s.kernel, s.grid, Vector(), Vector(), spec.r, std::sqrt(proxy_sq)};
  out.weights = s.eigenvectors * scaled_for_weights / gd * std::sqrt(gd);
  out.grid_values = s.eigenvectors * scaled_for_values * std::sqrt(gd);
  return out;
}

double l2_error(const std::function<Vector(const Points&)>& f_hat,
                const std::function<double(const Point&)>& f_star, const Quadrature& quadrature,
                const Box& box) {
  if (!f_hat || !f_star) throw ParameterError("l2_error: missing function");
  if (quadrature.size < 2) throw ParameterError("quadrature needs at least 2 points");
  box.validate();

  Points points;
  if (quadrature.kind == Quadrature::Kind::UniformGrid) {
    if (box.dim() != 1) {
      throw ParameterError("uniform-grid quadrature needs a one-dimensional domain");
    }
    points = uniform_grid(box, quadrature.size);
  } else {
    points = rng::uniform_points(box, quadrature.size, quadrature.seed, rng::kMonteCarlo);
  }

  const Vector predicted = f_hat(points);
  if (predicted.size() != points.rows()) {
    throw ParameterError("l2_error: prediction length mismatch");
  }
  double mean_sq = 0.0;
  if (quadrature.kind == Quadrature::Kind::UniformGrid) {
    const auto g = static_cast<double>(quadrature.size);
    for (Index i = 0; i < points.rows(); ++i) {
      const double d = predicted(i) - f_star(points.row(i));
      const double w = (i == 0 || i == points.rows() - 1) ? 0.5 : 1.0;
      mean_sq += w * d * d;
    }
    mean_sq /= (g - 1.0);
  } else {
    for (Index i = 0; i < points.rows(); ++i) {
      const double d = predicted(i) - f_star(points.row(i));
      mean_sq += d * d;
    }
    mean_sq /= static_cast<double>(quadrature.size);
  }
  return std::sqrt(mean_sq);
}

double l2_error(const KernelModel& model, const std::function<double(const Point&)>& f_star,
                const Quadrature& quadrature) {
  return l2_error([&](const Points& pts) { return predict(model, pts); }, f_star, quadrature,
                  model.kernel.domain());
}

double l2_error(const AveragedModel& average, const std::function<double(const Point&)>& f_star,
                const Quadrature& quadrature) {
  average.validate();
  return l2_error([&](const Points& pts) { return predict_averaged(average, pts); }, f_star,
                  quadrature, average.blocks.front().model.kernel.domain());
}

}  // namespace kernet
