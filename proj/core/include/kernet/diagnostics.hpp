#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "kernet/estimator.hpp"
#include "kernet/kernel.hpp"

namespace kernet {

/// Eigendecomposition of gram(grid)/|grid|, the sample version of the kernel
/// integral operator. Eigenvalues are nonincreasing and clamped at zero;
/// column i of eigenvectors pairs with eigenvalues[i].
struct EmpiricalSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;
  Points grid;
  std::optional<KernelSpec> kernel;  // present when built from a KernelSpec

  Index size() const { return eigenvalues.size(); }
};

EmpiricalSpectrum empirical_spectrum(const KernelSpec& k, const Points& grid);

/// Same decomposition from a precomputed gram matrix (divided by its size
/// internally). No kernel is attached, so Nystroem extension is unavailable.
EmpiricalSpectrum empirical_spectrum(const Matrix& gram_matrix, const Points& grid);

/// Effective dimension sum_i tau_i / (tau_i + lambda).
double effective_dimension(const EmpiricalSpectrum& s, double lambda);

/// (2 kappa / sqrt(n)) * (kappa / sqrt(n lambda) + sqrt(n_eff)).
double bound_quantity(long long n, double lambda, double n_eff, double kappa);

/// Slack allowed when checking the capacity bound on its own grid.
inline constexpr double kCapacityFitSlack = 1e-9;

/// Power-law envelope for the effective dimension: n_eff(lambda) <= c0 * lambda^(-beta).
struct CapacityEstimate {
  double beta = 0.0;
  double c0 = 0.0;
  Vector lambdas;
  Vector n_values;

  void validate() const;
};

/// Log-log least squares of effective dimension against lambda. The grid
/// needs at least 3 points spanning at least two decades.
CapacityEstimate fit_capacity(const EmpiricalSpectrum& s, const Vector& lambda_grid);

/// Smoothness description of a synthetic target: f* is the r-th power of the
/// integral operator applied to u*. u* is given either as a function or as
/// its coefficient vector in the empirical eigenbasis.
struct RegularitySpec {
  double r = 0.0;
  std::function<double(const Point&)> u_star;
  std::optional<Vector> u_coefficients;
};

/// Target built from an empirical spectrum: a kernel expansion over the grid
/// whose eigenbasis coefficients are tau_i^r a_i. Eigenvalues below
/// 1e-14 * tau_1 are dropped from every r-power. Callable anywhere on the
/// domain through the expansion (Nystroem extension).
struct SynthesizedTarget {
  KernelSpec kernel;
  Points grid;
  Vector weights;         // f*(x) = sum_k weights[k] K(grid_k, x)
  Vector grid_values;     // f* at the grid points
  double r = 0.0;
  double rkhs_norm_proxy = 0.0;  // sqrt(sum tau_i^(2r-1) a_i^2)

  double operator()(const Point& x) const;
  Vector at(const Points& points) const;
  KernelModel to_model() const;
};

SynthesizedTarget synthesize_target(const EmpiricalSpectrum& s, const RegularitySpec& spec);

/// Quadrature rule for L2(rho_X) errors; rho_X is uniform on the domain box.
struct Quadrature {
  enum class Kind { UniformGrid, MonteCarlo };
  Kind kind = Kind::UniformGrid;
  Index size = 10001;
  std::uint64_t seed = 0;  // monte-carlo only

  static Quadrature uniform(Index g) { return {Kind::UniformGrid, g, 0}; }
  static Quadrature monte_carlo(Index g, std::uint64_t seed) {
    return {Kind::MonteCarlo, g, seed};
  }
};

/// sqrt of the quadrature approximation of the mean squared difference.
/// The uniform-grid rule is trapezoid and needs a one-dimensional box.
double l2_error(const std::function<Vector(const Points&)>& f_hat,
                const std::function<double(const Point&)>& f_star, const Quadrature& quadrature,
                const Box& box);
double l2_error(const KernelModel& model, const std::function<double(const Point&)>& f_star,
                const Quadrature& quadrature);

struct AveragedModel;
double l2_error(const AveragedModel& average, const std::function<double(const Point&)>& f_star,
                const Quadrature& quadrature);

}  // namespace kernet
