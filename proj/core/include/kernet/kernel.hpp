#pragma once

#include <string>

#include "kernet/types.hpp"

namespace kernet {

enum class KernelFamily { BrownianPlusOne, Gaussian, Polynomial };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Immutable description of a positive semidefinite kernel on a box domain.
/// kappa() is the uniform bound max(1, sup_x sqrt(K(x, x))).
class KernelSpec {
public:
  /// K(x, t) = 1 + min(x, t) on [0, 1].
  static KernelSpec brownian_plus_one();

  /// K(x, t) = exp(-|x - t|^2 / (2 width^2)) on the given box.
  static KernelSpec gaussian(double width, Box domain);

  /// K(x, t) = (<x, t> + offset)^degree on the given box.
  static KernelSpec polynomial(int degree, double offset, Box domain);

  KernelFamily family() const { return family_; }
  const Box& domain() const { return domain_; }
  double kappa() const { return kappa_; }

  double width() const;
  int degree() const;
  double offset() const;

  bool operator==(const KernelSpec& other) const;

private:
  KernelSpec(KernelFamily family, Box domain, double width, int degree, double offset);

  KernelFamily family_;
  Box domain_;
  double width_ = 0.0;
  int degree_ = 0;
  double offset_ = 0.0;
  double kappa_ = 1.0;
};

/// K(x, t); both points must lie in the domain box.
double eval(const KernelSpec& k, const Point& x, const Point& t);

/// Symmetric n x n matrix [K(x_i, x_j)]; X must be non-empty and in-domain.
Matrix gram(const KernelSpec& k, const Points& X);

/// n x m matrix [K(x_i, z_j)]; both sets non-empty and in-domain.
Matrix cross_gram(const KernelSpec& k, const Points& X, const Points& Z);

/// How far below zero an eigenvalue of an n-point gram matrix may fall
/// before it is treated as a numerical failure rather than rounding.
inline double psd_tolerance(const KernelSpec& k, Index n) {
  return 1e-10 * static_cast<double>(n) * k.kappa() * k.kappa();
}

}  // namespace kernet
