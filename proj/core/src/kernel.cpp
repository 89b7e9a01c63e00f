#include "kernet/kernel.hpp"

#include <cmath>
#include <utility>

namespace kernet {

namespace {

void check_in_domain(const Box& box, const Point& x, const char* what) {
  if (x.size() != box.dim()) {
    throw DomainError(std::string(what) + ": point dimension does not match kernel domain");
  }
  if (!box.contains(x)) {
    throw DomainError(std::string(what) + ": point outside kernel domain");
  }
}

void check_batch(const Box& box, const Points& pts, const char* what) {
  if (pts.rows() == 0) throw ParameterError(std::string(what) + ": empty point set");
  if (pts.cols() != box.dim()) {
    throw DomainError(std::string(what) + ": point dimension does not match kernel domain");
  }
  if (!box.contains_all(pts)) {
    throw DomainError(std::string(what) + ": point outside kernel domain");
  }
}

double ipow(double base, int exponent) {
  double out = 1.0;
  double b = base;
  int e = exponent;
  while (e > 0) {
    if (e & 1) out *= b;
    b *= b;
    e >>= 1;
  }
  return out;
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::BrownianPlusOne: return "brownian_plus_one";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Polynomial: return "polynomial";
  }
  throw ParameterError("unknown kernel family");
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "brownian_plus_one") return KernelFamily::BrownianPlusOne;
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "polynomial") return KernelFamily::Polynomial;
  throw ParameterError("unknown kernel family: " + name);
}

KernelSpec::KernelSpec(KernelFamily family, Box domain, double width, int degree, double offset)
    : family_(family), domain_(std::move(domain)), width_(width), degree_(degree),
      offset_(offset) {
  domain_.validate();
  switch (family_) {
    case KernelFamily::BrownianPlusOne: {
      if (domain_.dim() != 1 || domain_.lo(0) != 0.0 || domain_.hi(0) != 1.0) {
        throw ParameterError("brownian_plus_one is defined on [0, 1]");
      }
      kappa_ = std::sqrt(2.0);
      break;
    }
    case KernelFamily::Gaussian: {
      if (!(width_ > 0.0)) throw ParameterError("gaussian width must be positive");
      kappa_ = 1.0;
      break;
    }
    case KernelFamily::Polynomial: {
      if (degree_ < 1) throw ParameterError("polynomial degree must be at least 1");
      if (!(offset_ >= 0.0)) throw ParameterError("polynomial offset must be nonnegative");
      double sup_sq = offset_;
      for (Index d = 0; d < domain_.dim(); ++d) {
        sup_sq += std::max(domain_.lo(d) * domain_.lo(d), domain_.hi(d) * domain_.hi(d));
      }
      kappa_ = std::max(1.0, std::sqrt(ipow(sup_sq, degree_)));
      break;
    }
  }
}

KernelSpec KernelSpec::brownian_plus_one() {
  return KernelSpec(KernelFamily::BrownianPlusOne, Box::unit_interval(), 0.0, 0, 0.0);
}

KernelSpec KernelSpec::gaussian(double width, Box domain) {
  return KernelSpec(KernelFamily::Gaussian, std::move(domain), width, 0, 0.0);
}

KernelSpec KernelSpec::polynomial(int degree, double offset, Box domain) {
  return KernelSpec(KernelFamily::Polynomial, std::move(domain), 0.0, degree, offset);
}

double KernelSpec::width() const {
  if (family_ != KernelFamily::Gaussian) throw ParameterError("width is a gaussian parameter");
  return width_;
}

int KernelSpec::degree() const {
  if (family_ != KernelFamily::Polynomial) throw ParameterError("degree is a polynomial parameter");
  return degree_;
}

double KernelSpec::offset() const {
  if (family_ != KernelFamily::Polynomial) throw ParameterError("offset is a polynomial parameter");
  return offset_;
}

bool KernelSpec::operator==(const KernelSpec& other) const {
  return family_ == other.family_ && domain_ == other.domain_ && width_ == other.width_ &&
         degree_ == other.degree_ && offset_ == other.offset_;
}

double eval(const KernelSpec& k, const Point& x, const Point& t) {
  check_in_domain(k.domain(), x, "eval");
  check_in_domain(k.domain(), t, "eval");
  switch (k.family()) {
    case KernelFamily::BrownianPlusOne:
      return 1.0 + std::min(x(0), t(0));
    case KernelFamily::Gaussian: {
      const double d2 = (x - t).squaredNorm();
      return std::exp(-d2 / (2.0 * k.width() * k.width()));
    }
    case KernelFamily::Polynomial:
      return ipow(x.dot(t) + k.offset(), k.degree());
  }
  throw ParameterError("unknown kernel family");
}

// Column-at-a-time evaluation. Each entry is a symmetric function of the two
// points computed the same way regardless of argument position, so
// cross_gram(k, X, Z) is exactly the transpose of cross_gram(k, Z, X) and
// gram(k, X) is exactly symmetric.
Matrix cross_gram(const KernelSpec& k, const Points& X, const Points& Z) {
  check_batch(k.domain(), X, "cross_gram");
  check_batch(k.domain(), Z, "cross_gram");
  const Index n = X.rows();
  const Index m = Z.rows();
  Matrix out(n, m);
  switch (k.family()) {
    case KernelFamily::BrownianPlusOne: {
      const auto x = X.col(0).array();
      for (Index j = 0; j < m; ++j) {
        out.col(j) = 1.0 + x.min(Z(j, 0));
      }
      break;
    }
    case KernelFamily::Gaussian: {
      const double inv = 1.0 / (2.0 * k.width() * k.width());
      for (Index j = 0; j < m; ++j) {
        out.col(j) =
            ((X.rowwise() - Z.row(j)).rowwise().squaredNorm().array() * -inv).exp();
      }
      break;
    }
    case KernelFamily::Polynomial: {
      const int deg = k.degree();
      for (Index j = 0; j < m; ++j) {
        Vector base = X * Z.row(j).transpose();
        base.array() += k.offset();
        out.col(j) = base.unaryExpr([deg](double v) { return ipow(v, deg); });
      }
      break;
    }
  }
  return out;
}

Matrix gram(const KernelSpec& k, const Points& X) { return cross_gram(k, X, X); }

}  // namespace kernet
