#include "kernet/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kernet {

namespace {

constexpr Index kPredictChunk = 4096;

struct RegularizedFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  std::optional<double> condition_estimate;
};

// Cholesky of (K + shift I), escalating a diagonal jitter when the matrix is
// indefinite to rounding. The jitter starts at 1e-12 times the mean diagonal
// and doubles up to eight times before giving up. Takes K by value so the
// peak footprint stays at two matrix copies.
RegularizedFactor factor_shifted_gram(Matrix K, double shift) {
  const Index n = K.rows();
  const double base = 1e-12 * K.trace() / static_cast<double>(n);
  RegularizedFactor out;
  K.diagonal().array() += shift;
  out.llt.compute(K);
  double added = 0.0;
  double jitter = base;
  for (int attempt = 0; attempt < 8 && out.llt.info() != Eigen::Success;
       ++attempt, jitter *= 2.0) {
    K.diagonal().array() += jitter - added;
    added = jitter;
    out.llt.compute(K);
  }
  if (out.llt.info() != Eigen::Success) {
    throw NumericalError("regularized gram factorization failed after jitter escalation");
  }
  out.jitter = added;
  const double rcond = out.llt.rcond();
  if (rcond > 0.0) out.condition_estimate = 1.0 / rcond;
  return out;
}

void check_fit_arguments(const LabeledSet& data, double lambda) {
  data.validate();
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  if (!data.labels.allFinite()) throw ParameterError("labels must be finite");
}

FitResult fit_impl(const LabeledSet& data, double lambda, const KernelSpec& k, Variant variant) {
  check_fit_arguments(data, lambda);
  const auto n = static_cast<double>(data.size());
  auto factor = factor_shifted_gram(gram(k, data.inputs), lambda * n);
  Vector c = factor.llt.solve(data.labels);
  if (variant == Variant::Bcrkn) {
    c += lambda * n * factor.llt.solve(c);
  }
  KernelModel model{k, data.inputs, std::move(c), lambda, variant};
  return FitResult{std::move(model), SolveReport{factor.jitter, factor.condition_estimate}};
}

std::string point_key(const Point& p) {
  return std::string(reinterpret_cast<const char*>(p.data()), sizeof(double) * p.size());
}

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

std::string to_string(Variant variant) {
  return variant == Variant::Rkn ? "rkn" : "bcrkn";
}

Variant variant_from_string(const std::string& name) {
  if (name == "rkn") return Variant::Rkn;
  if (name == "bcrkn") return Variant::Bcrkn;
  throw ParameterError("unknown variant: " + name);
}

void KernelModel::validate() const {
  if (anchors.rows() == 0) throw ParameterError("model has no anchors");
  if (anchors.cols() != kernel.domain().dim()) {
    throw ParameterError("anchor dimension does not match kernel domain");
  }
  if (coefficients.size() != anchors.rows()) {
    throw ParameterError("coefficient count does not match anchor count");
  }
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  if (!kernel.domain().contains_all(anchors)) {
    throw DomainError("model anchor outside kernel domain");
  }
}

FitResult fit_rkn(const LabeledSet& data, double lambda, const KernelSpec& k) {
  return fit_impl(data, lambda, k, Variant::Rkn);
}

FitResult fit_bcrkn(const LabeledSet& data, double lambda, const KernelSpec& k) {
  return fit_impl(data, lambda, k, Variant::Bcrkn);
}

KernelModel bias_correct(const KernelModel& model) {
  model.validate();
  if (model.variant != Variant::Rkn) {
    throw ParameterError("bias_correct expects a plain fit");
  }
  if (!(model.lambda > 0.0)) throw ParameterError("bias_correct expects lambda > 0");
  const auto n = static_cast<double>(model.anchors.rows());
  auto factor = factor_shifted_gram(gram(model.kernel, model.anchors), model.lambda * n);
  Vector corrected =
      model.coefficients + model.lambda * n * factor.llt.solve(model.coefficients);
  return KernelModel{model.kernel, model.anchors, std::move(corrected), model.lambda,
                     Variant::Bcrkn};
}

Vector bcrkn_operator_oracle(const LabeledSet& data, double lambda, const KernelSpec& k) {
  check_fit_arguments(data, lambda);
  const auto n = static_cast<double>(data.size());
  Matrix A = gram(k, data.inputs) / n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of normalized gram failed");
  }
  const Vector& mu = eig.eigenvalues();
  const Matrix& V = eig.eigenvectors();
  Vector filtered = V.transpose() * data.labels;
  for (Index i = 0; i < mu.size(); ++i) {
    const double denom = (lambda + mu(i)) * (lambda + mu(i));
    filtered(i) *= (2.0 * lambda + mu(i)) * mu(i) / denom;
  }
  return V * filtered;
}

KernelModel interpolate(const LabeledSet& data, const KernelSpec& k) {
  data.validate();
  if (!data.labels.allFinite()) throw ParameterError("labels must be finite");
  const Matrix K = gram(k, data.inputs);
  Eigen::LLT<Matrix> llt(K);
  Vector c;
  if (llt.info() == Eigen::Success) {
    c = llt.solve(data.labels);
  } else {
    Eigen::LDLT<Matrix> ldlt(K);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("gram matrix factorization failed");
    }
    c = ldlt.solve(data.labels);
  }
  return KernelModel{k, data.inputs, std::move(c), 0.0, Variant::Rkn};
}

Vector predict(const KernelModel& model, const Points& points) {
  model.validate();
  const Index n = points.rows();
  Vector out(n);
  for (Index start = 0; start < n; start += kPredictChunk) {
    const Index len = std::min(kPredictChunk, n - start);
    out.segment(start, len) =
        cross_gram(model.kernel, points.middleRows(start, len), model.anchors) *
        model.coefficients;
  }
  return out;
}

double rkhs_norm(const KernelSpec& k, const Points& anchors, const Vector& coefficients) {
  if (anchors.rows() == 0) throw ParameterError("rkhs_norm: empty anchor set");
  if (coefficients.size() != anchors.rows()) {
    throw ParameterError("rkhs_norm: coefficient count does not match anchor count");
  }
  const Index n = anchors.rows();
  double q = 0.0;
  for (Index start = 0; start < n; start += kPredictChunk) {
    const Index len = std::min(kPredictChunk, n - start);
    q += coefficients.segment(start, len)
             .dot(cross_gram(k, anchors.middleRows(start, len), anchors) * coefficients);
  }
  if (q < -psd_tolerance(k, n)) {
    throw NumericalError("gram quadratic form negative beyond tolerance");
  }
  return std::sqrt(std::max(q, 0.0));
}

double rkhs_norm(const KernelModel& model) {
  model.validate();
  return rkhs_norm(model.kernel, model.anchors, model.coefficients);
}

double rkhs_distance(const KernelModel& a, const KernelModel& b) {
  a.validate();
  b.validate();
  if (!(a.kernel == b.kernel)) {
    throw ParameterError("rkhs_distance requires models over the same kernel");
  }
  const Index p = a.anchors.cols();
  std::unordered_map<std::string, Index> slot;
  std::vector<double> merged_coeff;

  // Union with exact bitwise deduplication, first occurrence fixing the order.
  std::vector<std::pair<const Points*, Index>> origin;
  auto merge = [&](const Points& anchors, const Vector& coeffs, double sign) {
    for (Index i = 0; i < anchors.rows(); ++i) {
      const Point row = anchors.row(i);
      auto [it, inserted] =
          slot.try_emplace(point_key(row), static_cast<Index>(merged_coeff.size()));
      if (inserted) {
        origin.emplace_back(&anchors, i);
        merged_coeff.push_back(sign * coeffs(i));
      } else {
        merged_coeff[static_cast<std::size_t>(it->second)] += sign * coeffs(i);
      }
    }
  };
  merge(a.anchors, a.coefficients, 1.0);
  merge(b.anchors, b.coefficients, -1.0);

  const auto total = static_cast<Index>(merged_coeff.size());
  Points anchors(total, p);
  Vector coeffs(total);
  for (Index i = 0; i < total; ++i) {
    anchors.row(i) = origin[static_cast<std::size_t>(i)].first->row(
        origin[static_cast<std::size_t>(i)].second);
    coeffs(i) = merged_coeff[static_cast<std::size_t>(i)];
  }
  return rkhs_norm(a.kernel, anchors, coeffs);
}

Vector conditional_bias(const Points& inputs, double lambda, const KernelSpec& k,
                        const std::function<double(const Point&)>& f_star, Variant variant) {
  if (!f_star) throw ParameterError("conditional_bias: missing target function");
  LabeledSet noiseless;
  noiseless.domain = k.domain();
  noiseless.inputs = inputs;
  noiseless.labels.resize(inputs.rows());
  for (Index i = 0; i < inputs.rows(); ++i) noiseless.labels(i) = f_star(inputs.row(i));
  const FitResult fit = variant == Variant::Rkn ? fit_rkn(noiseless, lambda, k)
                                                : fit_bcrkn(noiseless, lambda, k);
  return predict(fit.model, inputs) - noiseless.labels;
}

void save_model(const std::filesystem::path& path, const KernelModel& model) {
  model.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open model file for writing: " + path.string());
  const Box& box = model.kernel.domain();
  os << "kernet-model v1\n";
  os << "family " << to_string(model.kernel.family()) << "\n";
  switch (model.kernel.family()) {
    case KernelFamily::BrownianPlusOne:
      break;
    case KernelFamily::Gaussian:
      os << "width ";
      write_double(os, model.kernel.width());
      os << "\n";
      break;
    case KernelFamily::Polynomial:
      os << "degree " << model.kernel.degree() << "\n";
      os << "offset ";
      write_double(os, model.kernel.offset());
      os << "\n";
      break;
  }
  os << "dim " << box.dim() << "\n";
  os << "lo";
  for (Index d = 0; d < box.dim(); ++d) {
    os << ' ';
    write_double(os, box.lo(d));
  }
  os << "\nhi";
  for (Index d = 0; d < box.dim(); ++d) {
    os << ' ';
    write_double(os, box.hi(d));
  }
  os << "\nlambda ";
  write_double(os, model.lambda);
  os << "\nvariant " << to_string(model.variant) << "\n";
  os << "n " << model.anchors.rows() << "\n";
  for (Index i = 0; i < model.anchors.rows(); ++i) {
    for (Index d = 0; d < model.anchors.cols(); ++d) {
      write_double(os, model.anchors(i, d));
      os << ' ';
    }
    write_double(os, model.coefficients(i));
    os << '\n';
  }
  if (!os) throw IoError("failed writing model file: " + path.string());
}

KernelModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path.string());
  std::string magic, version;
  is >> magic >> version;
  if (magic != "kernet-model") throw IoError("not a model file: " + path.string());
  if (version != "v1") throw IoError("unsupported model file version: " + version);

  auto expect = [&](const char* key) {
    std::string word;
    if (!(is >> word) || word != key) {
      throw IoError(std::string("malformed model file, expected '") + key + "'");
    }
  };

  expect("family");
  std::string family_name;
  is >> family_name;
  const KernelFamily family = kernel_family_from_string(family_name);

  double width = 0.0;
  int degree = 0;
  double offset = 0.0;
  if (family == KernelFamily::Gaussian) {
    expect("width");
    is >> width;
  } else if (family == KernelFamily::Polynomial) {
    expect("degree");
    is >> degree;
    expect("offset");
    is >> offset;
  }

  expect("dim");
  Index dim = 0;
  is >> dim;
  if (dim < 1) throw IoError("malformed model file: bad dimension");
  Box box;
  box.lo.resize(dim);
  box.hi.resize(dim);
  expect("lo");
  for (Index d = 0; d < dim; ++d) is >> box.lo(d);
  expect("hi");
  for (Index d = 0; d < dim; ++d) is >> box.hi(d);

  expect("lambda");
  double lambda = 0.0;
  is >> lambda;
  expect("variant");
  std::string variant_name;
  is >> variant_name;
  expect("n");
  Index n = 0;
  is >> n;
  if (!is || n < 1) throw IoError("malformed model file: bad anchor count");

  KernelSpec kernel = [&] {
    switch (family) {
      case KernelFamily::BrownianPlusOne: return KernelSpec::brownian_plus_one();
      case KernelFamily::Gaussian: return KernelSpec::gaussian(width, box);
      case KernelFamily::Polynomial: return KernelSpec::polynomial(degree, offset, box);
    }
    throw IoError("unknown kernel family in model file");
  }();

  Points anchors(n, dim);
  Vector coefficients(n);
  for (Index i = 0; i < n; ++i) {
    for (Index d = 0; d < dim; ++d) is >> anchors(i, d);
    is >> coefficients(i);
  }
  if (!is) throw IoError("malformed model file: truncated data section");

  KernelModel model{std::move(kernel), std::move(anchors), std::move(coefficients), lambda,
                    variant_from_string(variant_name)};
  model.validate();
  return model;
}

}  // namespace kernet
