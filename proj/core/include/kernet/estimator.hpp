#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "kernet/kernel.hpp"
#include "kernet/types.hpp"

namespace kernet {

enum class Variant { Rkn, Bcrkn };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);

/// Fitted kernel expansion f(x) = sum_i coefficients[i] * K(anchors[i], x).
/// Models produced by the fit functions carry the positive lambda they were
/// fit with; interpolate() marks its output with lambda = 0.
struct KernelModel {
  KernelSpec kernel;
  Points anchors;        // n x p
  Vector coefficients;   // n
  double lambda = 0.0;
  Variant variant = Variant::Rkn;

  void validate() const;
};

/// Diagnostics from one regularized solve.
struct SolveReport {
  double jitter_applied = 0.0;
  std::optional<double> condition_estimate;
};

struct FitResult {
  KernelModel model;
  SolveReport report;
};

/// Solves (lambda n I + K) c = y.
FitResult fit_rkn(const LabeledSet& data, double lambda, const KernelSpec& k);

/// Fits the bias corrected variant with a single factorization:
/// c_bc = c + lambda n (lambda n I + K)^{-1} c.
FitResult fit_bcrkn(const LabeledSet& data, double lambda, const KernelSpec& k);

/// Applies the bias correction to an existing plain fit.
KernelModel bias_correct(const KernelModel& model);

/// Predictions of the bias corrected estimator at the training points,
/// computed through the spectral decomposition of gram/n instead of the
/// coefficient solve. Used to cross-check the two computational paths.
Vector bcrkn_operator_oracle(const LabeledSet& data, double lambda, const KernelSpec& k);

/// Coefficients solve K c = y exactly (no regularization); lambda is 0.
KernelModel interpolate(const LabeledSet& data, const KernelSpec& k);

Vector predict(const KernelModel& model, const Points& points);

/// RKHS norm sqrt(c^T G c) of an expansion; negative rounding noise within
/// psd_tolerance is clamped to zero, anything worse is a numerical failure.
double rkhs_norm(const KernelSpec& k, const Points& anchors, const Vector& coefficients);
double rkhs_norm(const KernelModel& model);

/// Norm of the difference of two expansions over the same kernel. Anchors are
/// unioned with exact coordinate deduplication before forming the norm.
double rkhs_distance(const KernelModel& a, const KernelModel& b);

/// Predictions minus true values at the inputs for a fit on noiseless labels
/// y_i = f_star(x_i); this is the conditional bias of the chosen variant.
Vector conditional_bias(const Points& inputs, double lambda, const KernelSpec& k,
                        const std::function<double(const Point&)>& f_star, Variant variant);

/// Versioned flat-file persistence; numbers survive a round-trip exactly.
void save_model(const std::filesystem::path& path, const KernelModel& model);
KernelModel load_model(const std::filesystem::path& path);

}  // namespace kernet
