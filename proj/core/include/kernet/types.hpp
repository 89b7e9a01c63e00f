#pragma once

#include <Eigen/Core>

#include <optional>

#include "kernet/errors.hpp"

namespace kernet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// One input point, stored as a 1 x p row.
using Point = Eigen::RowVectorXd;

/// A batch of input points, one per row (n x p).
using Points = Eigen::MatrixXd;

/// Axis-aligned box of admissible inputs.
struct Box {
  Eigen::RowVectorXd lo;
  Eigen::RowVectorXd hi;

  static Box unit_interval() {
    Box b;
    b.lo = Eigen::RowVectorXd::Zero(1);
    b.hi = Eigen::RowVectorXd::Ones(1);
    return b;
  }

  Index dim() const { return lo.size(); }

  bool contains(const Point& x) const {
    if (x.size() != lo.size()) return false;
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  bool contains_all(const Points& pts) const {
    for (Index i = 0; i < pts.rows(); ++i) {
      if (!contains(pts.row(i))) return false;
    }
    return true;
  }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size()) {
      throw ParameterError("box bounds must be non-empty and of equal dimension");
    }
    if (!(lo.array() <= hi.array()).all()) {
      throw ParameterError("box lower bound exceeds upper bound");
    }
  }

  bool operator==(const Box& other) const {
    return lo.size() == other.lo.size() && lo == other.lo && hi == other.hi;
  }
};

/// Supervised sample: inputs live in `domain`, labels are real.
/// `label_bound` records |y| <= M when the source guarantees one.
struct LabeledSet {
  Box domain;
  Points inputs;   // n x p
  Vector labels;   // n

  std::optional<double> label_bound;

  Index size() const { return inputs.rows(); }

  void validate() const {
    domain.validate();
    if (inputs.rows() == 0) throw ParameterError("labeled set is empty");
    if (inputs.cols() != domain.dim()) {
      throw ParameterError("input dimension does not match domain");
    }
    if (labels.size() != inputs.rows()) {
      throw ParameterError("label count does not match input count");
    }
    if (!domain.contains_all(inputs)) {
      throw DomainError("labeled set contains a point outside its domain");
    }
    if (label_bound && *label_bound < 0) {
      throw ParameterError("label bound must be nonnegative");
    }
  }
};

}  // namespace kernet
