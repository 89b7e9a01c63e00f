#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kernet/estimator.hpp"

namespace kernet {

/// Disjoint index blocks covering {0, ..., n-1}. Blocks are kept sorted
/// internally so a one-block partition reproduces the input order exactly.
struct Partition {
  std::vector<std::vector<Index>> blocks;
  std::uint64_t seed = 0;

  int block_count() const { return static_cast<int>(blocks.size()); }
  void validate(Index n) const;
};

/// Random equipartition into m blocks; sizes differ by at most one and the
/// larger blocks come first. Requires 1 <= m <= |data|.
Partition partition(const LabeledSet& data, int m, std::uint64_t seed);

/// Copies the listed rows into a new set with the same domain metadata.
LabeledSet subset(const LabeledSet& data, const std::vector<Index>& rows);

struct WeightedModel {
  KernelModel model;
  double weight = 0.0;
};

/// Weighted collection of per-block fits; weights are |D_j| / |D|.
struct AveragedModel {
  std::vector<WeightedModel> blocks;
  double lambda = 0.0;

  void validate() const;
};

/// Fits the chosen variant on every block with the shared lambda. If any
/// block fails the whole fit fails, naming the offending blocks.
AveragedModel fit_distributed(const LabeledSet& data, const Partition& partition, double lambda,
                              const KernelSpec& k, Variant variant, int threads = 1);

/// Weight-averaged predictions, blocks accumulated in index order.
Vector predict_averaged(const AveragedModel& average, const Points& points);

/// The average as a single kernel expansion: anchors concatenated in block
/// order, coefficients scaled by the block weights.
KernelModel combined_expansion(const AveragedModel& average);

/// Attaches unlabeled points with zero labels and scales the existing labels
/// by |combined| / |labeled|, which keeps the least-squares data term of the
/// combined set aligned with the original one.
LabeledSet semi_supervised_augment(const LabeledSet& data, const Points& unlabeled);

/// Largest admissible block count floor(n^min{2/(2r+beta), (2r-1)/(2r+beta)}),
/// never below 1. Requires r in [1/2, 2] and beta in (0, 1].
int m_bound(long long n, double r, double beta);

/// Persists an averaged model as a manifest plus one model file per block,
/// written next to the manifest as <stem>.block<j>.model.
void save_averaged(const std::filesystem::path& manifest_path, const AveragedModel& average);
AveragedModel load_averaged(const std::filesystem::path& manifest_path);

}  // namespace kernet
