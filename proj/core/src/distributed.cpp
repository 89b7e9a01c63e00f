#include "kernet/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "kernet/parallel.hpp"
#include "kernet/rng.hpp"

namespace kernet {

namespace {

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void Partition::validate(Index n) const {
  if (blocks.empty()) throw ParameterError("partition has no blocks");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  Index covered = 0;
  for (const auto& block : blocks) {
    if (block.empty()) throw ParameterError("partition contains an empty block");
    for (Index idx : block) {
      if (idx < 0 || idx >= n) throw ParameterError("partition index out of range");
      if (seen[static_cast<std::size_t>(idx)]) {
        throw ParameterError("partition blocks overlap");
      }
      seen[static_cast<std::size_t>(idx)] = 1;
      ++covered;
    }
  }
  if (covered != n) throw ParameterError("partition does not cover the data set");
}

Partition partition(const LabeledSet& data, int m, std::uint64_t seed) {
  data.validate();
  const Index n = data.size();
  if (m < 1 || static_cast<Index>(m) > n) {
    throw ParameterError("block count must lie in [1, |data|]");
  }
  const std::vector<Index> perm = rng::shuffled_indices(n, seed);
  Partition out;
  out.seed = seed;
  out.blocks.resize(static_cast<std::size_t>(m));
  const Index base = n / m;
  const Index remainder = n % m;
  Index cursor = 0;
  for (Index j = 0; j < m; ++j) {
    const Index size = base + (j < remainder ? 1 : 0);
    auto& block = out.blocks[static_cast<std::size_t>(j)];
    block.assign(perm.begin() + cursor, perm.begin() + cursor + size);
    std::sort(block.begin(), block.end());
    cursor += size;
  }
  return out;
}

LabeledSet subset(const LabeledSet& data, const std::vector<Index>& rows) {
  LabeledSet out;
  out.domain = data.domain;
  out.label_bound = data.label_bound;
  out.inputs.resize(static_cast<Index>(rows.size()), data.inputs.cols());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= data.size()) {
      throw ParameterError("subset row index out of range");
    }
    out.inputs.row(static_cast<Index>(i)) = data.inputs.row(rows[i]);
    out.labels(static_cast<Index>(i)) = data.labels(rows[i]);
  }
  return out;
}

void AveragedModel::validate() const {
  if (blocks.empty()) throw ParameterError("averaged model has no blocks");
  double total = 0.0;
  for (const auto& wm : blocks) {
    wm.model.validate();
    if (!(wm.weight > 0.0)) throw ParameterError("block weight must be positive");
    if (!(wm.model.kernel == blocks.front().model.kernel)) {
      throw ParameterError("averaged model mixes kernels");
    }
    total += wm.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ParameterError("block weights must sum to one");
}

AveragedModel fit_distributed(const LabeledSet& data, const Partition& part, double lambda,
                              const KernelSpec& k, Variant variant, int threads) {
  data.validate();
  part.validate(data.size());
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");

  const auto m = part.blocks.size();
  const auto n = static_cast<double>(data.size());
  std::vector<std::optional<WeightedModel>> slots(m);
  std::vector<std::string> failures(m);

  parallel_for(m, threads, [&](std::size_t j) {
    try {
      const LabeledSet block = subset(data, part.blocks[j]);
      FitResult fit = variant == Variant::Rkn ? fit_rkn(block, lambda, k)
                                              : fit_bcrkn(block, lambda, k);
      slots[j] = WeightedModel{std::move(fit.model),
                               static_cast<double>(part.blocks[j].size()) / n};
    } catch (const Error& e) {
      failures[j] = e.what();
    }
  });

  std::string failed;
  for (std::size_t j = 0; j < m; ++j) {
    if (!failures[j].empty()) {
      if (!failed.empty()) failed += "; ";
      failed += "block " + std::to_string(j) + ": " + failures[j];
    }
  }
  if (!failed.empty()) throw NumericalError("distributed fit failed: " + failed);

  AveragedModel out;
  out.lambda = lambda;
  out.blocks.reserve(m);
  for (auto& slot : slots) out.blocks.push_back(std::move(*slot));
  return out;
}

Vector predict_averaged(const AveragedModel& average, const Points& points) {
  average.validate();
  Vector out = Vector::Zero(points.rows());
  for (const auto& wm : average.blocks) {
    out += wm.weight * predict(wm.model, points);
  }
  return out;
}

KernelModel combined_expansion(const AveragedModel& average) {
  average.validate();
  Index total = 0;
  for (const auto& wm : average.blocks) total += wm.model.anchors.rows();
  KernelModel out{average.blocks.front().model.kernel, Points(total, 0), Vector(total),
                  average.lambda, average.blocks.front().model.variant};
  out.anchors.resize(total, average.blocks.front().model.anchors.cols());
  Index cursor = 0;
  for (const auto& wm : average.blocks) {
    const Index rows = wm.model.anchors.rows();
    out.anchors.middleRows(cursor, rows) = wm.model.anchors;
    out.coefficients.segment(cursor, rows) = wm.weight * wm.model.coefficients;
    cursor += rows;
  }
  return out;
}

LabeledSet semi_supervised_augment(const LabeledSet& data, const Points& unlabeled) {
  data.validate();
  if (unlabeled.rows() > 0) {
    if (unlabeled.cols() != data.domain.dim()) {
      throw DomainError("unlabeled point dimension does not match domain");
    }
    if (!data.domain.contains_all(unlabeled)) {
      throw DomainError("unlabeled point outside domain");
    }
  }
  const Index labeled = data.size();
  const Index total = labeled + unlabeled.rows();
  const double scale = static_cast<double>(total) / static_cast<double>(labeled);
  LabeledSet out;
  out.domain = data.domain;
  if (data.label_bound) out.label_bound = scale * *data.label_bound;
  out.inputs.resize(total, data.inputs.cols());
  out.inputs.topRows(labeled) = data.inputs;
  if (unlabeled.rows() > 0) out.inputs.bottomRows(unlabeled.rows()) = unlabeled;
  out.labels = Vector::Zero(total);
  out.labels.head(labeled) = scale * data.labels;
  return out;
}

int m_bound(long long n, double r, double beta) {
  if (n < 1) throw ParameterError("sample size must be positive");
  if (!(r >= 0.5 && r <= 2.0)) throw ParameterError("regularity must lie in [1/2, 2]");
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("capacity exponent must lie in (0, 1]");
  const double denom = 2.0 * r + beta;
  const double exponent = std::min(2.0 / denom, (2.0 * r - 1.0) / denom);
  const double value = std::pow(static_cast<double>(n), exponent);
  // Nudge by one part in 1e13 so representation error cannot push an exact
  // integer power just below its floor.
  const int bound = static_cast<int>(std::floor(value * (1.0 + 1e-13)));
  return std::max(1, bound);
}

void save_averaged(const std::filesystem::path& manifest_path, const AveragedModel& average) {
  average.validate();
  std::ofstream os(manifest_path, std::ios::binary);
  if (!os) throw IoError("cannot open manifest for writing: " + manifest_path.string());
  os << "kernet-average v1\n";
  os << "lambda ";
  write_double(os, average.lambda);
  os << "\nblocks " << average.blocks.size() << "\n";
  const std::string stem = manifest_path.stem().string();
  for (std::size_t j = 0; j < average.blocks.size(); ++j) {
    const std::string name = stem + ".block" + std::to_string(j) + ".model";
    save_model(manifest_path.parent_path() / name, average.blocks[j].model);
    write_double(os, average.blocks[j].weight);
    os << ' ' << name << '\n';
  }
  if (!os) throw IoError("failed writing manifest: " + manifest_path.string());
}

AveragedModel load_averaged(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is) throw IoError("cannot open manifest: " + manifest_path.string());
  std::string magic, version;
  is >> magic >> version;
  if (magic != "kernet-average") throw IoError("not a manifest file: " + manifest_path.string());
  if (version != "v1") throw IoError("unsupported manifest version: " + version);
  std::string key;
  double lambda = 0.0;
  std::size_t blocks = 0;
  is >> key >> lambda;
  if (key != "lambda") throw IoError("malformed manifest: expected 'lambda'");
  is >> key >> blocks;
  if (key != "blocks" || !is || blocks == 0) throw IoError("malformed manifest: bad block count");
  AveragedModel out;
  out.lambda = lambda;
  out.blocks.reserve(blocks);
  for (std::size_t j = 0; j < blocks; ++j) {
    double weight = 0.0;
    std::string name;
    is >> weight >> name;
    if (!is) throw IoError("malformed manifest: truncated block list");
    out.blocks.push_back(
        WeightedModel{load_model(manifest_path.parent_path() / name), weight});
  }
  out.validate();
  return out;
}

}  // namespace kernet
