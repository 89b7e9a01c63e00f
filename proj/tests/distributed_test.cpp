#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "kernet/distributed.hpp"
#include "kernet/rng.hpp"

using namespace kernet;

namespace {

LabeledSet hat_data(Index n, std::uint64_t seed, double noise_sd = 0.3) {
  LabeledSet d;
  d.domain = Box::unit_interval();
  d.inputs = rng::uniform_points(d.domain, n, seed, rng::kInputs);
  d.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.labels(i) = std::min(d.inputs(i, 0), 1.0 - d.inputs(i, 0)) +
                  noise_sd * rng::gaussian(seed, rng::kNoise, static_cast<std::uint64_t>(i));
  }
  return d;
}

}  // namespace

TEST_CASE("partition balances sizes with remainder at the front") {
  const LabeledSet d = hat_data(10, 1);
  const Partition p = partition(d, 3, 42);
  REQUIRE(p.block_count() == 3);
  CHECK(p.blocks[0].size() == 4);
  CHECK(p.blocks[1].size() == 3);
  CHECK(p.blocks[2].size() == 3);

  std::set<Index> seen;
  for (const auto& block : p.blocks) {
    for (Index i : block) {
      CHECK(i >= 0);
      CHECK(i < 10);
      CHECK(seen.insert(i).second);
    }
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("partition is deterministic and bounded") {
  const LabeledSet d = hat_data(64, 2);
  const Partition a = partition(d, 5, 7);
  const Partition b = partition(d, 5, 7);
  CHECK(a.blocks == b.blocks);
  const Partition c = partition(d, 5, 8);
  CHECK(a.blocks != c.blocks);

  const Partition whole = partition(d, 1, 3);
  REQUIRE(whole.block_count() == 1);
  CHECK(whole.blocks[0].size() == 64);
  CHECK(std::is_sorted(whole.blocks[0].begin(), whole.blocks[0].end()));

  CHECK_THROWS_AS((void)partition(d, 65, 1), ParameterError);
  CHECK_THROWS_AS((void)partition(d, 0, 1), ParameterError);
}

TEST_CASE("one-block distributed fit collapses to the single fit") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(128, 3);
  const Points test = rng::uniform_points(d.domain, 200, 11, rng::kHoldout);
  for (Variant variant : {Variant::Rkn, Variant::Bcrkn}) {
    const Partition p = partition(d, 1, 9);
    const AveragedModel avg = fit_distributed(d, p, 0.01, k, variant);
    const FitResult single =
        variant == Variant::Rkn ? fit_rkn(d, 0.01, k) : fit_bcrkn(d, 0.01, k);
    const Vector from_avg = predict_averaged(avg, test);
    const Vector from_single = predict(single.model, test);
    CHECK((from_avg - from_single).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("two-block average is the exact half-half sum") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(4098, 5, 0.447);
  const Partition p = partition(d, 2, 17);
  const double lambda = std::pow(4098.0, -2.0 / 3.0);
  const AveragedModel avg = fit_distributed(d, p, lambda, k, Variant::Bcrkn);
  REQUIRE(avg.blocks.size() == 2);
  CHECK(avg.blocks[0].weight == 0.5);
  CHECK(avg.blocks[1].weight == 0.5);

  const Points test = rng::uniform_points(d.domain, 64, 23, rng::kHoldout);
  Vector expected = Vector::Zero(test.rows());
  expected += 0.5 * predict(avg.blocks[0].model, test);
  expected += 0.5 * predict(avg.blocks[1].model, test);
  CHECK(predict_averaged(avg, test) == expected);
}

TEST_CASE("averaged prediction matches an independent weighted sum") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(100, 6);
  const Partition p = partition(d, 3, 29);
  const AveragedModel avg = fit_distributed(d, p, 0.05, k, Variant::Rkn);

  const Points test = rng::uniform_points(d.domain, 50, 31, rng::kHoldout);
  Vector manual = Vector::Zero(test.rows());
  double weight_total = 0.0;
  for (const auto& wm : avg.blocks) {
    manual += wm.weight * predict(wm.model, test);
    weight_total += wm.weight;
  }
  CHECK(weight_total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((predict_averaged(avg, test) - manual).lpNorm<Eigen::Infinity>() <= 1e-12);

  AveragedModel zeros = avg;
  for (auto& wm : zeros.blocks) wm.model.coefficients.setZero();
  CHECK(predict_averaged(zeros, test) == Vector::Zero(test.rows()));
}

TEST_CASE("block order does not change the averaged prediction") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(90, 7);
  const Partition p = partition(d, 3, 37);
  const AveragedModel avg = fit_distributed(d, p, 0.02, k, Variant::Bcrkn);

  AveragedModel rotated = avg;
  std::rotate(rotated.blocks.begin(), rotated.blocks.begin() + 1, rotated.blocks.end());
  const Points test = rng::uniform_points(d.domain, 40, 41, rng::kHoldout);
  CHECK((predict_averaged(avg, test) - predict_averaged(rotated, test))
            .lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("semi-supervised augmentation scales labels and keeps zeros") {
  LabeledSet d;
  d.domain = Box::unit_interval();
  d.inputs.resize(2, 1);
  d.inputs << 0.2, 0.8;
  d.labels.resize(2);
  d.labels << 1.0, 2.0;

  Points unlabeled(2, 1);
  unlabeled << 0.4, 0.6;
  const LabeledSet augmented = semi_supervised_augment(d, unlabeled);
  REQUIRE(augmented.size() == 4);
  Vector expected(4);
  expected << 2.0, 4.0, 0.0, 0.0;
  CHECK(augmented.labels == expected);
  CHECK(augmented.inputs.topRows(2) == d.inputs);
  CHECK(augmented.inputs.bottomRows(2) == unlabeled);

  const LabeledSet unchanged = semi_supervised_augment(d, Points(0, 1));
  CHECK(unchanged.inputs == d.inputs);
  CHECK(unchanged.labels == d.labels);

  const KernelSpec k = KernelSpec::brownian_plus_one();
  const FitResult base = fit_rkn(d, 0.1, k);
  const FitResult same = fit_rkn(unchanged, 0.1, k);
  CHECK(same.model.coefficients == base.model.coefficients);

  Points outside(1, 1);
  outside << 1.7;
  CHECK_THROWS_AS((void)semi_supervised_augment(d, outside), DomainError);
}

TEST_CASE("block-count bound follows the closed form") {
  CHECK(m_bound(4096, 1.0, 0.5) == 27);
  CHECK(m_bound(4096, 0.5, 0.5) == 1);
  CHECK(m_bound(4096, 0.5, 1.0) == 1);
  CHECK(m_bound(4096, 2.0, 1.0) == 27);
  CHECK(m_bound(1, 1.0, 1.0) == 1);
  CHECK_THROWS_AS((void)m_bound(0, 1.0, 0.5), ParameterError);
  CHECK_THROWS_AS((void)m_bound(4096, 0.4, 0.5), ParameterError);
  CHECK_THROWS_AS((void)m_bound(4096, 2.1, 0.5), ParameterError);
  CHECK_THROWS_AS((void)m_bound(4096, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS((void)m_bound(4096, 1.0, 1.1), ParameterError);
}

TEST_CASE("averaged models round-trip through the manifest") {
  namespace fs = std::filesystem;
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(60, 8);
  const Partition p = partition(d, 3, 43);
  const AveragedModel avg = fit_distributed(d, p, 0.03, k, Variant::Bcrkn);

  const fs::path dir = fs::temp_directory_path() / "kernet_avg_roundtrip";
  fs::create_directories(dir);
  const fs::path manifest = dir / "average.manifest";
  save_averaged(manifest, avg);
  const AveragedModel loaded = load_averaged(manifest);
  fs::remove_all(dir);

  REQUIRE(loaded.blocks.size() == avg.blocks.size());
  CHECK(loaded.lambda == avg.lambda);
  for (std::size_t j = 0; j < avg.blocks.size(); ++j) {
    CHECK(loaded.blocks[j].weight == avg.blocks[j].weight);
    CHECK(loaded.blocks[j].model.coefficients == avg.blocks[j].model.coefficients);
    CHECK(loaded.blocks[j].model.anchors == avg.blocks[j].model.anchors);
  }

  const Points test = rng::uniform_points(d.domain, 20, 51, rng::kHoldout);
  CHECK(predict_averaged(loaded, test) == predict_averaged(avg, test));
}

TEST_CASE("combined expansion preserves the averaged prediction") {
  const KernelSpec k = KernelSpec::brownian_plus_one();
  const LabeledSet d = hat_data(80, 9);
  const Partition p = partition(d, 4, 53);
  const AveragedModel avg = fit_distributed(d, p, 0.04, k, Variant::Rkn);
  const KernelModel flat = combined_expansion(avg);
  const Points test = rng::uniform_points(d.domain, 30, 61, rng::kHoldout);
  CHECK((predict(flat, test) - predict_averaged(avg, test)).lpNorm<Eigen::Infinity>() <= 1e-12);
}
