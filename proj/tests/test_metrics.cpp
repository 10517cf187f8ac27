#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "cnmix/metrics.hpp"

using namespace cnmix;

namespace {

// Pair-counting reference: walks all C(n,2) pairs and applies the
// chance-corrected agreement formula directly.
double ari_pair_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_a = a[i] == a[j];
      const bool same_b = b[i] == b[j];
      if (same_a && same_b)
        ++n11;
      else if (!same_a && !same_b)
        ++n00;
      else if (same_a)
        ++n10;
      else
        ++n01;
    }
  const double total = n11 + n00 + n10 + n01;
  const double expected = (n11 + n10) * (n11 + n01) / total;
  const double maximum = 0.5 * ((n11 + n10) + (n11 + n01));
  return (n11 - expected) / (maximum - expected);
}

}  // namespace

TEST_CASE("identical partitions score 1") {
  const std::vector<int> a{1, 1, 2, 2};
  CHECK(adjusted_rand_index(a, a) == 1.0);
}

TEST_CASE("relabeling does not matter") {
  const std::vector<int> a{1, 1, 2, 2};
  const std::vector<int> b{2, 2, 1, 1};
  CHECK(adjusted_rand_index(a, b) == 1.0);
}

TEST_CASE("crossed partitions against the pair-enumeration oracle") {
  const std::vector<int> a{1, 1, 2, 2};
  const std::vector<int> b{1, 2, 1, 2};
  CHECK(adjusted_rand_index(a, b) ==
        doctest::Approx(ari_pair_oracle(a, b)).epsilon(1e-14));
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5));
}

TEST_CASE("random partitions: symmetry, relabel invariance, range, oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 20);
    const int ka = 2 + static_cast<int>(rng() % 3);
    const int kb = 2 + static_cast<int>(rng() % 3);
    std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<unsigned>(ka));
      b[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<unsigned>(kb));
    }
    const double ab = adjusted_rand_index(a, b);
    CHECK(ab == doctest::Approx(adjusted_rand_index(b, a)).epsilon(1e-14));
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);

    std::vector<int> relabeled(b);
    for (auto& v : relabeled) v = 100 - v;
    CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(ab).epsilon(1e-14));

    const double oracle = ari_pair_oracle(a, b);
    if (std::isfinite(oracle))
      CHECK(ab == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("degenerate tables") {
  const std::vector<int> ones{7, 7, 7, 7};
  const std::vector<int> singletons{1, 2, 3, 4};
  CHECK(adjusted_rand_index(ones, ones) == 1.0);
  CHECK(adjusted_rand_index(singletons, singletons) == 1.0);
  // one big cluster vs singletons: table is degenerate and they differ
  CHECK(adjusted_rand_index(ones, singletons) == 0.0);
}

TEST_CASE("length mismatch is a contract violation") {
  const std::vector<int> a{1, 2};
  const std::vector<int> b{1, 2, 3};
  CHECK_THROWS_AS(adjusted_rand_index(a, b), std::invalid_argument);
}

TEST_CASE("outlier rates on a mixed vector") {
  const std::vector<std::uint8_t> truth{1, 0, 1, 0, 0, 1};
  const auto same = outlier_rates(truth, truth);
  CHECK(same.tpr.value() == 1.0);
  CHECK(same.fpr.value() == 0.0);
  CHECK(same.counts.tp == 3);
  CHECK(same.counts.tn == 3);

  const std::vector<std::uint8_t> none(truth.size(), 0);
  const auto quiet = outlier_rates(none, truth);
  CHECK(quiet.tpr.value() == 0.0);
  CHECK(quiet.fpr.value() == 0.0);
}

TEST_CASE("truth without positives leaves TPR absent") {
  const std::vector<std::uint8_t> truth{0, 0, 0, 0};
  const std::vector<std::uint8_t> pred{1, 0, 1, 0};
  const auto r = outlier_rates(pred, truth);
  CHECK_FALSE(r.tpr.has_value());
  CHECK(r.fpr.value() == doctest::Approx(0.5));
}

TEST_CASE("truth without negatives leaves FPR absent") {
  const std::vector<std::uint8_t> truth{1, 1, 1};
  const std::vector<std::uint8_t> pred{1, 0, 1};
  const auto r = outlier_rates(pred, truth);
  CHECK(r.tpr.value() == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(r.fpr.has_value());
}

TEST_CASE("simultaneous permutation leaves the rates unchanged") {
  std::mt19937_64 rng(23);
  std::vector<std::uint8_t> truth(30), pred(30);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng() % 3 == 0;
    pred[i] = rng() % 4 == 0;
  }
  const auto base = outlier_rates(pred, truth);

  std::vector<int> perm(truth.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::uint8_t> truth_p(truth.size()), pred_p(truth.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    truth_p[i] = truth[static_cast<std::size_t>(perm[i])];
    pred_p[i] = pred[static_cast<std::size_t>(perm[i])];
  }
  const auto permuted = outlier_rates(pred_p, truth_p);
  CHECK(base.tpr == permuted.tpr);
  CHECK(base.fpr == permuted.fpr);
  CHECK(base.counts.tp == permuted.counts.tp);

  CHECK_THROWS_AS(
      outlier_rates(std::span<const std::uint8_t>(pred.data(), 10),
                    std::span<const std::uint8_t>(truth.data(), 9)),
      std::invalid_argument);
}
