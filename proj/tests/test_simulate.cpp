#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cnmix/simulate.hpp"
#include "oracles.hpp"

using namespace cnmix;

namespace {

int rows_with_missing(const Dataset& ds) {
  int count = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (!ds.mask.row(i).all()) ++count;
  return count;
}

}  // namespace

TEST_CASE("atypical substitution count is exact") {
  ScenarioConfig cfg;
  cfg.family = Family::MnAtypical;
  cfg.n = 100;
  cfg.seed = 3;
  const auto lds = generate_scenario(cfg);
  int outliers = 0;
  for (auto f : lds.true_outlier) outliers += f;
  CHECK(outliers == 1);
}

TEST_CASE("uniform noise count is exact") {
  ScenarioConfig cfg;
  cfg.family = Family::MnUniformNoise;
  cfg.n = 500;
  cfg.seed = 4;
  const auto lds = generate_scenario(cfg);
  int outliers = 0;
  for (auto f : lds.true_outlier) outliers += f;
  CHECK(outliers == 25);
}

TEST_CASE("student_t scenarios carry no outlier truth") {
  ScenarioConfig cfg;
  cfg.family = Family::StudentT;
  cfg.n = 200;
  cfg.seed = 5;
  const auto lds = generate_scenario(cfg);
  for (auto f : lds.true_outlier) CHECK(f == 0);
}

TEST_CASE("contaminated scenario bad fraction sits near 1 - alpha") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 2000;
  cfg.seed = 6;
  const auto lds = generate_scenario(cfg);
  int bad = 0;
  for (auto f : lds.true_outlier) bad += f;
  const double frac = static_cast<double>(bad) / cfg.n;
  const double se = std::sqrt(0.1 * 0.9 / cfg.n);
  CHECK(std::abs(frac - 0.1) < 3.0 * se);
}

TEST_CASE("atypical substitutes live on the requested ring") {
  ScenarioConfig cfg;
  cfg.family = Family::MnAtypical;
  cfg.n = 400;
  cfg.seed = 7;
  const auto lds = generate_scenario(cfg);
  for (std::size_t i = 0; i < lds.true_outlier.size(); ++i) {
    if (!lds.true_outlier[i]) continue;
    const Eigen::Vector2d x = lds.data.values.row(static_cast<Eigen::Index>(i)).transpose();
    const double d0 = (x - lds.means[0]).norm();
    const double d1 = (x - lds.means[1]).norm();
    const double nearer = std::min(d0, d1);
    CHECK(nearer >= 8.0 - 1e-9);
    CHECK(nearer <= 12.0 + 1e-9);
  }
}

TEST_CASE("scenario generation is reproducible") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 150;
  cfg.seed = 8;
  const auto a = generate_scenario(cfg);
  const auto b = generate_scenario(cfg);
  CHECK((a.data.values.array() == b.data.values.array()).all());
  CHECK(a.true_labels == b.true_labels);
  CHECK(a.true_outlier == b.true_outlier);
}

TEST_CASE("amputation count is exact, not probabilistic") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 100;
  cfg.seed = 9;
  const auto lds = generate_scenario(cfg);

  for (double prop : {0.10, 0.50, 0.80}) {
    AmputationConfig amp;
    amp.prop_rows = prop;
    amp.seed = 10;
    AmputeInfo info;
    const Dataset out = ampute(lds.data, amp, &info);
    CHECK(info.amputed_rows == static_cast<int>(std::llround(prop * 100)));
    CHECK(rows_with_missing(out) == info.amputed_rows);
    out.validate();  // every amputed row keeps at least one observed cell
  }
}

TEST_CASE("a vanishing proportion is a warned no-op") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 100;
  cfg.seed = 11;
  const auto lds = generate_scenario(cfg);
  AmputationConfig amp;
  amp.prop_rows = 0.001;
  AmputeInfo info;
  const Dataset out = ampute(lds.data, amp, &info);
  CHECK(info.no_op);
  CHECK_FALSE(info.warning.empty());
  CHECK((out.values.array() == lds.data.values.array()).all());
  CHECK(out.mask.all());
}

TEST_CASE("a single pattern drives which coordinate goes missing") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 80;
  cfg.seed = 12;
  const auto lds = generate_scenario(cfg);
  AmputationConfig amp;
  amp.prop_rows = 0.5;
  amp.seed = 13;
  amp.patterns = BoolMatrix::Constant(1, 2, false);
  amp.patterns(0, 1) = true;  // always hide coordinate 2
  amp.weights = default_weights(amp.patterns);
  const Dataset out = ampute(lds.data, amp);
  for (Eigen::Index i = 0; i < out.n(); ++i) {
    CHECK(out.mask(i, 0));
    if (!out.mask.row(i).all()) CHECK_FALSE(out.mask(i, 1));
  }
  CHECK(rows_with_missing(out) == 40);
}

TEST_CASE("amputation is reproducible") {
  ScenarioConfig cfg;
  cfg.family = Family::MnUniformNoise;
  cfg.n = 120;
  cfg.seed = 14;
  const auto lds = generate_scenario(cfg);
  AmputationConfig amp;
  amp.prop_rows = 0.4;
  amp.seed = 15;
  const Dataset a = ampute(lds.data, amp);
  const Dataset b = ampute(lds.data, amp);
  CHECK((a.mask.array() == b.mask.array()).all());
  for (Eigen::Index i = 0; i < a.n(); ++i)
    for (Eigen::Index j = 0; j < a.d(); ++j)
      if (a.mask(i, j)) CHECK(a.values(i, j) == b.values(i, j));
}

TEST_CASE("missingness correlates with the observed coordinate under MAR") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 2000;
  cfg.seed = 16;
  const auto lds = generate_scenario(cfg);

  AmputationConfig amp;
  amp.prop_rows = 0.5;
  amp.seed = 17;
  amp.patterns = BoolMatrix::Constant(1, 2, false);
  amp.patterns(0, 1) = true;  // coordinate 2 goes missing
  amp.weights = Eigen::MatrixXd::Zero(1, 2);
  amp.weights(0, 0) = 1.0;  // score driven by coordinate 1 alone
  const Dataset out = ampute(lds.data, amp);

  std::vector<double> indicator, value;
  for (Eigen::Index i = 0; i < out.n(); ++i) {
    indicator.push_back(out.mask(i, 1) ? 0.0 : 1.0);
    value.push_back(out.values(i, 0));
  }
  const double rho = testutil::rank_correlation(indicator, value);
  CHECK(rho > 0.1);
}

TEST_CASE("invalid amputation configs are rejected") {
  ScenarioConfig cfg;
  cfg.family = Family::Mcn;
  cfg.n = 50;
  cfg.seed = 18;
  const auto lds = generate_scenario(cfg);

  AmputationConfig amp;
  amp.prop_rows = 1.5;
  CHECK_THROWS_AS(ampute(lds.data, amp), ConfigError);

  amp.prop_rows = 0.5;
  amp.patterns = BoolMatrix::Constant(1, 2, true);  // removes whole rows
  amp.weights = Eigen::MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(ampute(lds.data, amp), ConfigError);

  AmputationConfig ok;
  ok.prop_rows = 0.5;
  Dataset already = lds.data;
  already.mask(0, 0) = false;
  CHECK_THROWS_AS(ampute(already, ok), DataError);
}

TEST_CASE("default patterns never cover a whole row and cycle for d = 2") {
  const auto p2 = default_patterns(2);
  CHECK(p2.rows() == 10);
  for (Eigen::Index s = 0; s < p2.rows(); ++s) {
    CHECK((p2(s, 0) ? 1 : 0) + (p2(s, 1) ? 1 : 0) == 1);
    CHECK(p2(s, s % 2));
  }
  const auto p5 = default_patterns(5, 10, 3);
  CHECK(p5.rows() == 10);
  for (Eigen::Index s = 0; s < p5.rows(); ++s) {
    int missing = 0;
    for (Eigen::Index j = 0; j < 5; ++j) missing += p5(s, j) ? 1 : 0;
    CHECK(missing >= 1);
    CHECK(missing <= 2);
  }
  CHECK_THROWS_AS(default_patterns(1), ConfigError);
}
