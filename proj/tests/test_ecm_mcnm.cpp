#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cnmix/ecm_mcnm.hpp"
#include "cnmix/rng.hpp"
#include "cnmix/simulate.hpp"
#include "cnmix/metrics.hpp"
#include "oracles.hpp"

using namespace cnmix;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

Dataset fully_observed(const MatrixXd& x) {
  Dataset ds;
  ds.values = x;
  ds.mask = BoolMatrix::Constant(x.rows(), x.cols(), true);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    ds.columns.push_back("x" + std::to_string(j + 1));
  return ds;
}

McnComponent component(const VectorXd& mu, const MatrixXd& sigma, double alpha,
                       double eta) {
  McnComponent c;
  c.mu = mu;
  c.sigma = sigma;
  c.alpha = alpha;
  c.eta = eta;
  return c;
}

McnmModel two_component_fixture() {
  McnmModel m;
  m.pi = Eigen::Vector2d(0.6, 0.4);
  MatrixXd s1(2, 2), s2(2, 2);
  s1 << 1.0, 0.3, 0.3, 1.5;
  s2 << 2.0, -0.4, -0.4, 1.0;
  m.components.push_back(component(Vector2d(0.0, 0.0), s1, 0.9, 5.0));
  m.components.push_back(component(Vector2d(4.0, 3.0), s2, 0.8, 12.0));
  return m;
}

// The three-row fixture with one missing cell used against the explicit
// 2x2 brute-force formulas.
Dataset three_row_fixture() {
  MatrixXd x(3, 2);
  x << 0.5, -0.2, 3.5, std::numeric_limits<double>::quiet_NaN(), 4.2, 2.8;
  Dataset ds = fully_observed(x);
  ds.mask(1, 1) = false;
  return ds;
}

struct BruteRow {
  double z[2], v[2], w[2];
  double x_tilde[2];   // per component, single missing coordinate
  double cond_var[2];
  bool has_missing = false;
};

// Explicit evaluation of every E-step quantity for d = 2, G = 2.
BruteRow brute_row(const Dataset& ds, int i, const McnmModel& m) {
  BruteRow out;
  double num[2], fmcn[2];
  for (int g = 0; g < 2; ++g) {
    const auto& c = m.components[static_cast<std::size_t>(g)];
    if (ds.mask(i, 0) && ds.mask(i, 1)) {
      const Vector2d x(ds.values(i, 0), ds.values(i, 1));
      const double fg = std::exp(testutil::mn_logpdf_oracle(x, c.mu, c.sigma));
      const double fb = std::exp(
          testutil::mn_logpdf_oracle(x, c.mu, (c.eta * c.sigma).eval()));
      fmcn[g] = c.alpha * fg + (1.0 - c.alpha) * fb;
      out.v[g] = c.alpha * fg / fmcn[g];
    } else {
      // observed coordinate 0, missing coordinate 1
      out.has_missing = true;
      const double x0 = ds.values(i, 0);
      const double mu0 = c.mu[0], mu1 = c.mu[1];
      const double s00 = c.sigma(0, 0), s01 = c.sigma(0, 1),
                   s11 = c.sigma(1, 1);
      const auto phi = [&](double var) {
        return std::exp(-0.5 * (std::log(2.0 * M_PI * var) +
                                (x0 - mu0) * (x0 - mu0) / var));
      };
      const double fg = phi(s00);
      const double fb = phi(c.eta * s00);
      fmcn[g] = c.alpha * fg + (1.0 - c.alpha) * fb;
      out.v[g] = c.alpha * fg / fmcn[g];
      out.x_tilde[g] = mu1 + s01 / s00 * (x0 - mu0);
      out.cond_var[g] = s11 - s01 * s01 / s00;
    }
    num[g] = m.pi[g] * fmcn[g];
  }
  const double total = num[0] + num[1];
  for (int g = 0; g < 2; ++g) {
    out.z[g] = num[g] / total;
    out.w[g] = out.z[g] * (out.v[g] + (1.0 - out.v[g]) /
                                          m.components[static_cast<std::size_t>(g)].eta);
  }
  return out;
}

}  // namespace

TEST_CASE("observed log-likelihood: G = 1, fully observed") {
  MatrixXd x(4, 2);
  x << 0.1, 0.4, -1.0, 2.0, 0.5, 0.5, 2.0, -0.3;
  const Dataset ds = fully_observed(x);
  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  MatrixXd s(2, 2);
  s << 1.2, 0.2, 0.2, 0.9;
  m.components.push_back(component(Vector2d(0.2, 0.3), s, 0.85, 8.0));

  double expected = 0.0;
  for (int i = 0; i < 4; ++i)
    expected += mcn_log_density(x.row(i).transpose(), m.components[0].mu, s,
                                0.85, 8.0);
  CHECK(observed_mcn_log_likelihood(ds, m) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("observed log-likelihood: single observed coordinate marginalizes") {
  MatrixXd x(1, 2);
  x << 1.5, std::numeric_limits<double>::quiet_NaN();
  Dataset ds = fully_observed(x);
  ds.mask(0, 1) = false;

  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  MatrixXd s(2, 2);
  s << 2.0, 0.7, 0.7, 1.0;
  m.components.push_back(component(Vector2d(0.5, -0.5), s, 0.9, 6.0));

  const double expected = mcn_log_density(
      VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 0.5),
      MatrixXd::Constant(1, 1, 2.0), 0.9, 6.0);
  CHECK(observed_mcn_log_likelihood(ds, m) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("observed log-likelihood: 4-point G = 2 against the term-wise oracle") {
  MatrixXd x(4, 2);
  x << 0.2, 0.1, 1.0, -0.5, 4.5, 3.2, 3.8, 2.9;
  const Dataset ds = fully_observed(x);
  const McnmModel m = two_component_fixture();

  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    double total = 0.0;
    for (int g = 0; g < 2; ++g) {
      const auto& c = m.components[static_cast<std::size_t>(g)];
      total += m.pi[g] * std::exp(testutil::mcn_logpdf_oracle(
                             x.row(i).transpose(), c.mu, c.sigma, c.alpha,
                             c.eta));
    }
    expected += std::log(total);
  }
  CHECK(observed_mcn_log_likelihood(ds, m) ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("e_step: single component has unit responsibilities") {
  MatrixXd x(3, 2);
  x << 0, 0, 1, 1, 2, 2;
  const Dataset ds = fully_observed(x);
  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  m.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.9, 3.0));
  const auto st = e_step(ds, m);
  CHECK(st.z_tilde.minCoeff() == 1.0);
  CHECK(st.z_tilde.maxCoeff() == 1.0);
}

TEST_CASE("e_step: v collapses to alpha as eta -> 1") {
  MatrixXd x(2, 2);
  x << 0.3, 0.4, 5.0, 5.0;
  const Dataset ds = fully_observed(x);
  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  m.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.73, 1.0 + 1e-9));
  const auto st = e_step(ds, m);
  for (int i = 0; i < 2; ++i)
    CHECK(st.v_tilde(i, 0) == doctest::Approx(0.73).epsilon(1e-6));
}

TEST_CASE("e_step: three-row fixture matches the brute-force formulas") {
  const Dataset ds = three_row_fixture();
  const McnmModel m = two_component_fixture();
  const auto st = e_step(ds, m);

  for (int i = 0; i < 3; ++i) {
    const BruteRow want = brute_row(ds, i, m);
    for (int g = 0; g < 2; ++g) {
      CHECK(st.z_tilde(i, g) == doctest::Approx(want.z[g]).epsilon(1e-12));
      CHECK(st.v_tilde(i, g) == doctest::Approx(want.v[g]).epsilon(1e-12));
      CHECK(st.w_tilde(i, g) == doctest::Approx(want.w[g]).epsilon(1e-12));
      if (want.has_missing && i == 1) {
        CHECK(st.x_tilde[1][static_cast<std::size_t>(g)][0] ==
              doctest::Approx(want.x_tilde[g]).epsilon(1e-12));
        CHECK(st.cond_cov[1][static_cast<std::size_t>(g)](0, 0) ==
              doctest::Approx(want.cond_var[g]).epsilon(1e-12));
        const double xxt = st.xxt_tilde(1, g)(0, 0);
        CHECK(xxt == doctest::Approx(want.x_tilde[g] * want.x_tilde[g] +
                                     want.cond_var[g])
                         .epsilon(1e-12));
      }
    }
  }
  // Fully observed rows carry no conditional statistics.
  CHECK(st.x_tilde[0].empty());
  CHECK(st.x_tilde[2].empty());
}

TEST_CASE("e_step invariants: row sums, ranges, weight identity") {
  const Dataset ds = three_row_fixture();
  const McnmModel m = two_component_fixture();
  const auto st = e_step(ds, m);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(st.z_tilde.row(i).sum() - 1.0) < 1e-10);
    for (int g = 0; g < 2; ++g) {
      CHECK(st.z_tilde(i, g) >= 0.0);
      CHECK(st.z_tilde(i, g) <= 1.0);
      CHECK(st.v_tilde(i, g) >= 0.0);
      CHECK(st.v_tilde(i, g) <= 1.0);
      const double eta = m.components[static_cast<std::size_t>(g)].eta;
      CHECK(st.w_tilde(i, g) ==
            st.z_tilde(i, g) *
                (st.v_tilde(i, g) + (1.0 - st.v_tilde(i, g)) / eta));
    }
  }
}

TEST_CASE("e_step: serial and parallel paths agree bitwise") {
  ScenarioConfig scen;
  scen.family = Family::Mcn;
  scen.n = 300;
  scen.seed = 99;
  LabeledDataset lds = generate_scenario(scen);
  AmputationConfig amp;
  amp.prop_rows = 0.4;
  amp.seed = 100;
  lds = ampute(lds, amp);

  const McnmModel m = two_component_fixture();
  const auto a = e_step(lds.data, m);
  const auto b = e_step_serial(lds.data, m);
  CHECK(a.loglik == b.loglik);
  CHECK((a.z_tilde.array() == b.z_tilde.array()).all());
  CHECK((a.v_tilde.array() == b.v_tilde.array()).all());
  CHECK((a.w_tilde.array() == b.w_tilde.array()).all());
  for (std::size_t i = 0; i < a.x_tilde.size(); ++i)
    for (std::size_t g = 0; g < a.x_tilde[i].size(); ++g)
      CHECK((a.x_tilde[i][g].array() == b.x_tilde[i][g].array()).all());
}

TEST_CASE("e_step: a row with zero density everywhere is degenerate") {
  MatrixXd x(2, 2);
  x << 0.0, 0.0, 1e200, 0.0;
  const Dataset ds = fully_observed(x);
  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  m.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.9, 2.0));
  CHECK_THROWS_AS(e_step(ds, m), DegenerateRow);
}

TEST_CASE("cm_step_1: unit weights give the sample mean") {
  MatrixXd x(5, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  EStepState st;
  st.z_tilde = MatrixXd::Constant(5, 1, 1.0);
  st.v_tilde = MatrixXd::Constant(5, 1, 1.0);
  st.w_tilde = MatrixXd::Constant(5, 1, 1.0);
  st.x_tilde.assign(5, {});
  st.cond_cov.assign(5, {});

  McnmModel prev;
  prev.pi = VectorXd::Constant(1, 1.0);
  prev.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.9, 2.0));

  const auto up = cm_step_1(ds, groups, st, prev, FitConfig{});
  CHECK(up.pi[0] == 1.0);
  CHECK(up.mu[0][0] == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(up.mu[0][1] == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(up.alpha[0] == doctest::Approx(1.0 - 1e-6));  // clamped at the top
}

TEST_CASE("cm_step_1: mixing weights sum to one") {
  std::mt19937_64 rng(3);
  MatrixXd x(20, 2);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = norm(rng);
    x(i, 1) = norm(rng) + (i % 2 ? 5.0 : 0.0);
  }
  const Dataset ds = fully_observed(x);
  const McnmModel m = two_component_fixture();
  const auto groups = pattern_groups(ds);
  const auto st = e_step(ds, groups, m);
  const auto up = cm_step_1(ds, groups, st, m, FitConfig{});
  CHECK(up.pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cm_step_1: a component with no mass collapses") {
  MatrixXd x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  EStepState st;
  st.z_tilde.resize(4, 2);
  st.z_tilde.col(0).setConstant(1.0 - 1e-12);
  st.z_tilde.col(1).setConstant(1e-12);
  st.v_tilde = MatrixXd::Constant(4, 2, 1.0);
  st.w_tilde = st.z_tilde;
  st.x_tilde.assign(4, {});
  st.cond_cov.assign(4, {});

  const McnmModel prev = two_component_fixture();
  CHECK_THROWS_AS(cm_step_1(ds, groups, st, prev, FitConfig{}),
                  ComponentCollapse);
}

TEST_CASE("cm_step_1 reduces to the plain mixture update on complete data") {
  // Fixture near the weighted-mean fixed point: after iterating the mean
  // map to convergence with eta pinned at 1 + 1e-9 and alpha near 1, the
  // scatter centering coincides with the freshly updated mean and the
  // update must match a standard weighted Gaussian-mixture step built
  // from explicit inverses.
  MatrixXd x(6, 2);
  x << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 10.0, 10.0, 11.0, 10.0, 10.0, 11.0;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  McnmModel model;
  model.pi = Eigen::Vector2d(0.5, 0.5);
  model.components.push_back(component(Vector2d(0.3, 0.3),
                                       MatrixXd::Identity(2, 2), 1.0 - 1e-9,
                                       1.0 + 1e-9));
  model.components.push_back(component(Vector2d(10.3, 10.3),
                                       MatrixXd::Identity(2, 2), 1.0 - 1e-9,
                                       1.0 + 1e-9));

  FitConfig cfg;
  cfg.alpha_max = 1.0 - 1e-9;  // keep alpha where the fixture pinned it
  for (int it = 0; it < 400; ++it) {
    const auto st = e_step(ds, groups, model);
    const auto up = cm_step_1(ds, groups, st, model, cfg);
    model.pi = up.pi;
    for (int g = 0; g < 2; ++g) {
      model.components[static_cast<std::size_t>(g)].mu = up.mu[static_cast<std::size_t>(g)];
      model.components[static_cast<std::size_t>(g)].sigma = up.sigma[static_cast<std::size_t>(g)];
    }
  }

  const auto st = e_step(ds, groups, model);
  const auto up = cm_step_1(ds, groups, st, model, cfg);

  // Standard weighted mixture M-step from scratch: Gaussian E-step with
  // explicit inverses, then weighted means and scatters about them.
  MatrixXd z(6, 2);
  for (int i = 0; i < 6; ++i) {
    double num[2];
    for (int g = 0; g < 2; ++g) {
      const auto& c = model.components[static_cast<std::size_t>(g)];
      num[g] = model.pi[g] * std::exp(testutil::mn_logpdf_oracle(
                                 x.row(i).transpose(), c.mu, c.sigma));
    }
    z(i, 0) = num[0] / (num[0] + num[1]);
    z(i, 1) = num[1] / (num[0] + num[1]);
  }
  for (int g = 0; g < 2; ++g) {
    const double sz = z.col(g).sum();
    VectorXd mu = VectorXd::Zero(2);
    for (int i = 0; i < 6; ++i) mu += z(i, g) * x.row(i).transpose();
    mu /= sz;
    MatrixXd sig = MatrixXd::Zero(2, 2);
    for (int i = 0; i < 6; ++i) {
      const VectorXd diff = x.row(i).transpose() - mu;
      sig += z(i, g) * (diff * diff.transpose());
    }
    sig /= sz;
    CHECK((up.mu[static_cast<std::size_t>(g)] - mu).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((up.sigma[static_cast<std::size_t>(g)] - sig).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(up.pi[g] == doctest::Approx(sz / 6.0).epsilon(1e-8));
  }
}

TEST_CASE("cm_step_2: no bad mass holds eta and raises the flag") {
  MatrixXd x(3, 2);
  x << 0, 0, 1, 1, 2, 2;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  EStepState st;
  st.z_tilde = MatrixXd::Constant(3, 1, 1.0);
  st.v_tilde = MatrixXd::Constant(3, 1, 1.0);
  st.w_tilde = MatrixXd::Constant(3, 1, 1.0);
  st.x_tilde.assign(3, {});
  st.cond_cov.assign(3, {});

  McnmModel prev;
  prev.pi = VectorXd::Constant(1, 1.0);
  prev.components.push_back(
      component(Vector2d(1, 1), MatrixXd::Identity(2, 2), 0.9, 7.5));

  CmStep1Update s1;
  s1.pi = VectorXd::Constant(1, 1.0);
  s1.alpha = {0.9};
  s1.mu = {Vector2d(1.0, 1.0)};
  s1.sigma = {MatrixXd::Identity(2, 2)};

  const auto s2 = cm_step_2(ds, groups, st, s1, prev, FitConfig{});
  CHECK(s2.eta[0] == 7.5);
  CHECK(s2.no_contamination[0] == 1);
}

TEST_CASE("cm_step_2: one fully bad row gives delta over d") {
  MatrixXd x(1, 2);
  x << 3.0, 4.0;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  EStepState st;
  st.z_tilde = MatrixXd::Constant(1, 1, 1.0);
  st.v_tilde = MatrixXd::Constant(1, 1, 0.0);
  st.w_tilde = MatrixXd::Constant(1, 1, 1.0);  // not used here
  st.x_tilde.assign(1, {});
  st.cond_cov.assign(1, {});

  McnmModel prev;
  prev.pi = VectorXd::Constant(1, 1.0);
  prev.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.9, 2.0));

  CmStep1Update s1;
  s1.pi = VectorXd::Constant(1, 1.0);
  s1.alpha = {0.9};
  s1.mu = {Vector2d(0.0, 0.0)};
  s1.sigma = {MatrixXd::Identity(2, 2)};

  const auto s2 = cm_step_2(ds, groups, st, s1, prev, FitConfig{});
  CHECK(s2.eta[0] == doctest::Approx(25.0 / 2.0).epsilon(1e-12));
  CHECK(s2.no_contamination[0] == 0);
}

TEST_CASE("cm_step_2: mixed four-row fixture against the direct sum") {
  MatrixXd x(4, 2);
  x << 0.5, 0.2, -1.0, 1.0, 2.0, -0.5, 4.0, 4.0;
  const Dataset ds = fully_observed(x);
  const auto groups = pattern_groups(ds);

  EStepState st;
  st.z_tilde.resize(4, 1);
  st.z_tilde << 1.0, 0.8, 0.6, 0.9;
  st.v_tilde.resize(4, 1);
  st.v_tilde << 0.95, 0.7, 0.4, 0.05;
  st.w_tilde = st.z_tilde;  // unused by step 2
  st.x_tilde.assign(4, {});
  st.cond_cov.assign(4, {});

  McnmModel prev;
  prev.pi = VectorXd::Constant(1, 1.0);
  prev.components.push_back(
      component(Vector2d(0, 0), MatrixXd::Identity(2, 2), 0.9, 3.0));

  CmStep1Update s1;
  s1.pi = VectorXd::Constant(1, 1.0);
  s1.alpha = {0.9};
  s1.mu = {Vector2d(0.5, 0.5)};
  MatrixXd sig(2, 2);
  sig << 1.5, 0.4, 0.4, 1.1;
  s1.sigma = {sig};

  double num = 0.0, den = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double zv = st.z_tilde(i, 0) * (1.0 - st.v_tilde(i, 0));
    num += zv * testutil::maha_oracle(x.row(i).transpose(), s1.mu[0], sig);
    den += 2.0 * zv;
  }
  const auto s2 = cm_step_2(ds, groups, st, s1, prev, FitConfig{});
  CHECK(s2.eta[0] == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("fit_mcnm recovers a single Gaussian component") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> norm(0.0, 1.0);
  const int n = 300;
  MatrixXd x(n, 2);
  const Vector2d mu_true(1.5, -2.0);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = mu_true[0] + norm(rng);
    x(i, 1) = mu_true[1] + 2.0 * norm(rng);
  }
  const Dataset ds = fully_observed(x);

  FitConfig cfg;
  cfg.n_starts = 2;
  cfg.seed = 5;
  const auto fit = fit_mcnm(ds, 1, cfg);

  const Vector2d mean = x.colwise().mean().transpose();
  (void)mean;
  for (int j = 0; j < 2; ++j) {
    const double se = std::sqrt(fit.mcnm.components[0].sigma(j, j) / n);
    CHECK(std::abs(fit.mcnm.components[0].mu[j] - mu_true[j]) < 3.0 * se + 0.2);
  }
  CHECK(fit.mcnm.components[0].eta < 2.5);  // essentially no contamination
  for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
    CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - 1e-8);
}

TEST_CASE("fit_mcnm separates two clusters with 10% amputation") {
  ScenarioConfig scen;
  scen.family = Family::Mcn;
  scen.n = 200;
  scen.overlap = Overlap::Far;
  scen.mean_far = 7.0710678118654755;  // centers 10 apart
  scen.mcn_alpha = 1.0 - 1e-9;         // effectively pure Gaussian clusters
  scen.seed = 31;
  LabeledDataset lds = generate_scenario(scen);
  AmputationConfig amp;
  amp.prop_rows = 0.1;
  amp.seed = 32;
  lds = ampute(lds, amp);

  FitConfig cfg;
  cfg.n_starts = 4;
  cfg.seed = 33;
  const auto fit = fit_mcnm(lds.data, 2, cfg);
  CHECK(adjusted_rand_index(fit.labels, lds.true_labels) >= 0.95);
  for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
    CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - 1e-8);
}

TEST_CASE("fit_mcnm matches the complete-data oracle step for step") {
  ScenarioConfig scen;
  scen.family = Family::Mcn;
  scen.n = 60;
  scen.seed = 77;
  const LabeledDataset lds = generate_scenario(scen);
  const Dataset& ds = lds.data;
  const auto groups = pattern_groups(ds);

  FitConfig cfg;
  auto rng = make_rng(derive_seed(cfg.seed, {0}));
  McnmModel model = initial_mcnm_model(ds, 2, cfg, rng, 0);
  testutil::McnmParams oracle = testutil::params_from_model(model);

  for (int it = 0; it < 12; ++it) {
    const auto st = e_step(ds, groups, model);
    const auto s1 = cm_step_1(ds, groups, st, model, cfg);
    const auto s2 = cm_step_2(ds, groups, st, s1, model, cfg);
    model.pi = s1.pi;
    for (int g = 0; g < 2; ++g) {
      auto& c = model.components[static_cast<std::size_t>(g)];
      c.mu = s1.mu[static_cast<std::size_t>(g)];
      c.sigma = s1.sigma[static_cast<std::size_t>(g)];
      c.alpha = s1.alpha[static_cast<std::size_t>(g)];
      c.eta = s2.eta[static_cast<std::size_t>(g)];
    }
    oracle = testutil::complete_ecm_iteration_oracle(
        lds.data.values, oracle, cfg.alpha_min, cfg.alpha_max, cfg.eta_min);

    for (int g = 0; g < 2; ++g) {
      const auto& c = model.components[static_cast<std::size_t>(g)];
      CHECK(std::abs(model.pi[g] - oracle.pi[g]) < 1e-10);
      CHECK(std::abs(c.alpha - oracle.alpha[static_cast<std::size_t>(g)]) < 1e-10);
      CHECK(std::abs(c.eta - oracle.eta[static_cast<std::size_t>(g)]) < 1e-10);
      CHECK((c.mu - oracle.mu[static_cast<std::size_t>(g)]).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((c.sigma - oracle.sigma[static_cast<std::size_t>(g)]).cwiseAbs().maxCoeff() <
            1e-10);
    }
  }
}

TEST_CASE("classify_points rules") {
  MatrixXd z(3, 2), v(3, 2);
  z << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8;
  v << 0.99, 0.1, 0.2, 0.7, 0.3, 0.5;
  const auto cls = classify_points(z, v);
  CHECK(cls.labels == std::vector<int>{1, 1, 2});
  CHECK(cls.outlier_flag[0] == 0);  // v = 0.99
  CHECK(cls.outlier_flag[1] == 1);  // tie -> label 1, v = 0.2
  CHECK(cls.outlier_flag[2] == 0);  // v exactly 0.5 is not an outlier
}

TEST_CASE("label swap leaves the observed log-likelihood unchanged") {
  MatrixXd x(5, 2);
  x << 0, 0, 1, 1, 4, 3, 5, 4, 2, 2;
  const Dataset ds = fully_observed(x);
  McnmModel m = two_component_fixture();
  const double a = observed_mcn_log_likelihood(ds, m);
  std::swap(m.components[0], m.components[1]);
  std::swap(m.pi[0], m.pi[1]);
  const double b = observed_mcn_log_likelihood(ds, m);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("row permutation permutes the state and keeps the model") {
  ScenarioConfig scen;
  scen.family = Family::Mcn;
  scen.n = 120;
  scen.overlap = Overlap::Far;
  scen.seed = 13;
  LabeledDataset lds = generate_scenario(scen);
  AmputationConfig amp;
  amp.prop_rows = 0.2;
  amp.seed = 14;
  lds = ampute(lds, amp);
  const Dataset& ds = lds.data;

  std::mt19937_64 prng(55);
  std::vector<int> perm(static_cast<std::size_t>(ds.n()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), prng);
  Dataset permuted = ds;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    permuted.values.row(i) = ds.values.row(perm[static_cast<std::size_t>(i)]);
    permuted.mask.row(i) = ds.mask.row(perm[static_cast<std::size_t>(i)]);
  }

  FitConfig cfg;
  cfg.n_starts = 3;
  cfg.seed = 15;
  const auto fa = fit_mcnm(ds, 2, cfg);
  const auto fb = fit_mcnm(permuted, 2, cfg);

  // Components of the two fits may come out in either order; match by mean.
  std::vector<int> map(2);
  for (int g = 0; g < 2; ++g) {
    const auto& mu = fb.mcnm.components[static_cast<std::size_t>(g)].mu;
    map[static_cast<std::size_t>(g)] =
        (mu - fa.mcnm.components[0].mu).norm() <
                (mu - fa.mcnm.components[1].mu).norm()
            ? 0
            : 1;
  }
  CHECK(map[0] != map[1]);
  for (int g = 0; g < 2; ++g) {
    const auto& cb = fb.mcnm.components[static_cast<std::size_t>(g)];
    const auto& ca = fa.mcnm.components[static_cast<std::size_t>(map[static_cast<std::size_t>(g)])];
    CHECK((cb.mu - ca.mu).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((cb.sigma - ca.sigma).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(cb.alpha - ca.alpha) < 1e-6);
    CHECK(std::abs(cb.eta - ca.eta) < 1e-5);
  }
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const int src = perm[static_cast<std::size_t>(i)];
    for (int g = 0; g < 2; ++g) {
      CHECK(fb.state.z_tilde(i, g) ==
            doctest::Approx(fa.state.z_tilde(src, map[static_cast<std::size_t>(g)]))
                .epsilon(1e-6));
      CHECK(fb.state.v_tilde(i, g) ==
            doctest::Approx(fa.state.v_tilde(src, map[static_cast<std::size_t>(g)]))
                .epsilon(1e-6));
    }
  }
}

TEST_CASE("v decreases strictly as the distance grows") {
  const MatrixXd s = MatrixXd::Identity(2, 2);
  const Vector2d mu(0, 0);
  double prev = 1.0;
  for (double t = 0.5; t <= 5.0; t += 0.5) {
    const Vector2d x(t, 0.0);
    const double lg = mn_log_density(x, mu, s);
    const double lmcn = mcn_log_density(x, mu, s, 0.9, 10.0);
    const double v = std::exp(std::log(0.9) + lg - lmcn);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("diagonal scale imputes the component mean") {
  MatrixXd x(2, 2);
  x << 0.0, 0.0, 5.0, std::numeric_limits<double>::quiet_NaN();
  Dataset ds = fully_observed(x);
  ds.mask(1, 1) = false;

  McnmModel m;
  m.pi = VectorXd::Constant(1, 1.0);
  MatrixXd s = MatrixXd::Zero(2, 2);
  s.diagonal() << 2.0, 3.0;
  m.components.push_back(component(Vector2d(1.0, -4.0), s, 0.9, 5.0));

  const auto st = e_step(ds, m);
  CHECK(st.x_tilde[1][0][0] == doctest::Approx(-4.0).epsilon(1e-14));
  const auto imputed = impute_dataset(ds, m);
  CHECK(imputed.values(1, 1) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(imputed.mask.all());
  CHECK(imputed.values(0, 0) == 0.0);
}

TEST_CASE("fit_mcnm is deterministic for a fixed seed") {
  ScenarioConfig scen;
  scen.family = Family::Mcn;
  scen.n = 100;
  scen.seed = 8;
  LabeledDataset lds = generate_scenario(scen);
  AmputationConfig amp;
  amp.prop_rows = 0.3;
  amp.seed = 9;
  lds = ampute(lds, amp);

  FitConfig cfg;
  cfg.n_starts = 3;
  cfg.seed = 10;
  const auto a = fit_mcnm(lds.data, 2, cfg);
  const auto b = fit_mcnm(lds.data, 2, cfg);
  CHECK(a.loglik() == b.loglik());
  CHECK(a.labels == b.labels);
  CHECK(a.outlier_flag == b.outlier_flag);
  for (int g = 0; g < 2; ++g) {
    CHECK((a.mcnm.components[static_cast<std::size_t>(g)].mu.array() ==
           b.mcnm.components[static_cast<std::size_t>(g)].mu.array())
              .all());
    CHECK((a.mcnm.components[static_cast<std::size_t>(g)].sigma.array() ==
           b.mcnm.components[static_cast<std::size_t>(g)].sigma.array())
              .all());
  }
}

TEST_CASE("fit_mcnm argument checks") {
  MatrixXd x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  const Dataset ds = fully_observed(x);
  CHECK_THROWS_AS(fit_mcnm(ds, 0, FitConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(fit_mcnm(ds, 2, FitConfig{}), std::invalid_argument);  // n <= G*d
}

TEST_CASE("parameter count enters the BIC") {
  CHECK(mcnm_parameter_count(2, 2) == 1 + 2 * (2 + 3 + 2));
  CHECK(mcnm_parameter_count(1, 3) == 0 + 1 * (3 + 6 + 2));
}
