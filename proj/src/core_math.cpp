#include "cnmix/core_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cnmix {

CholeskyFactor CholeskyFactor::compute(const MatrixXd& sigma, double ridge_coeff) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
    throw std::invalid_argument("CholeskyFactor: matrix must be square and nonempty");

  CholeskyFactor f;
  f.llt_.compute(sigma);
  if (f.llt_.info() != Eigen::Success ||
      f.llt_.matrixLLT().diagonal().minCoeff() <= 0.0) {
    const double ridge =
        ridge_coeff * sigma.trace() / static_cast<double>(sigma.rows());
    MatrixXd repaired = sigma;
    repaired.diagonal().array() += ridge;
    f.llt_.compute(repaired);
    f.ridged_ = true;
    if (f.llt_.info() != Eigen::Success ||
        f.llt_.matrixLLT().diagonal().minCoeff() <= 0.0)
      throw SingularCovariance(
          "covariance not positive definite after ridge repair");
  }
  f.log_det_ = 2.0 * f.llt_.matrixLLT().diagonal().array().log().sum();
  return f;
}

double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms)
    if (t > m) m = t;
  if (std::isinf(m)) return m;  // all -inf, or any +inf dominates
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

double mn_log_density(const VectorXd& x, const VectorXd& mu,
                      const MatrixXd& sigma, double ridge_coeff) {
  if (x.size() != mu.size() || sigma.rows() != x.size())
    throw std::invalid_argument("mn_log_density: dimension mismatch");
  const CholeskyFactor f = CholeskyFactor::compute(sigma, ridge_coeff);
  const double delta = f.squared_mahalanobis(x - mu);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + f.log_det() + delta);
}

double mcn_log_density(const VectorXd& x, const VectorXd& mu,
                       const MatrixXd& sigma, double alpha, double eta,
                       double ridge_coeff) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("mcn_log_density: alpha must lie in (0,1)");
  if (!(eta >= 1.0))
    throw std::invalid_argument("mcn_log_density: eta must be >= 1");
  if (x.size() != mu.size() || sigma.rows() != x.size())
    throw std::invalid_argument("mcn_log_density: dimension mismatch");

  const double d = static_cast<double>(x.size());
  const CholeskyFactor f = CholeskyFactor::compute(sigma, ridge_coeff);
  const double delta = f.squared_mahalanobis(x - mu);
  const double lg = -0.5 * (d * kLog2Pi + f.log_det() + delta);
  if (eta == 1.0) return lg;  // both parts coincide
  const double lb =
      -0.5 * (d * kLog2Pi + f.log_det() + d * std::log(eta) + delta / eta);
  const double terms[2] = {std::log(alpha) + lg, std::log1p(-alpha) + lb};
  return log_sum_exp(terms);
}

SquaredMahalanobis squared_mahalanobis(const VectorXd& x, const VectorXd& mu,
                                       const MatrixXd& sigma,
                                       double ridge_coeff) {
  if (x.size() != mu.size() || sigma.rows() != x.size())
    throw std::invalid_argument("squared_mahalanobis: dimension mismatch");
  const CholeskyFactor f = CholeskyFactor::compute(sigma, ridge_coeff);
  return SquaredMahalanobis{f.squared_mahalanobis(x - mu)};
}

ConditionalNormal conditional_normal(const VectorXd& mu, const MatrixXd& sigma,
                                     std::span<const int> observed_idx,
                                     const VectorXd& x_obs,
                                     double ridge_coeff) {
  const int d = static_cast<int>(mu.size());
  if (sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("conditional_normal: sigma shape mismatch");
  if (observed_idx.empty())
    throw std::invalid_argument("conditional_normal: observed set is empty");
  if (static_cast<Eigen::Index>(observed_idx.size()) != x_obs.size())
    throw std::invalid_argument("conditional_normal: x_obs length mismatch");
  for (std::size_t k = 0; k < observed_idx.size(); ++k) {
    if (observed_idx[k] < 0 || observed_idx[k] >= d)
      throw std::invalid_argument("conditional_normal: index out of range");
    if (k > 0 && observed_idx[k] <= observed_idx[k - 1])
      throw std::invalid_argument(
          "conditional_normal: observed_idx must be strictly increasing");
  }

  std::vector<int> missing;
  std::size_t cursor = 0;
  for (int j = 0; j < d; ++j) {
    if (cursor < observed_idx.size() && observed_idx[cursor] == j)
      ++cursor;
    else
      missing.push_back(j);
  }
  if (missing.empty())
    throw std::invalid_argument(
        "conditional_normal: no missing coordinates to condition on");

  const auto part = detail::PartitionedGaussian::build(
      mu, sigma, observed_idx, missing, ridge_coeff);
  ConditionalNormal out;
  out.mean = part.mu_mis + part.gain * (x_obs - part.mu_obs);
  out.covariance = part.cond_cov;
  return out;
}

namespace detail {

PartitionedGaussian PartitionedGaussian::build(const VectorXd& mu,
                                               const MatrixXd& sigma,
                                               std::span<const int> observed,
                                               std::span<const int> missing,
                                               double ridge_coeff) {
  PartitionedGaussian p;
  p.mu_obs = gather(mu, observed);
  p.chol_oo = CholeskyFactor::compute(gather_block(sigma, observed, observed),
                                      ridge_coeff);
  if (!missing.empty()) {
    p.mu_mis = gather(mu, missing);
    const MatrixXd s_om = gather_block(sigma, observed, missing);
    p.gain = p.chol_oo.solve(s_om).transpose();
    MatrixXd c = gather_block(sigma, missing, missing) - p.gain * s_om;
    p.cond_cov = 0.5 * (c + c.transpose());
  }
  return p;
}

}  // namespace detail

double digamma(double x) {
  if (std::isnan(x) || x <= 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion, good to ~1e-12 for x >= 10.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

namespace {

// Series expansion of P(a,x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) by modified Lentz, valid for x >= a + 1.
double gamma_q_cont_frac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("regularized_gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cont_frac(a, x);
}

}  // namespace cnmix
