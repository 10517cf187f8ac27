#pragma once

#include <Eigen/Dense>
#include <span>

#include "cnmix/errors.hpp"

namespace cnmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Coefficient of the diagonal ridge trace(S)/d added once when a Cholesky
/// factorization fails.
inline constexpr double kDefaultRidge = 1e-8;

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Nonnegative squared distance (x-mu)' S^-1 (x-mu); zero iff x == mu.
struct SquaredMahalanobis {
  double value = 0.0;
};

/// Mean and covariance of the missing block of a partitioned normal,
/// conditional on the observed block.
struct ConditionalNormal {
  VectorXd mean;
  MatrixXd covariance;
};

/// Lower-triangular Cholesky factor of an SPD matrix. If the first
/// factorization fails, one retry is made with ridge_coeff * trace/d added
/// to the diagonal; a second failure throws SingularCovariance.
class CholeskyFactor {
 public:
  static CholeskyFactor compute(const MatrixXd& sigma,
                                double ridge_coeff = kDefaultRidge);

  double log_det() const { return log_det_; }
  bool ridged() const { return ridged_; }

  double squared_mahalanobis(const VectorXd& centered) const {
    return llt_.matrixL().solve(centered).squaredNorm();
  }

  MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }

  const Eigen::LLT<MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::LLT<MatrixXd> llt_;
  double log_det_ = 0.0;
  bool ridged_ = false;
};

/// ln sum_i exp(terms[i]), overflow-safe via max shift. Exact for a single
/// term; returns -inf when every term is -inf (zero total density).
double log_sum_exp(std::span<const double> terms);

/// Log density of a multivariate normal at x.
double mn_log_density(const VectorXd& x, const VectorXd& mu,
                      const MatrixXd& sigma,
                      double ridge_coeff = kDefaultRidge);

/// Log density of a contaminated normal: a two-part normal mixture sharing
/// the mean, the minority part with covariance inflated by eta. Evaluated
/// in log space throughout. eta == 1 is accepted and collapses to the
/// plain normal.
double mcn_log_density(const VectorXd& x, const VectorXd& mu,
                       const MatrixXd& sigma, double alpha, double eta,
                       double ridge_coeff = kDefaultRidge);

SquaredMahalanobis squared_mahalanobis(const VectorXd& x, const VectorXd& mu,
                                       const MatrixXd& sigma,
                                       double ridge_coeff = kDefaultRidge);

/// Distribution of the unobserved coordinates given the observed ones.
/// observed_idx must be sorted, strictly increasing, nonempty and a proper
/// subset of {0..d-1}; x_obs holds the observed values in the same order.
ConditionalNormal conditional_normal(const VectorXd& mu, const MatrixXd& sigma,
                                     std::span<const int> observed_idx,
                                     const VectorXd& x_obs,
                                     double ridge_coeff = kDefaultRidge);

// Index-set gathers used by the partition machinery and the fitters.

inline VectorXd gather(const VectorXd& v, std::span<const int> idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

inline VectorXd gather_row(const MatrixXd& m, Eigen::Index row,
                           std::span<const int> idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = m(row, idx[k]);
  return out;
}

inline MatrixXd gather_block(const MatrixXd& m, std::span<const int> rows,
                             std::span<const int> cols) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
  return out;
}

// Special functions used by the t baseline and its outlier cutoff.

double digamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

inline double chi_square_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

namespace detail {

/// Blocks of (mu, Sigma) partitioned by an observed/missing split, with
/// everything the per-row kernels need factored once per pattern:
/// the Cholesky of Sigma^oo, the regression gain Sigma^mo (Sigma^oo)^-1,
/// and the conditional covariance of the missing block.
struct PartitionedGaussian {
  VectorXd mu_obs;
  VectorXd mu_mis;
  CholeskyFactor chol_oo;
  MatrixXd gain;      // d_m x d_o
  MatrixXd cond_cov;  // d_m x d_m

  static PartitionedGaussian build(const VectorXd& mu, const MatrixXd& sigma,
                                   std::span<const int> observed,
                                   std::span<const int> missing,
                                   double ridge_coeff);
};

}  // namespace detail

}  // namespace cnmix
