#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cnmix/dataset.hpp"

namespace cnmix {

/// One contaminated-normal mixture component: location mu, scale sigma,
/// proportion of good points alpha, degree of contamination eta.
struct McnComponent {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double alpha = 0.95;
  double eta = 1.1;
};

struct McnmModel {
  Eigen::VectorXd pi;
  std::vector<McnComponent> components;

  int g_count() const { return static_cast<int>(components.size()); }
  int dim() const {
    return components.empty() ? 0 : static_cast<int>(components[0].mu.size());
  }
};

/// One multivariate-t component for the baseline fitter.
struct TComponent {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double nu = 10.0;
};

struct TMixModel {
  Eigen::VectorXd pi;
  std::vector<TComponent> components;

  int g_count() const { return static_cast<int>(components.size()); }
  int dim() const {
    return components.empty() ? 0 : static_cast<int>(components[0].mu.size());
  }
};

struct FitConfig {
  double tol = 1e-8;       // relative log-likelihood change
  int max_iter = 500;
  int n_starts = 10;       // start 0 is k-means based, the rest random-soft
  std::uint64_t seed = 1;
  double alpha_min = 0.5;
  double alpha_max = 1.0 - 1e-6;
  double eta_min = 1.001;
  double ridge = 1e-8;           // Cholesky repair coefficient
  double collapse_frac = 1e-6;   // component collapse threshold, fraction of n
  // A start aborts when a component's scale matrix is numerically rank
  // deficient (smallest/largest eigenvalue below this), the same way a
  // vanishing effective count aborts it: the likelihood is unbounded along
  // such a collapse and the run would only chase it.
  double degeneracy_tol = 1e-12;
  // t baseline only
  double nu_min = 2.0001;
  double nu_max = 200.0;
  double fix_nu = 0.0;           // > 0 pins the degrees of freedom
  double t_outlier_quantile = 0.975;
};

/// Expectations computed by one E-step. x_tilde / cond_cov are empty for
/// fully observed rows; the second-moment expectation of the missing block
/// is x_tilde x_tilde' + cond_cov. For the t baseline, v_tilde holds the
/// robustness weights u instead of good-point probabilities.
struct EStepState {
  Eigen::MatrixXd z_tilde;  // n x G responsibilities, rows sum to 1
  Eigen::MatrixXd v_tilde;  // n x G
  Eigen::MatrixXd w_tilde;  // n x G, z * (v + (1-v)/eta) (or z * u)
  std::vector<std::vector<Eigen::VectorXd>> x_tilde;   // [row][g]
  std::vector<std::vector<Eigen::MatrixXd>> cond_cov;  // [row][g]
  Eigen::VectorXd row_loglik;
  double loglik = 0.0;

  Eigen::MatrixXd xxt_tilde(int row, int g) const {
    const auto& xt = x_tilde[static_cast<std::size_t>(row)][static_cast<std::size_t>(g)];
    return xt * xt.transpose() + cond_cov[static_cast<std::size_t>(row)][static_cast<std::size_t>(g)];
  }
};

enum class ModelFamily { Mcnm, Tmix };

inline const char* model_family_name(ModelFamily f) {
  return f == ModelFamily::Mcnm ? "mcnm" : "tmix";
}

struct FitResult {
  ModelFamily family = ModelFamily::Mcnm;
  McnmModel mcnm;  // valid when family == Mcnm
  TMixModel tmix;  // valid when family == Tmix

  EStepState state;
  std::vector<double> loglik_trace;  // one entry per E-step, length n_iter + 1
  std::vector<int> labels;           // 1-based component labels
  std::vector<std::uint8_t> outlier_flag;
  Dataset imputed;
  int n_iter = 0;
  bool converged = false;
  double bic = 0.0;
  std::vector<std::uint8_t> no_contamination;  // per component; mcnm only
  std::vector<std::uint8_t> nu_clamped;        // per component; tmix only
  std::vector<std::string> warnings;

  double loglik() const {
    return loglik_trace.empty() ? 0.0 : loglik_trace.back();
  }
};

}  // namespace cnmix
