#pragma once

#include <random>
#include <vector>

#include "cnmix/core_math.hpp"
#include "cnmix/dataset.hpp"
#include "cnmix/model.hpp"

namespace cnmix {

/// Sum over rows of the log marginal mixture density of the observed
/// coordinates. The marginal of a contaminated normal over a coordinate
/// subset is a contaminated normal with the same alpha and eta and
/// sub-blocked mu, sigma, so only observed blocks are ever factored.
/// This is the quantity the fitter monitors and ascends.
double observed_mcn_log_likelihood(const Dataset& ds, const McnmModel& model,
                                   double ridge_coeff = kDefaultRidge);

/// One E-step: responsibilities z, good-point probabilities v, combined
/// weights w, conditional means of missing blocks and their covariances,
/// and the observed log-likelihood of `model`.
///
/// Per-row work runs under OpenMP when available; every row writes only
/// its own slots and the final log-likelihood reduction is a fixed-order
/// serial sum, so results are bitwise independent of the thread count.
EStepState e_step(const Dataset& ds, const McnmModel& model,
                  double ridge_coeff = kDefaultRidge);

/// Single-threaded reference implementation of e_step; kept for tests and
/// the kernel benchmark.
EStepState e_step_serial(const Dataset& ds, const McnmModel& model,
                         double ridge_coeff = kDefaultRidge);

// Overloads reusing a precomputed pattern grouping across iterations.
EStepState e_step(const Dataset& ds, const std::vector<PatternGroup>& groups,
                  const McnmModel& model, double ridge_coeff = kDefaultRidge);
EStepState e_step_serial(const Dataset& ds,
                         const std::vector<PatternGroup>& groups,
                         const McnmModel& model,
                         double ridge_coeff = kDefaultRidge);

/// First conditional maximization: updates pi, alpha (clamped), mu and
/// sigma with eta held fixed. Scatter matrices are centered on the
/// previous-iteration means; the centered outer products carry the
/// combined weights w while the conditional-covariance correction of the
/// missing block carries the responsibility z (the bad part's inflated
/// covariance cancels its own 1/eta discount). Each sigma is symmetrized,
/// ridge-repaired if needed, and checked against the degeneracy floor.
struct CmStep1Update {
  Eigen::VectorXd pi;
  std::vector<double> alpha;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> sigma;
};

CmStep1Update cm_step_1(const Dataset& ds,
                        const std::vector<PatternGroup>& groups,
                        const EStepState& state, const McnmModel& prev,
                        const FitConfig& cfg);

/// Second conditional maximization: updates eta from the imputed-stacked
/// vectors against the step-1 mu and sigma, clamped to >= eta_min. A
/// denominator below 1e-12 means no bad mass anywhere; eta is then held
/// and the component's no-contamination flag is set.
struct CmStep2Update {
  std::vector<double> eta;
  std::vector<std::uint8_t> no_contamination;
};

CmStep2Update cm_step_2(const Dataset& ds,
                        const std::vector<PatternGroup>& groups,
                        const EStepState& state, const CmStep1Update& step1,
                        const McnmModel& prev, const FitConfig& cfg);

/// Initial model for a given start index: start 0 mean-imputes and runs
/// k-means++ for hard assignments, later starts draw random soft
/// assignments; both then take weighted moments, alpha = 0.95, eta = 1.1.
McnmModel initial_mcnm_model(const Dataset& ds, int g, const FitConfig& cfg,
                             std::mt19937_64& rng, int start_index);

/// Full ECM fit with multiple starts; keeps the run with the highest
/// final observed log-likelihood. Throws FitFailure when every start
/// aborts, with per-start diagnostics in the message.
FitResult fit_mcnm(const Dataset& ds, int g, const FitConfig& cfg = {});

struct Classification {
  std::vector<int> labels;  // 1-based, ties broken toward the lowest label
  std::vector<std::uint8_t> outlier_flag;  // v at the assigned label < 0.5
};

Classification classify_points(const Eigen::MatrixXd& z_tilde,
                               const Eigen::MatrixXd& v_tilde);
Classification classify_points(const FitResult& result);

/// Copy of ds with missing cells replaced by the conditional means of the
/// assigned (1-based) component; the mask becomes all-observed.
Dataset fill_missing(const Dataset& ds, const EStepState& state,
                     const std::vector<int>& labels);

/// Imputation under a saved model: one E-step, hard assignment, fill.
Dataset impute_dataset(const Dataset& ds, const McnmModel& model,
                       double ridge_coeff = kDefaultRidge);

/// Free parameter count: (G-1) mixing weights plus, per component, d for
/// the mean, d(d+1)/2 for the scale, and alpha and eta.
int mcnm_parameter_count(int g, int d);

}  // namespace cnmix
