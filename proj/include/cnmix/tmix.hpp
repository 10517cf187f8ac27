#pragma once

#include <random>
#include <vector>

#include "cnmix/core_math.hpp"
#include "cnmix/dataset.hpp"
#include "cnmix/model.hpp"

namespace cnmix {

/// Sum over rows of the log marginal mixture density of the observed
/// coordinates under a t mixture.
double observed_t_log_likelihood(const Dataset& ds, const TMixModel& model,
                                 double ridge_coeff = kDefaultRidge);

/// E-step for the t mixture: responsibilities z, robustness weights
/// u = (nu + d_obs) / (nu + delta) stored in v_tilde, z*u in w_tilde, and
/// conditional means/covariances of missing blocks. Same determinism
/// contract as the contaminated-normal E-step.
EStepState t_e_step(const Dataset& ds, const TMixModel& model,
                    double ridge_coeff = kDefaultRidge);
EStepState t_e_step_serial(const Dataset& ds, const TMixModel& model,
                           double ridge_coeff = kDefaultRidge);
EStepState t_e_step(const Dataset& ds, const std::vector<PatternGroup>& groups,
                    const TMixModel& model,
                    double ridge_coeff = kDefaultRidge);
EStepState t_e_step_serial(const Dataset& ds,
                           const std::vector<PatternGroup>& groups,
                           const TMixModel& model,
                           double ridge_coeff = kDefaultRidge);

/// EM fit of a t mixture to incomplete data. Degrees of freedom are
/// updated per component by bracketed root-finding of the standard
/// digamma equation on [nu_min, nu_max] unless cfg.fix_nu pins them.
/// The outlier flags use a chi-square reference cutoff on the squared
/// distance of the imputed-stacked vector to the assigned component
/// (cfg.t_outlier_quantile), since the model itself carries no posterior
/// good/bad variable.
FitResult fit_tmix(const Dataset& ds, int g, const FitConfig& cfg = {});

int tmix_parameter_count(int g, int d);

namespace detail {

/// Left side of the dof equation whose root is the nu update; decreasing
/// in nu. `constant` collects the data-dependent terms.
double nu_equation(double nu, double constant);

/// Bisection solve on [nu_min, nu_max]; clamps to the nearest bound with
/// `clamped = true` when the bracket does not contain a sign change.
double solve_nu(double constant, double nu_min, double nu_max, bool& clamped);

}  // namespace detail

}  // namespace cnmix
