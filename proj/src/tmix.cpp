#include "cnmix/tmix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "cnmix/ecm_mcnm.hpp"
#include "cnmix/rng.hpp"

namespace cnmix {

namespace {

struct TCompBlocks {
  detail::PartitionedGaussian part;
  double log_pi = 0.0;
  double nu = 0.0;
  double log_norm = 0.0;  // lgamma((nu+d_o)/2) - lgamma(nu/2) - (d_o/2) ln(nu pi)
};

std::vector<std::vector<TCompBlocks>> build_blocks(
    const TMixModel& model, const std::vector<PatternGroup>& groups,
    double ridge_coeff) {
  const int g_count = model.g_count();
  std::vector<std::vector<TCompBlocks>> blocks(static_cast<std::size_t>(g_count));
  for (int g = 0; g < g_count; ++g) {
    const auto& comp = model.components[static_cast<std::size_t>(g)];
    if (!(comp.nu > 0.0))
      throw std::invalid_argument("component " + std::to_string(g + 1) +
                                  ": nu must be positive");
    for (const auto& grp : groups) {
      TCompBlocks b;
      try {
        b.part = detail::PartitionedGaussian::build(
            comp.mu, comp.sigma, grp.observed_idx, grp.missing_idx,
            ridge_coeff);
      } catch (const SingularCovariance& e) {
        throw SingularCovariance("component " + std::to_string(g + 1) +
                                 ": " + e.what());
      }
      const double dobs = static_cast<double>(grp.observed_idx.size());
      b.log_pi = std::log(model.pi[g]);
      b.nu = comp.nu;
      b.log_norm = std::lgamma(0.5 * (comp.nu + dobs)) -
                   std::lgamma(0.5 * comp.nu) -
                   0.5 * dobs * std::log(comp.nu * M_PI);
      blocks[static_cast<std::size_t>(g)].push_back(std::move(b));
    }
  }
  return blocks;
}

std::vector<int> row_to_group(Eigen::Index n,
                              const std::vector<PatternGroup>& groups) {
  std::vector<int> map(static_cast<std::size_t>(n), -1);
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (int row : groups[gi].rows) map[static_cast<std::size_t>(row)] = static_cast<int>(gi);
  return map;
}

EStepState t_e_step_impl(const Dataset& ds,
                         const std::vector<PatternGroup>& groups,
                         const TMixModel& model, double ridge_coeff,
                         bool parallel) {
  const Eigen::Index n = ds.n();
  const int g_count = model.g_count();
  if (g_count < 1 || model.pi.size() != g_count)
    throw std::invalid_argument("t_e_step: malformed model");
  if (model.dim() != static_cast<int>(ds.d()))
    throw std::invalid_argument("t_e_step: model dimension mismatch");

  const auto blocks = build_blocks(model, groups, ridge_coeff);
  const auto row_group = row_to_group(n, groups);

  EStepState st;
  st.z_tilde.resize(n, g_count);
  st.v_tilde.resize(n, g_count);
  st.w_tilde.resize(n, g_count);
  st.x_tilde.assign(static_cast<std::size_t>(n), {});
  st.cond_cov.assign(static_cast<std::size_t>(n), {});
  st.row_loglik.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])]
             .missing_idx.empty()) {
      st.x_tilde[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(g_count));
      st.cond_cov[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(g_count));
    }
  }
  std::vector<std::uint8_t> degenerate(static_cast<std::size_t>(n), 0);

  const auto row_kernel = [&](int i) {
    const int gi = row_group[static_cast<std::size_t>(i)];
    const auto& grp = groups[static_cast<std::size_t>(gi)];
    const bool has_missing = !grp.missing_idx.empty();
    const VectorXd xo = gather_row(ds.values, i, grp.observed_idx);
    const double dobs = static_cast<double>(xo.size());

    Eigen::VectorXd lpost(g_count);
    for (int g = 0; g < g_count; ++g) {
      const auto& b = blocks[static_cast<std::size_t>(g)][static_cast<std::size_t>(gi)];
      const VectorXd r = xo - b.part.mu_obs;
      const double delta = b.part.chol_oo.squared_mahalanobis(r);
      const double lt = b.log_norm - 0.5 * b.part.chol_oo.log_det() -
                        0.5 * (b.nu + dobs) * std::log1p(delta / b.nu);
      lpost[g] = b.log_pi + lt;
      st.v_tilde(i, g) = (b.nu + dobs) / (b.nu + delta);
      if (has_missing) {
        st.x_tilde[static_cast<std::size_t>(i)][static_cast<std::size_t>(g)] =
            b.part.mu_mis + b.part.gain * r;
        st.cond_cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(g)] =
            b.part.cond_cov;
      }
    }

    const double lse =
        log_sum_exp(std::span<const double>(lpost.data(), static_cast<std::size_t>(g_count)));
    if (std::isinf(lse) || std::isnan(lse)) {
      degenerate[static_cast<std::size_t>(i)] = 1;
      st.row_loglik[i] = lse;
      return;
    }
    st.row_loglik[i] = lse;
    double total = 0.0;
    for (int g = 0; g < g_count; ++g) {
      const double t = std::exp(lpost[g] - lse);
      st.z_tilde(i, g) = t;
      total += t;
    }
    for (int g = 0; g < g_count; ++g) {
      st.z_tilde(i, g) /= total;
      st.w_tilde(i, g) = st.z_tilde(i, g) * st.v_tilde(i, g);
    }
  };

  if (parallel) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < static_cast<int>(n); ++i) row_kernel(i);
  } else {
    for (int i = 0; i < static_cast<int>(n); ++i) row_kernel(i);
  }

  for (Eigen::Index i = 0; i < n; ++i)
    if (degenerate[static_cast<std::size_t>(i)])
      throw DegenerateRow("row " + std::to_string(i + 1) +
                          ": zero total mixture density");

  double loglik = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loglik += st.row_loglik[i];
  st.loglik = loglik;
  return st;
}

VectorXd stacked_row(const Dataset& ds, const PatternGroup& grp, int row,
                     const EStepState& state, int g) {
  VectorXd out(ds.d());
  for (int j : grp.observed_idx) out[j] = ds.values(row, j);
  if (!grp.missing_idx.empty()) {
    const auto& xt = state.x_tilde[static_cast<std::size_t>(row)][static_cast<std::size_t>(g)];
    for (std::size_t k = 0; k < grp.missing_idx.size(); ++k)
      out[grp.missing_idx[k]] = xt[static_cast<Eigen::Index>(k)];
  }
  return out;
}

// Same repair-and-degeneracy policy as the contaminated-normal fit.
MatrixXd make_spd(MatrixXd m, double ridge_coeff, double degeneracy_tol) {
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success ||
      llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
    const double ridge = ridge_coeff * m.trace() / static_cast<double>(m.rows());
    m.diagonal().array() += ridge;
    llt.compute(m);
    if (llt.info() != Eigen::Success ||
        llt.matrixLLT().diagonal().minCoeff() <= 0.0)
      throw SingularCovariance(
          "scatter update not positive definite after ridge repair");
  }
  if (degeneracy_tol > 0.0) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(m,
                                                     Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > degeneracy_tol * hi))
      throw ComponentCollapse("scale matrix numerically rank deficient");
  }
  return m;
}

}  // namespace

double observed_t_log_likelihood(const Dataset& ds, const TMixModel& model,
                                 double ridge_coeff) {
  const auto groups = pattern_groups(ds);
  const auto blocks = build_blocks(model, groups, ridge_coeff);
  const int g_count = model.g_count();

  double loglik = 0.0;
  Eigen::VectorXd lpost(g_count);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    const double dobs = static_cast<double>(grp.observed_idx.size());
    for (int row : grp.rows) {
      const VectorXd xo = gather_row(ds.values, row, grp.observed_idx);
      for (int g = 0; g < g_count; ++g) {
        const auto& b = blocks[static_cast<std::size_t>(g)][gi];
        const double delta =
            b.part.chol_oo.squared_mahalanobis(xo - b.part.mu_obs);
        lpost[g] = b.log_pi + b.log_norm - 0.5 * b.part.chol_oo.log_det() -
                   0.5 * (b.nu + dobs) * std::log1p(delta / b.nu);
      }
      loglik += log_sum_exp(
          std::span<const double>(lpost.data(), static_cast<std::size_t>(g_count)));
    }
  }
  return loglik;
}

EStepState t_e_step(const Dataset& ds, const TMixModel& model,
                    double ridge_coeff) {
  return t_e_step_impl(ds, pattern_groups(ds), model, ridge_coeff, true);
}

EStepState t_e_step_serial(const Dataset& ds, const TMixModel& model,
                           double ridge_coeff) {
  return t_e_step_impl(ds, pattern_groups(ds), model, ridge_coeff, false);
}

EStepState t_e_step(const Dataset& ds, const std::vector<PatternGroup>& groups,
                    const TMixModel& model, double ridge_coeff) {
  return t_e_step_impl(ds, groups, model, ridge_coeff, true);
}

EStepState t_e_step_serial(const Dataset& ds,
                           const std::vector<PatternGroup>& groups,
                           const TMixModel& model, double ridge_coeff) {
  return t_e_step_impl(ds, groups, model, ridge_coeff, false);
}

namespace detail {

double nu_equation(double nu, double constant) {
  return 1.0 + constant - digamma(0.5 * nu) + std::log(0.5 * nu);
}

double solve_nu(double constant, double nu_min, double nu_max, bool& clamped) {
  clamped = false;
  double lo = nu_min, hi = nu_max;
  double flo = nu_equation(lo, constant);
  double fhi = nu_equation(hi, constant);
  // The equation is decreasing in nu.
  if (flo < 0.0) {
    clamped = true;
    return nu_min;
  }
  if (fhi > 0.0) {
    clamped = true;
    return nu_max;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = nu_equation(mid, constant);
    if (fmid >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

namespace {

struct TRun {
  TMixModel model;
  EStepState state;
  std::vector<double> trace;
  bool converged = false;
  std::vector<std::uint8_t> nu_clamped;
};

TRun run_t_em(const Dataset& ds, const std::vector<PatternGroup>& groups,
              TMixModel model, const FitConfig& cfg) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.d();
  const int g_count = model.g_count();
  const auto row_group = row_to_group(n, groups);

  TRun run;
  run.nu_clamped.assign(static_cast<std::size_t>(g_count), 0);
  double prev_ll = 0.0;
  int iter = 0;
  while (true) {
    run.state = t_e_step(ds, groups, model, cfg.ridge);
    run.trace.push_back(run.state.loglik);
    if (iter > 0 && std::abs(run.state.loglik - prev_ll) /
                            (1.0 + std::abs(run.state.loglik)) <
                        cfg.tol) {
      run.converged = true;
      break;
    }
    if (iter >= cfg.max_iter) break;

    const auto& st = run.state;
    for (int g = 0; g < g_count; ++g) {
      double sz = 0.0, szu = 0.0;
      VectorXd mu_num = VectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double zu = st.w_tilde(i, g);
        sz += st.z_tilde(i, g);
        szu += zu;
        const auto& grp =
            groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
        mu_num += zu * stacked_row(ds, grp, static_cast<int>(i), st, g);
      }
      if (sz < cfg.collapse_frac * static_cast<double>(n))
        throw ComponentCollapse("component " + std::to_string(g + 1) +
                                " collapsed (effective count " +
                                std::to_string(sz) + ")");
      if (!(szu > 0.0) || !std::isfinite(szu))
        throw ComponentCollapse("component " + std::to_string(g + 1) +
                                ": weight mass vanished");

      const VectorXd mu_new = mu_num / szu;
      MatrixXd scatter = MatrixXd::Zero(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = st.z_tilde(i, g);
        const double zu = st.w_tilde(i, g);
        const auto& grp =
            groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
        const VectorXd diff =
            stacked_row(ds, grp, static_cast<int>(i), st, g) - mu_new;
        scatter.noalias() += zu * (diff * diff.transpose());
        if (!grp.missing_idx.empty()) {
          const auto& c =
              st.cond_cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(g)];
          for (std::size_t a = 0; a < grp.missing_idx.size(); ++a)
            for (std::size_t b = 0; b < grp.missing_idx.size(); ++b)
              scatter(grp.missing_idx[a], grp.missing_idx[b]) +=
                  z * c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }

      auto& comp = model.components[static_cast<std::size_t>(g)];
      const double nu_old = comp.nu;
      model.pi[g] = sz / static_cast<double>(n);
      comp.mu = mu_new;
      comp.sigma = make_spd(scatter / sz, cfg.ridge, cfg.degeneracy_tol);

      if (cfg.fix_nu > 0.0) {
        comp.nu = cfg.fix_nu;
      } else {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double u = st.v_tilde(i, g);
          const auto& grp =
              groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
          const double dobs = static_cast<double>(grp.observed_idx.size());
          acc += st.z_tilde(i, g) *
                 (std::log(u) - u + digamma(0.5 * (nu_old + dobs)) -
                  std::log(0.5 * (nu_old + dobs)));
        }
        bool clamped = false;
        comp.nu = detail::solve_nu(acc / sz, cfg.nu_min, cfg.nu_max, clamped);
        run.nu_clamped[static_cast<std::size_t>(g)] = clamped ? 1 : 0;
      }
    }

    prev_ll = run.state.loglik;
    ++iter;
  }
  run.model = std::move(model);
  return run;
}

TMixModel initial_t_model(const Dataset& ds, int g, const FitConfig& cfg,
                          std::mt19937_64& rng, int start_index) {
  // Same moment machinery as the contaminated-normal fit, with the dof in
  // place of (alpha, eta).
  const McnmModel base = initial_mcnm_model(ds, g, cfg, rng, start_index);
  TMixModel model;
  model.pi = base.pi;
  model.components.resize(static_cast<std::size_t>(g));
  for (int c = 0; c < g; ++c) {
    auto& comp = model.components[static_cast<std::size_t>(c)];
    comp.mu = base.components[static_cast<std::size_t>(c)].mu;
    comp.sigma = base.components[static_cast<std::size_t>(c)].sigma;
    comp.nu = cfg.fix_nu > 0.0 ? cfg.fix_nu : 10.0;
  }
  return model;
}

}  // namespace

FitResult fit_tmix(const Dataset& ds, int g, const FitConfig& cfg) {
  ds.validate();
  if (g < 1) throw std::invalid_argument("fit_tmix: G must be >= 1");
  const auto n = ds.n();
  const auto d = ds.d();
  if (n <= static_cast<Eigen::Index>(g) * d)
    throw std::invalid_argument("fit_tmix: need n > G*d observations");

  FitResult result;
  result.family = ModelFamily::Tmix;
  if (n < 5 * static_cast<Eigen::Index>(g) * d)
    result.warnings.push_back("few observations relative to G*d; estimates may be unstable");

  const auto groups = pattern_groups(ds);
  std::optional<TRun> best;
  std::vector<std::string> failures;
  for (int s = 0; s < std::max(cfg.n_starts, 1); ++s) {
    auto rng = make_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(s)}));
    try {
      auto run = run_t_em(ds, groups, initial_t_model(ds, g, cfg, rng, s), cfg);
      if (!best || run.trace.back() > best->trace.back()) best = std::move(run);
    } catch (const StartAborted& e) {
      failures.push_back("start " + std::to_string(s) + ": " + e.what());
    } catch (const SingularCovariance& e) {
      failures.push_back("start " + std::to_string(s) + ": " + e.what());
    }
  }
  if (!best) {
    std::string msg = "all starts failed;";
    for (const auto& f : failures) msg += "\n  " + f;
    throw FitFailure(msg);
  }

  result.tmix = std::move(best->model);
  result.state = std::move(best->state);
  result.loglik_trace = std::move(best->trace);
  result.n_iter = static_cast<int>(result.loglik_trace.size()) - 1;
  result.converged = best->converged;
  result.nu_clamped = std::move(best->nu_clamped);

  // Hard assignment by responsibility; the t mixture has no posterior
  // good/bad variable, so the outlier call is a chi-square reference
  // cutoff on the full-dimension distance to the assigned component.
  const Eigen::Index nn = ds.n();
  result.labels.resize(static_cast<std::size_t>(nn));
  result.outlier_flag.assign(static_cast<std::size_t>(nn), 0);
  for (Eigen::Index i = 0; i < nn; ++i) {
    int arg = 0;
    for (int c = 1; c < g; ++c)
      if (result.state.z_tilde(i, c) > result.state.z_tilde(i, arg)) arg = c;
    result.labels[static_cast<std::size_t>(i)] = arg + 1;
  }
  result.imputed = fill_missing(ds, result.state, result.labels);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const int g0 = result.labels[static_cast<std::size_t>(i)] - 1;
    const auto& comp = result.tmix.components[static_cast<std::size_t>(g0)];
    const double delta =
        squared_mahalanobis(result.imputed.values.row(i).transpose(), comp.mu,
                            comp.sigma, cfg.ridge)
            .value;
    result.outlier_flag[static_cast<std::size_t>(i)] =
        chi_square_cdf(delta, static_cast<double>(d)) > cfg.t_outlier_quantile
            ? 1
            : 0;
  }

  const int k = tmix_parameter_count(g, static_cast<int>(d));
  result.bic = -2.0 * result.loglik() +
               static_cast<double>(k) * std::log(static_cast<double>(n));
  return result;
}

int tmix_parameter_count(int g, int d) {
  return (g - 1) + g * (d + d * (d + 1) / 2 + 1);
}

}  // namespace cnmix
