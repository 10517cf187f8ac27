#include "cnmix/ecm_mcnm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "cnmix/kmeans.hpp"
#include "cnmix/rng.hpp"

namespace cnmix {

namespace {

std::string pattern_desc(const PatternGroup& g) {
  std::ostringstream os;
  os << "observed={";
  for (std::size_t k = 0; k < g.observed_idx.size(); ++k)
    os << (k ? "," : "") << (g.observed_idx[k] + 1);
  os << "}";
  return os.str();
}

// Per (component, pattern) precomputation shared by all rows of the
// pattern: factored observed block, regression gain, conditional
// covariance, and the component's log weights.
struct CompBlocks {
  detail::PartitionedGaussian part;
  double log_pi = 0.0;
  double log_alpha = 0.0;
  double log1m_alpha = 0.0;
  double log_eta = 0.0;
  double eta = 1.0;
};

std::vector<std::vector<CompBlocks>> build_blocks(
    const McnmModel& model, const std::vector<PatternGroup>& groups,
    double ridge_coeff) {
  const int g_count = model.g_count();
  std::vector<std::vector<CompBlocks>> blocks(
      static_cast<std::size_t>(g_count));
  for (int g = 0; g < g_count; ++g) {
    const auto& comp = model.components[static_cast<std::size_t>(g)];
    if (!(comp.alpha > 0.0 && comp.alpha < 1.0))
      throw std::invalid_argument("component " + std::to_string(g + 1) +
                                  ": alpha outside (0,1)");
    if (!(comp.eta >= 1.0))
      throw std::invalid_argument("component " + std::to_string(g + 1) +
                                  ": eta below 1");
    blocks[static_cast<std::size_t>(g)].reserve(groups.size());
    for (const auto& grp : groups) {
      CompBlocks b;
      try {
        b.part = detail::PartitionedGaussian::build(
            comp.mu, comp.sigma, grp.observed_idx, grp.missing_idx,
            ridge_coeff);
      } catch (const SingularCovariance& e) {
        throw SingularCovariance("component " + std::to_string(g + 1) + ", " +
                                 pattern_desc(grp) + ": " + e.what());
      }
      b.log_pi = std::log(model.pi[g]);
      b.log_alpha = std::log(comp.alpha);
      b.log1m_alpha = std::log1p(-comp.alpha);
      b.log_eta = std::log(comp.eta);
      b.eta = comp.eta;
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

EStepState e_step_impl(const Dataset& ds,
                       const std::vector<PatternGroup>& groups,
                       const McnmModel& model, double ridge_coeff,
                       bool parallel) {
  const Eigen::Index n = ds.n();
  const int g_count = model.g_count();
  if (g_count < 1 || model.pi.size() != g_count)
    throw std::invalid_argument("e_step: malformed model");
  if (model.dim() != static_cast<int>(ds.d()))
    throw std::invalid_argument("e_step: model dimension mismatch");

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
      const double lg =
          -0.5 * (dobs * kLog2Pi + b.part.chol_oo.log_det() + delta);
      double lmcn;
      if (b.eta == 1.0) {
        lmcn = lg;
      } else {
        const double lb =
            -0.5 * (dobs * kLog2Pi + b.part.chol_oo.log_det() +
                    dobs * b.log_eta + delta / b.eta);
        const double ta = b.log_alpha + lg;
        const double tb = b.log1m_alpha + lb;
        const double m = std::max(ta, tb);
        lmcn = m + std::log(std::exp(ta - m) + std::exp(tb - m));
      }
      const double v =
          std::clamp(std::exp(b.log_alpha + lg - lmcn), 0.0, 1.0);
      st.v_tilde(i, g) = v;
      lpost[g] = b.log_pi + lmcn;
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
      const double z = st.z_tilde(i, g) / total;
      st.z_tilde(i, g) = z;
      const double v = st.v_tilde(i, g);
      const double eta = blocks[static_cast<std::size_t>(g)][static_cast<std::size_t>(gi)].eta;
      st.w_tilde(i, g) = z * (v + (1.0 - v) / eta);
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

// Full-dimension vector for row i: observed coordinates from the data,
// missing coordinates from the conditional means of component g.
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

// Symmetrize and, if needed, add one diagonal ridge so the matrix factors.
// A matrix that is numerically rank deficient even when it factors marks a
// degenerate component: the likelihood grows without bound along such a
// collapse, so the caller's start must abort rather than chase it.
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

double observed_mcn_log_likelihood(const Dataset& ds, const McnmModel& model,
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
        const double lg =
            -0.5 * (dobs * kLog2Pi + b.part.chol_oo.log_det() + delta);
        double lmcn;
        if (b.eta == 1.0) {
          lmcn = lg;
        } else {
          const double lb =
              -0.5 * (dobs * kLog2Pi + b.part.chol_oo.log_det() +
                      dobs * b.log_eta + delta / b.eta);
          const double terms[2] = {b.log_alpha + lg, b.log1m_alpha + lb};
          lmcn = log_sum_exp(terms);
        }
        lpost[g] = b.log_pi + lmcn;
      }
      loglik += log_sum_exp(
          std::span<const double>(lpost.data(), static_cast<std::size_t>(g_count)));
    }
  }
  return loglik;
}

EStepState e_step(const Dataset& ds, const McnmModel& model,
                  double ridge_coeff) {
  return e_step_impl(ds, pattern_groups(ds), model, ridge_coeff, true);
}

EStepState e_step_serial(const Dataset& ds, const McnmModel& model,
                         double ridge_coeff) {
  return e_step_impl(ds, pattern_groups(ds), model, ridge_coeff, false);
}

EStepState e_step(const Dataset& ds, const std::vector<PatternGroup>& groups,
                  const McnmModel& model, double ridge_coeff) {
  return e_step_impl(ds, groups, model, ridge_coeff, true);
}

EStepState e_step_serial(const Dataset& ds,
                         const std::vector<PatternGroup>& groups,
                         const McnmModel& model, double ridge_coeff) {
  return e_step_impl(ds, groups, model, ridge_coeff, false);
}

CmStep1Update cm_step_1(const Dataset& ds,
                        const std::vector<PatternGroup>& groups,
                        const EStepState& state, const McnmModel& prev,
                        const FitConfig& cfg) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.d();
  const int g_count = prev.g_count();
  const auto row_group = row_to_group(n, groups);

  CmStep1Update up;
  up.pi.resize(g_count);
  up.alpha.resize(static_cast<std::size_t>(g_count));
  up.mu.resize(static_cast<std::size_t>(g_count));
  up.sigma.resize(static_cast<std::size_t>(g_count));

  for (int g = 0; g < g_count; ++g) {
    double sz = 0.0, szv = 0.0, sw = 0.0;
    VectorXd mu_num = VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = state.z_tilde(i, g);
      const double w = state.w_tilde(i, g);
      sz += z;
      szv += z * state.v_tilde(i, g);
      sw += w;
      const auto& grp =
          groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
      mu_num += w * stacked_row(ds, grp, static_cast<int>(i), state, g);
    }
    if (sz < cfg.collapse_frac * static_cast<double>(n))
      throw ComponentCollapse("component " + std::to_string(g + 1) +
                              " collapsed (effective count " +
                              std::to_string(sz) + ")");
    if (!(sw > 0.0) || !std::isfinite(sw))
      throw ComponentCollapse("component " + std::to_string(g + 1) +
                              ": good-point mass vanished");

    up.pi[g] = sz / static_cast<double>(n);
    up.alpha[static_cast<std::size_t>(g)] =
        std::clamp(szv / sz, cfg.alpha_min, cfg.alpha_max);
    up.mu[static_cast<std::size_t>(g)] = mu_num / sw;

    const VectorXd& mu_prev = prev.components[static_cast<std::size_t>(g)].mu;
    MatrixXd scatter = MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = state.w_tilde(i, g);
      const auto& grp =
          groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
      const VectorXd diff =
          stacked_row(ds, grp, static_cast<int>(i), state, g) - mu_prev;
      scatter.noalias() += w * (diff * diff.transpose());
      if (!grp.missing_idx.empty()) {
        // The contamination discount applies to the centered outer
        // products only; the conditional covariance of the missing block
        // carries the plain responsibility weight (the inflated bad-part
        // covariance cancels its own 1/eta factor), which is what keeps
        // the iteration an ascent.
        const double z = state.z_tilde(i, g);
        const auto& c =
            state.cond_cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(g)];
        for (std::size_t a = 0; a < grp.missing_idx.size(); ++a)
          for (std::size_t b = 0; b < grp.missing_idx.size(); ++b)
            scatter(grp.missing_idx[a], grp.missing_idx[b]) +=
                z * c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
    up.sigma[static_cast<std::size_t>(g)] =
        make_spd(scatter / sz, cfg.ridge, cfg.degeneracy_tol);
  }
  return up;
}

CmStep2Update cm_step_2(const Dataset& ds,
                        const std::vector<PatternGroup>& groups,
                        const EStepState& state, const CmStep1Update& step1,
                        const McnmModel& prev, const FitConfig& cfg) {
  const Eigen::Index n = ds.n();
  const int g_count = prev.g_count();
  const auto row_group = row_to_group(n, groups);

  CmStep2Update up;
  up.eta.resize(static_cast<std::size_t>(g_count));
  up.no_contamination.assign(static_cast<std::size_t>(g_count), 0);

  for (int g = 0; g < g_count; ++g) {
    const auto chol =
        CholeskyFactor::compute(step1.sigma[static_cast<std::size_t>(g)], cfg.ridge);
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zv = state.z_tilde(i, g) * (1.0 - state.v_tilde(i, g));
      const auto& grp =
          groups[static_cast<std::size_t>(row_group[static_cast<std::size_t>(i)])];
      if (zv > 0.0) {
        const VectorXd diff =
            stacked_row(ds, grp, static_cast<int>(i), state, g) -
            step1.mu[static_cast<std::size_t>(g)];
        num += zv * chol.squared_mahalanobis(diff);
      }
      den += static_cast<double>(grp.observed_idx.size()) * zv;
    }
    if (den < 1e-12) {
      up.eta[static_cast<std::size_t>(g)] = prev.components[static_cast<std::size_t>(g)].eta;
      up.no_contamination[static_cast<std::size_t>(g)] = 1;
    } else {
      up.eta[static_cast<std::size_t>(g)] = std::max(num / den, cfg.eta_min);
    }
  }
  return up;
}

namespace {

MatrixXd mean_impute(const Dataset& ds) {
  MatrixXd x = ds.values;
  for (Eigen::Index j = 0; j < ds.d(); ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i)
      if (ds.mask(i, j)) {
        sum += ds.values(i, j);
        ++count;
      }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (Eigen::Index i = 0; i < ds.n(); ++i)
      if (!ds.mask(i, j)) x(i, j) = mean;
  }
  return x;
}

struct Moments {
  VectorXd pi;
  std::vector<VectorXd> mu;
  std::vector<MatrixXd> sigma;
};

Moments weighted_moments(const MatrixXd& x, const MatrixXd& weights,
                         double ridge_coeff) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const int g_count = static_cast<int>(weights.cols());

  // Overall scale sets the ridge added to each within-cluster scatter.
  const VectorXd overall_mean = x.colwise().mean();
  double total_var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total_var += (x.row(i).transpose() - overall_mean).squaredNorm();
  total_var /= static_cast<double>(n) * static_cast<double>(d);
  const double eps = std::max(1e-6 * total_var, 1e-10);

  Moments m;
  m.pi.resize(g_count);
  m.mu.resize(static_cast<std::size_t>(g_count));
  m.sigma.resize(static_cast<std::size_t>(g_count));
  for (int g = 0; g < g_count; ++g) {
    const double wsum = std::max(weights.col(g).sum(), 1e-12);
    m.pi[g] = wsum / static_cast<double>(n);
    VectorXd mu = VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) mu += weights(i, g) * x.row(i).transpose();
    mu /= wsum;
    MatrixXd s = MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd diff = x.row(i).transpose() - mu;
      s.noalias() += weights(i, g) * (diff * diff.transpose());
    }
    s /= wsum;
    s.diagonal().array() += eps;  // the floor keeps thin initial clusters usable
    m.mu[static_cast<std::size_t>(g)] = mu;
    m.sigma[static_cast<std::size_t>(g)] = make_spd(std::move(s), ridge_coeff, 0.0);
  }
  const double pis = m.pi.sum();
  m.pi /= pis;
  return m;
}

}  // namespace

McnmModel initial_mcnm_model(const Dataset& ds, int g, const FitConfig& cfg,
                             std::mt19937_64& rng, int start_index) {
  const MatrixXd x = mean_impute(ds);
  const Eigen::Index n = x.rows();
  MatrixXd weights = MatrixXd::Zero(n, g);
  if (start_index == 0) {
    const auto km = kmeans(x, g, rng, 10, 100);
    for (Eigen::Index i = 0; i < n; ++i)
      weights(i, km.labels[static_cast<std::size_t>(i)]) = 1.0;
  } else {
    std::exponential_distribution<double> expo(1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double total = 0.0;
      for (int c = 0; c < g; ++c) {
        weights(i, c) = expo(rng);
        total += weights(i, c);
      }
      weights.row(i) /= total;
    }
  }

  const auto m = weighted_moments(x, weights, cfg.ridge);
  McnmModel model;
  model.pi = m.pi;
  model.components.resize(static_cast<std::size_t>(g));
  for (int c = 0; c < g; ++c) {
    auto& comp = model.components[static_cast<std::size_t>(c)];
    comp.mu = m.mu[static_cast<std::size_t>(c)];
    comp.sigma = m.sigma[static_cast<std::size_t>(c)];
    comp.alpha = 0.95;
    comp.eta = 1.1;
  }
  return model;
}

namespace {

struct EcmRun {
  McnmModel model;
  EStepState state;
  std::vector<double> trace;
  bool converged = false;
  std::vector<std::uint8_t> no_contamination;
};

EcmRun run_ecm(const Dataset& ds, const std::vector<PatternGroup>& groups,
               McnmModel model, const FitConfig& cfg) {
  EcmRun run;
  run.no_contamination.assign(static_cast<std::size_t>(model.g_count()), 0);
  double prev_ll = 0.0;
  int iter = 0;
  while (true) {
    run.state = e_step(ds, groups, model, cfg.ridge);
    run.trace.push_back(run.state.loglik);
    if (iter > 0 && std::abs(run.state.loglik - prev_ll) /
                            (1.0 + std::abs(run.state.loglik)) <
                        cfg.tol) {
      run.converged = true;
      break;
    }
    if (iter >= cfg.max_iter) break;
    const auto s1 = cm_step_1(ds, groups, run.state, model, cfg);
    const auto s2 = cm_step_2(ds, groups, run.state, s1, model, cfg);
    model.pi = s1.pi;
    for (int g = 0; g < model.g_count(); ++g) {
      auto& comp = model.components[static_cast<std::size_t>(g)];
      comp.mu = s1.mu[static_cast<std::size_t>(g)];
      comp.sigma = s1.sigma[static_cast<std::size_t>(g)];
      comp.alpha = s1.alpha[static_cast<std::size_t>(g)];
      comp.eta = s2.eta[static_cast<std::size_t>(g)];
    }
    run.no_contamination = s2.no_contamination;
    prev_ll = run.state.loglik;
    ++iter;
  }
  run.model = std::move(model);
  return run;
}

}  // namespace

FitResult fit_mcnm(const Dataset& ds, int g, const FitConfig& cfg) {
  ds.validate();
  if (g < 1) throw std::invalid_argument("fit_mcnm: G must be >= 1");
  const auto n = ds.n();
  const auto d = ds.d();
  if (n <= static_cast<Eigen::Index>(g) * d)
    throw std::invalid_argument("fit_mcnm: need n > G*d observations");

  FitResult result;
  result.family = ModelFamily::Mcnm;
  if (n < 5 * static_cast<Eigen::Index>(g) * d)
    result.warnings.push_back("few observations relative to G*d; estimates may be unstable");

  const auto groups = pattern_groups(ds);
  std::optional<EcmRun> best;
  std::vector<std::string> failures;
  for (int s = 0; s < std::max(cfg.n_starts, 1); ++s) {
    auto rng = make_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(s)}));
    try {
      auto run = run_ecm(ds, groups, initial_mcnm_model(ds, g, cfg, rng, s), cfg);
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

  result.mcnm = std::move(best->model);
  result.state = std::move(best->state);
  result.loglik_trace = std::move(best->trace);
  result.n_iter = static_cast<int>(result.loglik_trace.size()) - 1;
  result.converged = best->converged;
  result.no_contamination = std::move(best->no_contamination);
  const auto cls = classify_points(result.state.z_tilde, result.state.v_tilde);
  result.labels = cls.labels;
  result.outlier_flag = cls.outlier_flag;
  result.imputed = fill_missing(ds, result.state, result.labels);
  const int k = mcnm_parameter_count(g, static_cast<int>(d));
  result.bic = -2.0 * result.loglik() +
               static_cast<double>(k) * std::log(static_cast<double>(n));
  return result;
}

Classification classify_points(const Eigen::MatrixXd& z_tilde,
                               const Eigen::MatrixXd& v_tilde) {
  const Eigen::Index n = z_tilde.rows();
  const Eigen::Index g_count = z_tilde.cols();
  Classification cls;
  cls.labels.resize(static_cast<std::size_t>(n));
  cls.outlier_flag.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int arg = 0;
    for (Eigen::Index g = 1; g < g_count; ++g)
      if (z_tilde(i, g) > z_tilde(i, arg)) arg = static_cast<int>(g);
    cls.labels[static_cast<std::size_t>(i)] = arg + 1;
    cls.outlier_flag[static_cast<std::size_t>(i)] =
        v_tilde(i, arg) < 0.5 ? 1 : 0;
  }
  return cls;
}

Classification classify_points(const FitResult& result) {
  return classify_points(result.state.z_tilde, result.state.v_tilde);
}

Dataset fill_missing(const Dataset& ds, const EStepState& state,
                     const std::vector<int>& labels) {
  Dataset out = ds;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const int g = labels[static_cast<std::size_t>(i)] - 1;
    int k = 0;
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      if (!ds.mask(i, j)) {
        out.values(i, j) =
            state.x_tilde[static_cast<std::size_t>(i)][static_cast<std::size_t>(g)][k];
        out.mask(i, j) = true;
        ++k;
      }
    }
  }
  return out;
}

Dataset impute_dataset(const Dataset& ds, const McnmModel& model,
                       double ridge_coeff) {
  const auto state = e_step(ds, model, ridge_coeff);
  const auto cls = classify_points(state.z_tilde, state.v_tilde);
  return fill_missing(ds, state, cls.labels);
}

int mcnm_parameter_count(int g, int d) {
  return (g - 1) + g * (d + d * (d + 1) / 2 + 2);
}

}  // namespace cnmix
