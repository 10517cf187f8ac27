#include "cnmix/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cnmix/core_math.hpp"
#include "cnmix/rng.hpp"

namespace cnmix {

const char* family_name(Family f) {
  switch (f) {
    case Family::StudentT: return "student_t";
    case Family::Mcn: return "mcn";
    case Family::MnAtypical: return "mn_atypical";
    case Family::MnUniformNoise: return "mn_uniform_noise";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "student_t") return Family::StudentT;
  if (name == "mcn") return Family::Mcn;
  if (name == "mn_atypical") return Family::MnAtypical;
  if (name == "mn_uniform_noise") return Family::MnUniformNoise;
  throw ConfigError("unknown family '" + name + "'");
}

const char* overlap_name(Overlap o) {
  return o == Overlap::Far ? "far" : "close";
}

Overlap overlap_from_name(const std::string& name) {
  if (name == "far") return Overlap::Far;
  if (name == "close") return Overlap::Close;
  throw ConfigError("unknown overlap '" + name + "'");
}

namespace {

Eigen::VectorXd standard_normal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (int j = 0; j < d; ++j) z[j] = norm(rng);
  return z;
}

// Indices of m distinct rows, by partial Fisher-Yates.
std::vector<int> sample_without_replacement(int n, int m,
                                            std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return idx;
}

}  // namespace

LabeledDataset generate_scenario(const ScenarioConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("scenario: n must be >= 1");
  if (cfg.d < 1) throw ConfigError("scenario: d must be >= 1");
  if (cfg.g != 2) throw ConfigError("scenario: the generator is two-component");

  const int n = cfg.n;
  const int d = cfg.d;
  auto rng = make_rng(cfg.seed);

  LabeledDataset out;
  out.params = cfg;
  out.means.push_back(Eigen::VectorXd::Zero(d));
  const double offset =
      cfg.overlap == Overlap::Far ? cfg.mean_far : cfg.mean_close;
  out.means.push_back(Eigen::VectorXd::Constant(d, offset));
  out.sigma = Eigen::MatrixXd::Identity(d, d);

  out.data.values.resize(n, d);
  out.data.mask = BoolMatrix::Constant(n, d, true);
  for (int j = 0; j < d; ++j)
    out.data.columns.push_back("x" + std::to_string(j + 1));
  out.true_labels.resize(static_cast<std::size_t>(n));
  out.true_outlier.assign(static_cast<std::size_t>(n), 0);

  std::bernoulli_distribution comp_pick(0.5);
  std::bernoulli_distribution good_pick(cfg.mcn_alpha);

  for (int i = 0; i < n; ++i) {
    const int g = comp_pick(rng) ? 1 : 0;
    out.true_labels[static_cast<std::size_t>(i)] = g + 1;
    const Eigen::VectorXd& mu = out.means[static_cast<std::size_t>(g)];
    Eigen::VectorXd x;
    switch (cfg.family) {
      case Family::StudentT: {
        std::gamma_distribution<double> gam(0.5 * cfg.t_nu, 2.0);
        const double chi2 = gam(rng);
        x = mu + standard_normal(d, rng) * std::sqrt(cfg.t_nu / chi2);
        break;
      }
      case Family::Mcn: {
        const bool good = good_pick(rng);
        const double scale = good ? 1.0 : std::sqrt(cfg.mcn_eta);
        x = mu + scale * standard_normal(d, rng);
        out.true_outlier[static_cast<std::size_t>(i)] = good ? 0 : 1;
        break;
      }
      case Family::MnAtypical:
      case Family::MnUniformNoise:
        x = mu + standard_normal(d, rng);
        break;
    }
    out.data.values.row(i) = x.transpose();
  }

  if (cfg.family == Family::MnAtypical) {
    const int m = static_cast<int>(std::llround(cfg.atypical_frac * n));
    std::uniform_real_distribution<double> radius(cfg.atypical_radius_min,
                                                  cfg.atypical_radius_max);
    std::uniform_int_distribution<int> comp(0, 1);
    for (int idx : sample_without_replacement(n, m, rng)) {
      // A point on a Mahalanobis ring around one mean, redrawn until that
      // mean is the nearer of the two.
      Eigen::VectorXd x;
      for (int attempt = 0; attempt < 200; ++attempt) {
        const int g = comp(rng);
        Eigen::VectorXd dir = standard_normal(d, rng);
        dir /= dir.norm();
        const double r = radius(rng);
        x = out.means[static_cast<std::size_t>(g)] + r * dir;
        const double other =
            (x - out.means[static_cast<std::size_t>(1 - g)]).norm();
        if (other >= r) break;
      }
      out.data.values.row(idx) = x.transpose();
      out.true_outlier[static_cast<std::size_t>(idx)] = 1;
    }
  } else if (cfg.family == Family::MnUniformNoise) {
    const int m = static_cast<int>(std::llround(cfg.noise_frac * n));
    const Eigen::VectorXd lo = out.data.values.colwise().minCoeff();
    const Eigen::VectorXd hi = out.data.values.colwise().maxCoeff();
    const Eigen::VectorXd center = 0.5 * (lo + hi);
    const Eigen::VectorXd half =
        (1.0 + cfg.noise_box_inflate) * 0.5 * (hi - lo);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int idx : sample_without_replacement(n, m, rng)) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x[j] = center[j] + half[j] * unit(rng);
      out.data.values.row(idx) = x.transpose();
      out.true_outlier[static_cast<std::size_t>(idx)] = 1;
    }
  }

  return out;
}

BoolMatrix default_patterns(int d, int k, std::uint64_t seed) {
  if (d < 2)
    throw ConfigError("default_patterns: need d >= 2 to keep a row "
                      "partially observed");
  BoolMatrix patterns = BoolMatrix::Constant(k, d, false);
  if (d == 2) {
    for (int s = 0; s < k; ++s) patterns(s, s % 2) = true;
    return patterns;
  }
  auto rng = make_rng(derive_seed(seed, {0x70617474ull}));
  std::uniform_int_distribution<int> pick(0, d - 1);
  for (int s = 0; s < k; ++s) {
    if (s < d) {
      patterns(s, s) = true;
    } else {
      const int a = pick(rng);
      int b = pick(rng);
      while (b == a) b = pick(rng);
      patterns(s, a) = true;
      patterns(s, b) = true;
    }
  }
  return patterns;
}

Eigen::MatrixXd default_weights(const BoolMatrix& patterns) {
  const Eigen::Index k = patterns.rows();
  const Eigen::Index d = patterns.cols();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, d);
  for (Eigen::Index s = 0; s < k; ++s)
    for (Eigen::Index j = 0; j < d; ++j)
      if (!patterns(s, j))
        w(s, j) = 1.0 + 0.5 * static_cast<double>(s) / static_cast<double>(k);
  return w;
}

namespace {

void validate_amputation(const Dataset& ds, const BoolMatrix& patterns,
                         const Eigen::MatrixXd& weights, double prop) {
  if (!(prop > 0.0 && prop < 1.0))
    throw ConfigError("ampute: prop_rows must lie in (0,1)");
  if (!ds.fully_observed())
    throw DataError("ampute: input dataset must be fully observed");
  if (patterns.rows() == 0 || patterns.cols() != ds.d())
    throw ConfigError("ampute: pattern matrix shape mismatch");
  if (weights.rows() != patterns.rows() || weights.cols() != patterns.cols())
    throw ConfigError("ampute: weight matrix shape mismatch");
  for (Eigen::Index s = 0; s < patterns.rows(); ++s) {
    bool keeps_one = false;
    for (Eigen::Index j = 0; j < patterns.cols(); ++j)
      if (!patterns(s, j)) keeps_one = true;
    if (!keeps_one)
      throw ConfigError("ampute: pattern " + std::to_string(s + 1) +
                        " would remove a whole row");
  }
}

// Largest-remainder allocation of m draws across groups, capped by group
// size; leftovers spill to groups with spare capacity in slot order.
std::vector<int> allocate_quotas(const std::vector<int>& sizes, int m,
                                 int n) {
  const std::size_t k = sizes.size();
  std::vector<int> quota(k, 0);
  std::vector<std::pair<double, std::size_t>> remainder(k);
  int assigned = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const double exact =
        static_cast<double>(m) * static_cast<double>(sizes[s]) / static_cast<double>(n);
    quota[s] = static_cast<int>(std::floor(exact));
    remainder[s] = {exact - std::floor(exact), s};
    assigned += quota[s];
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < m && r < k; ++r) {
    ++quota[remainder[r].second];
    ++assigned;
  }
  // Cap at group sizes, then spill.
  int spill = 0;
  for (std::size_t s = 0; s < k; ++s)
    if (quota[s] > sizes[s]) {
      spill += quota[s] - sizes[s];
      quota[s] = sizes[s];
    }
  for (std::size_t s = 0; spill > 0 && s < k; ++s) {
    const int room = sizes[s] - quota[s];
    const int take = std::min(room, spill);
    quota[s] += take;
    spill -= take;
  }
  return quota;
}

}  // namespace

Dataset ampute(const Dataset& ds, const AmputationConfig& cfg,
               AmputeInfo* info) {
  BoolMatrix patterns = cfg.patterns;
  if (patterns.size() == 0)
    patterns = default_patterns(static_cast<int>(ds.d()), 10, cfg.seed);
  Eigen::MatrixXd weights = cfg.weights;
  if (weights.size() == 0) weights = default_weights(patterns);
  validate_amputation(ds, patterns, weights, cfg.prop_rows);

  Dataset out = ds;
  const int n = static_cast<int>(ds.n());
  const int k = static_cast<int>(patterns.rows());
  const int m = static_cast<int>(std::llround(cfg.prop_rows * n));
  if (info) *info = AmputeInfo{};
  if (m < 1) {
    if (info) {
      info->no_op = true;
      info->warning = "prop_rows * n rounds to zero; nothing amputed";
    }
    return out;
  }

  auto rng = make_rng(cfg.seed);

  // Uniform pattern assignment for every row.
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> pattern_of(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> group_rows(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    pattern_of[static_cast<std::size_t>(i)] = pick(rng);
    group_rows[static_cast<std::size_t>(pattern_of[static_cast<std::size_t>(i)])].push_back(i);
  }
  std::vector<int> sizes(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s)
    sizes[static_cast<std::size_t>(s)] =
        static_cast<int>(group_rows[static_cast<std::size_t>(s)].size());
  const auto quota = allocate_quotas(sizes, m, n);

  int amputed = 0;
  for (int s = 0; s < k; ++s) {
    const auto& rows = group_rows[static_cast<std::size_t>(s)];
    const int take = quota[static_cast<std::size_t>(s)];
    if (take == 0 || rows.empty()) continue;

    // Weighted-sum MAR score over the coordinates the pattern keeps.
    Eigen::VectorXd score(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < ds.d(); ++j)
        if (!patterns(s, j)) acc += weights(s, j) * ds.values(rows[r], j);
      score[static_cast<Eigen::Index>(r)] = acc;
    }
    const double mean = score.mean();
    const double sd =
        std::sqrt((score.array() - mean).square().sum() /
                  std::max<double>(1.0, static_cast<double>(rows.size()) - 1.0));
    Eigen::VectorXd prob(score.size());
    for (Eigen::Index r = 0; r < score.size(); ++r) {
      const double z = sd > 0.0 ? (score[r] - mean) / sd : 0.0;
      prob[r] = 1.0 / (1.0 + std::exp(-z));
    }

    // Weighted sampling without replacement.
    std::vector<char> chosen(rows.size(), 0);
    for (int t = 0; t < take; ++t) {
      double total = 0.0;
      for (Eigen::Index r = 0; r < prob.size(); ++r)
        if (!chosen[static_cast<std::size_t>(r)]) total += prob[r];
      std::uniform_real_distribution<double> u(0.0, total);
      double draw = u(rng);
      Eigen::Index sel = -1;
      for (Eigen::Index r = 0; r < prob.size(); ++r) {
        if (chosen[static_cast<std::size_t>(r)]) continue;
        draw -= prob[r];
        sel = r;
        if (draw <= 0.0) break;
      }
      chosen[static_cast<std::size_t>(sel)] = 1;
      const int row = rows[static_cast<std::size_t>(sel)];
      for (Eigen::Index j = 0; j < ds.d(); ++j)
        if (patterns(s, j)) {
          out.mask(row, j) = false;
          out.values(row, j) = std::numeric_limits<double>::quiet_NaN();
        }
      ++amputed;
    }
  }

  if (info) info->amputed_rows = amputed;
  return out;
}

LabeledDataset ampute(const LabeledDataset& lds, const AmputationConfig& cfg,
                      AmputeInfo* info) {
  LabeledDataset out = lds;
  out.data = ampute(lds.data, cfg, info);
  return out;
}

}  // namespace cnmix
