#include "cnmix/io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace cnmix {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

json config_to_json(const FitConfig& cfg) {
  return json{{"tol", cfg.tol},
              {"max_iter", cfg.max_iter},
              {"n_starts", cfg.n_starts},
              {"seed", cfg.seed},
              {"alpha_min", cfg.alpha_min},
              {"alpha_max", cfg.alpha_max},
              {"eta_min", cfg.eta_min},
              {"ridge", cfg.ridge},
              {"collapse_frac", cfg.collapse_frac},
              {"degeneracy_tol", cfg.degeneracy_tol},
              {"nu_min", cfg.nu_min},
              {"nu_max", cfg.nu_max},
              {"fix_nu", cfg.fix_nu},
              {"t_outlier_quantile", cfg.t_outlier_quantile}};
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

}  // namespace

void save_fit_result(const FitResult& result, const FitConfig& cfg,
                     const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = 1;
  doc["model"] = model_family_name(result.family);
  doc["config"] = config_to_json(cfg);
  doc["loglik"] = result.loglik();
  doc["loglik_trace"] = result.loglik_trace;
  doc["bic"] = result.bic;
  doc["n_iter"] = result.n_iter;
  doc["converged"] = result.converged;
  doc["labels"] = result.labels;
  doc["outlier_flag"] = result.outlier_flag;
  doc["warnings"] = result.warnings;

  int g = 0, d = 0;
  json comps = json::array();
  if (result.family == ModelFamily::Mcnm) {
    g = result.mcnm.g_count();
    d = result.mcnm.dim();
    doc["pi"] = vector_to_json(result.mcnm.pi);
    for (const auto& c : result.mcnm.components)
      comps.push_back(json{{"mu", vector_to_json(c.mu)},
                           {"sigma", matrix_to_json(c.sigma)},
                           {"alpha", c.alpha},
                           {"eta", c.eta}});
    doc["no_contamination"] = result.no_contamination;
  } else {
    g = result.tmix.g_count();
    d = result.tmix.dim();
    doc["pi"] = vector_to_json(result.tmix.pi);
    for (const auto& c : result.tmix.components)
      comps.push_back(json{{"mu", vector_to_json(c.mu)},
                           {"sigma", matrix_to_json(c.sigma)},
                           {"nu", c.nu}});
    doc["nu_clamped"] = result.nu_clamped;
  }
  doc["components"] = comps;
  doc["g"] = g;
  doc["d"] = d;
  doc["n"] = result.labels.size();

  std::vector<long> sizes(static_cast<std::size_t>(g), 0);
  for (int l : result.labels) ++sizes[static_cast<std::size_t>(l - 1)];
  doc["cluster_sizes"] = sizes;

  write_json(doc, path);
}

SavedFit load_fit_model(const std::filesystem::path& path) {
  const json doc = load_json(path);
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1)
    throw DataError("fit document '" + path.string() +
                    "': unsupported schema version");
  SavedFit fit;
  const std::string model = doc.at("model").get<std::string>();
  const json& comps = doc.at("components");
  if (model == "mcnm") {
    fit.family = ModelFamily::Mcnm;
    fit.mcnm.pi = vector_from_json(doc.at("pi"));
    for (const auto& c : comps) {
      McnComponent comp;
      comp.mu = vector_from_json(c.at("mu"));
      comp.sigma = matrix_from_json(c.at("sigma"));
      comp.alpha = c.at("alpha").get<double>();
      comp.eta = c.at("eta").get<double>();
      fit.mcnm.components.push_back(std::move(comp));
    }
  } else if (model == "tmix") {
    fit.family = ModelFamily::Tmix;
    fit.tmix.pi = vector_from_json(doc.at("pi"));
    for (const auto& c : comps) {
      TComponent comp;
      comp.mu = vector_from_json(c.at("mu"));
      comp.sigma = matrix_from_json(c.at("sigma"));
      comp.nu = c.at("nu").get<double>();
      fit.tmix.components.push_back(std::move(comp));
    }
  } else {
    throw DataError("fit document '" + path.string() + "': unknown model '" +
                    model + "'");
  }
  return fit;
}

void write_labels_file(const std::vector<int>& labels,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "label\n";
  for (int l : labels) out << l << '\n';
}

void write_flags_file(const std::vector<std::uint8_t>& flags,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "outlier\n";
  for (std::uint8_t f : flags) out << (f ? 1 : 0) << '\n';
}

void write_truth_file(const LabeledDataset& lds,
                      const std::filesystem::path& path) {
  const auto& p = lds.params;
  json params{{"family", family_name(p.family)},
              {"n", p.n},
              {"overlap", overlap_name(p.overlap)},
              {"seed", p.seed},
              {"d", p.d},
              {"mean_far", p.mean_far},
              {"mean_close", p.mean_close},
              {"t_nu", p.t_nu},
              {"mcn_alpha", p.mcn_alpha},
              {"mcn_eta", p.mcn_eta},
              {"atypical_frac", p.atypical_frac},
              {"atypical_radius_min", p.atypical_radius_min},
              {"atypical_radius_max", p.atypical_radius_max},
              {"noise_frac", p.noise_frac},
              {"noise_box_inflate", p.noise_box_inflate}};
  json means = json::array();
  for (const auto& m : lds.means) means.push_back(vector_to_json(m));
  json doc{{"schema_version", 1},
           {"true_labels", lds.true_labels},
           {"true_outlier", lds.true_outlier},
           {"params", params},
           {"means", means},
           {"sigma", matrix_to_json(lds.sigma)}};
  write_json(doc, path);
}

FitConfig fit_config_from_json_file(const std::filesystem::path& path,
                                    FitConfig base) {
  const json j = load_json(path);
  reject_unknown_keys(j,
                      {"tol", "max_iter", "n_starts", "seed", "alpha_min",
                       "alpha_max", "eta_min", "ridge", "collapse_frac",
                       "degeneracy_tol", "nu_min", "nu_max", "fix_nu",
                       "t_outlier_quantile"},
                      "fit config");
  if (j.contains("tol")) base.tol = j["tol"].get<double>();
  if (j.contains("max_iter")) base.max_iter = j["max_iter"].get<int>();
  if (j.contains("n_starts")) base.n_starts = j["n_starts"].get<int>();
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("alpha_min")) base.alpha_min = j["alpha_min"].get<double>();
  if (j.contains("alpha_max")) base.alpha_max = j["alpha_max"].get<double>();
  if (j.contains("eta_min")) base.eta_min = j["eta_min"].get<double>();
  if (j.contains("ridge")) base.ridge = j["ridge"].get<double>();
  if (j.contains("collapse_frac"))
    base.collapse_frac = j["collapse_frac"].get<double>();
  if (j.contains("degeneracy_tol"))
    base.degeneracy_tol = j["degeneracy_tol"].get<double>();
  if (j.contains("nu_min")) base.nu_min = j["nu_min"].get<double>();
  if (j.contains("nu_max")) base.nu_max = j["nu_max"].get<double>();
  if (j.contains("fix_nu")) base.fix_nu = j["fix_nu"].get<double>();
  if (j.contains("t_outlier_quantile"))
    base.t_outlier_quantile = j["t_outlier_quantile"].get<double>();
  return base;
}

ScenarioConfig scenario_config_from_json_file(
    const std::filesystem::path& path, ScenarioConfig base) {
  const json j = load_json(path);
  reject_unknown_keys(
      j, {"family", "n", "overlap", "seed", "d", "mean_far", "mean_close",
          "t_nu", "mcn_alpha", "mcn_eta", "atypical_frac",
          "atypical_radius_min", "atypical_radius_max", "noise_frac",
          "noise_box_inflate"},
      "scenario config");
  if (j.contains("family"))
    base.family = family_from_name(j["family"].get<std::string>());
  if (j.contains("n")) base.n = j["n"].get<int>();
  if (j.contains("overlap"))
    base.overlap = overlap_from_name(j["overlap"].get<std::string>());
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("d")) base.d = j["d"].get<int>();
  if (j.contains("mean_far")) base.mean_far = j["mean_far"].get<double>();
  if (j.contains("mean_close")) base.mean_close = j["mean_close"].get<double>();
  if (j.contains("t_nu")) base.t_nu = j["t_nu"].get<double>();
  if (j.contains("mcn_alpha")) base.mcn_alpha = j["mcn_alpha"].get<double>();
  if (j.contains("mcn_eta")) base.mcn_eta = j["mcn_eta"].get<double>();
  if (j.contains("atypical_frac"))
    base.atypical_frac = j["atypical_frac"].get<double>();
  if (j.contains("atypical_radius_min"))
    base.atypical_radius_min = j["atypical_radius_min"].get<double>();
  if (j.contains("atypical_radius_max"))
    base.atypical_radius_max = j["atypical_radius_max"].get<double>();
  if (j.contains("noise_frac")) base.noise_frac = j["noise_frac"].get<double>();
  if (j.contains("noise_box_inflate"))
    base.noise_box_inflate = j["noise_box_inflate"].get<double>();
  return base;
}

AmputationConfig amputation_config_from_json_file(
    const std::filesystem::path& path, AmputationConfig base) {
  const json j = load_json(path);
  reject_unknown_keys(j, {"prop_rows", "seed", "patterns", "weights"},
                      "amputation config");
  if (j.contains("prop_rows")) base.prop_rows = j["prop_rows"].get<double>();
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("patterns")) {
    const auto& p = j["patterns"];
    const auto rows = static_cast<Eigen::Index>(p.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(p[0].size()) : 0;
    base.patterns = BoolMatrix::Constant(rows, cols, false);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        base.patterns(r, c) =
            p[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<int>() != 0;
  }
  if (j.contains("weights")) base.weights = matrix_from_json(j["weights"]);
  return base;
}

}  // namespace cnmix
