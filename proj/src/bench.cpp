#include "cnmix/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cnmix/ecm_mcnm.hpp"
#include "cnmix/metrics.hpp"
#include "cnmix/rng.hpp"
#include "cnmix/tmix.hpp"

namespace cnmix {

using nlohmann::json;

OutlierTruth outlier_truth_for(Family f) {
  switch (f) {
    case Family::StudentT: return OutlierTruth::None;
    case Family::Mcn: return OutlierTruth::BadComponent;
    case Family::MnAtypical:
    case Family::MnUniformNoise: return OutlierTruth::Substitution;
  }
  return OutlierTruth::None;
}

namespace {

const char* truth_name(OutlierTruth t) {
  switch (t) {
    case OutlierTruth::None: return "none";
    case OutlierTruth::Substitution: return "substitution";
    case OutlierTruth::BadComponent: return "bad_component";
  }
  return "?";
}

std::uint64_t cell_hash(const CellKey& c) {
  return derive_seed(0x63656c6cull,
                     {static_cast<std::uint64_t>(c.family),
                      static_cast<std::uint64_t>(c.n),
                      static_cast<std::uint64_t>(c.overlap),
                      static_cast<std::uint64_t>(std::llround(c.missing_prop * 1e6))});
}

ModelOutcome score_fit(const FitResult& fit, const LabeledDataset& truth) {
  ModelOutcome out;
  out.ok = true;
  out.converged = fit.converged;
  out.n_iter = fit.n_iter;
  out.loglik = fit.loglik();
  out.bic = fit.bic;
  out.ari = adjusted_rand_index(fit.labels, truth.true_labels);
  if (outlier_truth_for(truth.params.family) != OutlierTruth::None) {
    const auto rates = outlier_rates(fit.outlier_flag, truth.true_outlier);
    out.tpr = rates.tpr;
    out.fpr = rates.fpr;
  }
  return out;
}

void aggregate_model(const std::vector<const ModelOutcome*>& outcomes,
                     ModelAggregate& agg) {
  std::vector<double> aris, tprs, fprs;
  for (const auto* o : outcomes) {
    if (!o->ok) continue;
    ++agg.runs_ok;
    aris.push_back(o->ari);
    if (o->tpr) tprs.push_back(*o->tpr);
    if (o->fpr) fprs.push_back(*o->fpr);
  }
  const auto summarize = [](const std::vector<double>& v,
                            std::optional<double>& mean,
                            std::optional<double>& sd) {
    if (v.empty()) return;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    mean = m;
    if (v.size() > 1) {
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      sd = std::sqrt(s / static_cast<double>(v.size() - 1));
    } else {
      sd = 0.0;
    }
  };
  summarize(aris, agg.ari_mean, agg.ari_sd);
  summarize(tprs, agg.tpr_mean, agg.tpr_sd);
  summarize(fprs, agg.fpr_mean, agg.fpr_sd);
}

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

StudyGrid grid_from_json_file(const std::filesystem::path& path,
                              StudyGrid base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "families") {
      base.families.clear();
      for (const auto& f : value)
        base.families.push_back(family_from_name(f.get<std::string>()));
    } else if (key == "n_values") {
      base.n_values = value.get<std::vector<int>>();
    } else if (key == "overlaps") {
      base.overlaps.clear();
      for (const auto& o : value)
        base.overlaps.push_back(overlap_from_name(o.get<std::string>()));
    } else if (key == "missing_props") {
      base.missing_props = value.get<std::vector<double>>();
    } else if (key == "replicates") {
      base.replicates = value.get<int>();
    } else if (key == "base_seed") {
      base.base_seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("grid config: unknown key '" + key + "'");
    }
  }
  if (base.families.empty() || base.n_values.empty() ||
      base.overlaps.empty() || base.missing_props.empty() ||
      base.replicates < 1)
    throw ConfigError("grid config: empty axis or nonpositive replicates");
  return base;
}

StudyReport run_study(const StudyGrid& grid, const FitConfig& fit_cfg) {
  StudyReport report;
  report.grid = grid;

  std::vector<CellKey> cells;
  for (Family f : grid.families)
    for (int n : grid.n_values)
      for (Overlap o : grid.overlaps)
        for (double p : grid.missing_props)
          cells.push_back(CellKey{f, n, o, p});

  const int reps = grid.replicates;
  report.runs.resize(cells.size() * static_cast<std::size_t>(reps));

  const int total = static_cast<int>(report.runs.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < total; ++t) {
    const std::size_t ci = static_cast<std::size_t>(t) / static_cast<std::size_t>(reps);
    const int rep = t % reps;
    const CellKey& cell = cells[ci];
    RunRecord& rec = report.runs[static_cast<std::size_t>(t)];
    rec.cell = cell;
    rec.replicate = rep;
    rec.run_seed = derive_seed(grid.base_seed,
                               {cell_hash(cell), static_cast<std::uint64_t>(rep)});

    LabeledDataset lds;
    bool generated = false;
    try {
      ScenarioConfig scen;
      scen.family = cell.family;
      scen.n = cell.n;
      scen.overlap = cell.overlap;
      scen.seed = derive_seed(rec.run_seed, {1});
      lds = generate_scenario(scen);
      if (cell.missing_prop > 0.0) {
        AmputationConfig amp;
        amp.prop_rows = cell.missing_prop;
        amp.seed = derive_seed(rec.run_seed, {2});
        lds = ampute(lds, amp);
      }
      generated = true;
    } catch (const std::exception& e) {
      rec.mcnm.error = rec.tmix.error = std::string("generation: ") + e.what();
    }
    if (!generated) continue;

    try {
      FitConfig cfg = fit_cfg;
      cfg.seed = derive_seed(rec.run_seed, {3});
      rec.mcnm = score_fit(fit_mcnm(lds.data, 2, cfg), lds);
    } catch (const std::exception& e) {
      rec.mcnm.ok = false;
      rec.mcnm.error = e.what();
    }
    try {
      FitConfig cfg = fit_cfg;
      cfg.seed = derive_seed(rec.run_seed, {4});
      rec.tmix = score_fit(fit_tmix(lds.data, 2, cfg), lds);
    } catch (const std::exception& e) {
      rec.tmix.ok = false;
      rec.tmix.error = e.what();
    }
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    CellAggregate agg;
    agg.cell = cells[ci];
    std::vector<const ModelOutcome*> mcnm, tmix;
    for (int rep = 0; rep < reps; ++rep) {
      const auto& rec = report.runs[ci * static_cast<std::size_t>(reps) +
                                    static_cast<std::size_t>(rep)];
      mcnm.push_back(&rec.mcnm);
      tmix.push_back(&rec.tmix);
    }
    aggregate_model(mcnm, agg.mcnm);
    aggregate_model(tmix, agg.tmix);
    report.cells.push_back(std::move(agg));
  }
  return report;
}

namespace {

void write_runs_csv(const StudyReport& report,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "family,n,overlap,missing_prop,replicate,seed,model,ok,error,"
         "converged,n_iter,loglik,bic,ari,tpr,fpr,outlier_truth,extension\n";
  for (const auto& rec : report.runs) {
    const OutlierTruth truth = outlier_truth_for(rec.cell.family);
    const bool extension = truth == OutlierTruth::BadComponent;
    for (const auto& pair :
         {std::pair<const char*, const ModelOutcome*>{"mcnm", &rec.mcnm},
          std::pair<const char*, const ModelOutcome*>{"tmix", &rec.tmix}}) {
      const auto& o = *pair.second;
      std::string error = o.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      out << family_name(rec.cell.family) << ',' << rec.cell.n << ','
          << overlap_name(rec.cell.overlap) << ','
          << format_double(rec.cell.missing_prop) << ',' << rec.replicate
          << ',' << rec.run_seed << ',' << pair.first << ',' << (o.ok ? 1 : 0)
          << ',' << error << ',' << (o.converged ? 1 : 0) << ',' << o.n_iter
          << ',' << (o.ok ? format_double(o.loglik) : std::string()) << ','
          << (o.ok ? format_double(o.bic) : std::string()) << ','
          << (o.ok ? format_double(o.ari) : std::string()) << ','
          << opt_str(o.tpr) << ',' << opt_str(o.fpr) << ','
          << truth_name(truth) << ',' << (extension ? 1 : 0) << '\n';
    }
  }
}

void write_summary_csv(const StudyReport& report,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "family,n,overlap,missing_prop,model,runs_ok,ari_mean,ari_sd,"
         "tpr_mean,tpr_sd,fpr_mean,fpr_sd,outlier_truth,extension\n";
  for (const auto& cell : report.cells) {
    const OutlierTruth truth = outlier_truth_for(cell.cell.family);
    const bool extension = truth == OutlierTruth::BadComponent;
    for (const auto& pair :
         {std::pair<const char*, const ModelAggregate*>{"mcnm", &cell.mcnm},
          std::pair<const char*, const ModelAggregate*>{"tmix", &cell.tmix}}) {
      const auto& a = *pair.second;
      out << family_name(cell.cell.family) << ',' << cell.cell.n << ','
          << overlap_name(cell.cell.overlap) << ','
          << format_double(cell.cell.missing_prop) << ',' << pair.first << ','
          << a.runs_ok << ',' << opt_str(a.ari_mean) << ','
          << opt_str(a.ari_sd) << ',' << opt_str(a.tpr_mean) << ','
          << opt_str(a.tpr_sd) << ',' << opt_str(a.fpr_mean) << ','
          << opt_str(a.fpr_sd) << ',' << truth_name(truth) << ','
          << (extension ? 1 : 0) << '\n';
    }
  }
}

json aggregate_to_json(const ModelAggregate& a) {
  json j{{"runs_ok", a.runs_ok}};
  if (a.ari_mean) j["ari_mean"] = *a.ari_mean;
  if (a.ari_sd) j["ari_sd"] = *a.ari_sd;
  if (a.tpr_mean) j["tpr_mean"] = *a.tpr_mean;
  if (a.tpr_sd) j["tpr_sd"] = *a.tpr_sd;
  if (a.fpr_mean) j["fpr_mean"] = *a.fpr_mean;
  if (a.fpr_sd) j["fpr_sd"] = *a.fpr_sd;
  return j;
}

void write_summary_json(const StudyReport& report,
                        const std::filesystem::path& path) {
  json grid;
  grid["replicates"] = report.grid.replicates;
  grid["base_seed"] = report.grid.base_seed;
  grid["n_values"] = report.grid.n_values;
  grid["missing_props"] = report.grid.missing_props;
  json fams = json::array(), overs = json::array();
  for (Family f : report.grid.families) fams.push_back(family_name(f));
  for (Overlap o : report.grid.overlaps) overs.push_back(overlap_name(o));
  grid["families"] = fams;
  grid["overlaps"] = overs;

  json cells = json::array();
  for (const auto& cell : report.cells) {
    const OutlierTruth truth = outlier_truth_for(cell.cell.family);
    cells.push_back(
        json{{"family", family_name(cell.cell.family)},
             {"n", cell.cell.n},
             {"overlap", overlap_name(cell.cell.overlap)},
             {"missing_prop", cell.cell.missing_prop},
             {"outlier_truth", truth_name(truth)},
             {"extension", truth == OutlierTruth::BadComponent},
             {"mcnm", aggregate_to_json(cell.mcnm)},
             {"tmix", aggregate_to_json(cell.tmix)}});
  }
  json doc{{"schema_version", 1}, {"grid", grid}, {"cells", cells}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

// Minimal line chart: mean ARI against missing proportion, one line per
// family, solid for the contaminated-normal fit and dashed for the t fit.
void write_ari_plot(const StudyReport& report, int n, Overlap overlap,
                    const std::filesystem::path& path) {
  const int width = 640, height = 420;
  const int ml = 60, mr = 160, mt = 30, mb = 50;
  const double x0 = 0.0, x1 = 1.0, y0 = -0.1, y1 = 1.05;
  const auto sx = [&](double p) {
    return ml + (p - x0) / (x1 - x0) * (width - ml - mr);
  };
  const auto sy = [&](double a) {
    return height - mb - (a - y0) / (y1 - y0) * (height - mt - mb);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << ml << "' y='18' font-size='14'>mean ARI vs missing "
         "proportion (n="
      << n << ", " << overlap_name(overlap) << ")</text>\n";
  // axes
  out << "<line x1='" << ml << "' y1='" << sy(y0) << "' x2='" << ml
      << "' y2='" << sy(y1) << "' stroke='black'/>\n";
  out << "<line x1='" << sx(x0) << "' y1='" << height - mb << "' x2='"
      << sx(x1) << "' y2='" << height - mb << "' stroke='black'/>\n";
  for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    out << "<text x='" << sx(tick) - 8 << "' y='" << height - mb + 18
        << "' font-size='11'>" << format_double(tick) << "</text>\n";
    out << "<text x='" << ml - 38 << "' y='" << sy(tick) + 4
        << "' font-size='11'>" << format_double(tick) << "</text>\n";
  }

  int fi = 0;
  int legend_y = mt + 10;
  for (Family f : report.grid.families) {
    const char* color = colors[fi % 4];
    for (const char* model : {"mcnm", "tmix"}) {
      std::string points;
      for (const auto& cell : report.cells) {
        if (cell.cell.family != f || cell.cell.n != n ||
            cell.cell.overlap != overlap)
          continue;
        const auto& agg = model == std::string("mcnm") ? cell.mcnm : cell.tmix;
        if (!agg.ari_mean) continue;
        points += format_double(sx(cell.cell.missing_prop)) + "," +
                  format_double(sy(*agg.ari_mean)) + " ";
      }
      if (points.empty()) continue;
      out << "<polyline fill='none' stroke='" << color << "' stroke-width='2'"
          << (model == std::string("tmix") ? " stroke-dasharray='6,4'" : "")
          << " points='" << points << "'/>\n";
    }
    out << "<line x1='" << width - mr + 10 << "' y1='" << legend_y << "' x2='"
        << width - mr + 34 << "' y2='" << legend_y << "' stroke='" << color
        << "' stroke-width='2'/>\n";
    out << "<text x='" << width - mr + 40 << "' y='" << legend_y + 4
        << "' font-size='11'>" << family_name(f) << "</text>\n";
    legend_y += 18;
    ++fi;
  }
  out << "<text x='" << width - mr + 10 << "' y='" << legend_y + 8
      << "' font-size='11'>solid: mcnm, dashed: tmix</text>\n";
  out << "</svg>\n";
}

}  // namespace

void write_study_report(const StudyReport& report,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_runs_csv(report, out_dir / "runs.csv");
  write_summary_csv(report, out_dir / "summary.csv");
  write_summary_json(report, out_dir / "summary.json");
  for (int n : report.grid.n_values)
    for (Overlap o : report.grid.overlaps)
      write_ari_plot(report, n, o,
                     out_dir / ("ari_n" + std::to_string(n) + "_" +
                                overlap_name(o) + ".svg"));
}

}  // namespace cnmix
