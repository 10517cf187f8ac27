#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cnmix/model.hpp"
#include "cnmix/simulate.hpp"

namespace cnmix {

/// Study cells: every combination of family, size, overlap and missing
/// proportion, each replicated. Defaults span the full 4*2*2*3 = 48-cell
/// grid at desk scale (5 replicates).
struct StudyGrid {
  std::vector<Family> families{Family::StudentT, Family::Mcn,
                               Family::MnAtypical, Family::MnUniformNoise};
  std::vector<int> n_values{100, 500};
  std::vector<Overlap> overlaps{Overlap::Far, Overlap::Close};
  std::vector<double> missing_props{0.10, 0.50, 0.80};
  int replicates = 5;
  std::uint64_t base_seed = 1;

  std::size_t cell_count() const {
    return families.size() * n_values.size() * overlaps.size() *
           missing_props.size();
  }
};

StudyGrid grid_from_json_file(const std::filesystem::path& path,
                              StudyGrid base = {});

struct CellKey {
  Family family = Family::Mcn;
  int n = 100;
  Overlap overlap = Overlap::Far;
  double missing_prop = 0.0;
};

/// What outlier ground truth a family provides. Substitution families give
/// the standard truth; the contaminated-normal generator's bad-component
/// draws are reported as an extension and flagged as such in the output.
enum class OutlierTruth { None, Substitution, BadComponent };

OutlierTruth outlier_truth_for(Family f);

struct ModelOutcome {
  bool ok = false;
  std::string error;
  bool converged = false;
  int n_iter = 0;
  double loglik = 0.0;
  double bic = 0.0;
  double ari = 0.0;
  std::optional<double> tpr;
  std::optional<double> fpr;
};

struct RunRecord {
  CellKey cell;
  int replicate = 0;
  std::uint64_t run_seed = 0;
  ModelOutcome mcnm;
  ModelOutcome tmix;
};

struct ModelAggregate {
  int runs_ok = 0;
  std::optional<double> ari_mean, ari_sd;
  std::optional<double> tpr_mean, tpr_sd;
  std::optional<double> fpr_mean, fpr_sd;
};

struct CellAggregate {
  CellKey cell;
  ModelAggregate mcnm;
  ModelAggregate tmix;
};

struct StudyReport {
  StudyGrid grid;
  std::vector<RunRecord> runs;    // cell-major, replicate-minor
  std::vector<CellAggregate> cells;
};

/// Runs generate -> ampute -> fit both models -> score for every cell and
/// replicate. Replicates run in parallel; each writes only its own slot
/// and aggregation is a fixed-order merge, so the report is a pure
/// function of (grid, fit_cfg). Run seeds derive from the cell descriptor
/// rather than its position, so dropping cells does not reseed the rest.
/// Per-run fit failures are recorded in the report, never fatal.
StudyReport run_study(const StudyGrid& grid, const FitConfig& fit_cfg);

/// runs.csv, summary.csv, summary.json and one ARI-vs-missingness SVG per
/// (n, overlap) pair.
void write_study_report(const StudyReport& report,
                        const std::filesystem::path& out_dir);

}  // namespace cnmix
