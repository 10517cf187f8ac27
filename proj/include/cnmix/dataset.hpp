#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cnmix/errors.hpp"

namespace cnmix {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// n x d numeric matrix with per-cell missingness. Missing cells hold NaN
/// and are never read; kernels gather observed coordinates via the mask.
/// Rows with every cell missing are rejected at ingest.
struct Dataset {
  Eigen::MatrixXd values;
  BoolMatrix mask;  // true = observed
  std::vector<std::string> columns;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }
  bool fully_observed() const { return mask.all(); }

  /// Shape agreement and the one-observed-cell-per-row invariant.
  void validate() const;
};

/// Per-row split into observed and missing coordinate sets (0-based,
/// sorted). d_obs is the number of observed coordinates of the row.
struct ObservationView {
  int row = 0;
  std::vector<int> observed_idx;
  std::vector<int> missing_idx;
  int d_obs = 0;
};

/// Rows sharing one missingness pattern, with the index split computed
/// once. Groups are ordered by first row occurrence; rows ascend.
struct PatternGroup {
  std::vector<int> observed_idx;
  std::vector<int> missing_idx;
  std::vector<int> rows;
};

/// Reads a delimited text file (comma or tab, auto-detected) with a header
/// row. Cells equal to missing_token or empty are recorded as missing.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::string& missing_token = "NA");

/// Mirror of the input format: header, comma-delimited, shortest
/// round-trip numbers, "NA" for missing cells.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

std::vector<ObservationView> observation_views(const Dataset& ds);

std::vector<PatternGroup> pattern_groups(const Dataset& ds);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace cnmix
