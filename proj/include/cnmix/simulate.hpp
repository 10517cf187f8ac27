#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cnmix/dataset.hpp"

namespace cnmix {

enum class Family { StudentT, Mcn, MnAtypical, MnUniformNoise };
enum class Overlap { Far, Close };

const char* family_name(Family f);
Family family_from_name(const std::string& name);
const char* overlap_name(Overlap o);
Overlap overlap_from_name(const std::string& name);

/// Two-component generator settings. Component means sit at the origin and
/// at a constant-coordinate offset chosen by the overlap level; scales are
/// identity. Family knobs below are the generator defaults and are all
/// configurable.
struct ScenarioConfig {
  Family family = Family::Mcn;
  int n = 100;
  Overlap overlap = Overlap::Far;
  int g = 2;  // the generator is two-component
  std::uint64_t seed = 1;
  int d = 2;

  double mean_far = 7.0;
  double mean_close = 3.0;
  double t_nu = 4.0;          // StudentT tails
  double mcn_alpha = 0.9;     // Mcn good-point proportion
  double mcn_eta = 20.0;      // Mcn contamination inflation
  double atypical_frac = 0.01;
  double atypical_radius_min = 8.0;  // Mahalanobis ring for substitutes
  double atypical_radius_max = 12.0;
  double noise_frac = 0.05;
  double noise_box_inflate = 0.5;  // half-width growth of the noise box
};

/// Generated data plus the generator's ground truth: component labels
/// (1-based), outlier indicators, and the parameters used.
struct LabeledDataset {
  Dataset data;
  std::vector<int> true_labels;
  std::vector<std::uint8_t> true_outlier;
  ScenarioConfig params;
  std::vector<Eigen::VectorXd> means;  // component means actually used
  Eigen::MatrixXd sigma;               // shared scale actually used
};

LabeledDataset generate_scenario(const ScenarioConfig& cfg);

/// Row-wise MAR amputation. Every candidate row is assigned one pattern
/// uniformly at random; within a pattern, a weighted sum of the values
/// that would remain observed is standardized and passed through a
/// logistic to bias which rows are amputed (higher score, higher
/// probability). Exactly round(prop_rows * n) rows lose cells.
struct AmputationConfig {
  double prop_rows = 0.1;
  BoolMatrix patterns;      // k x d, true = made missing; empty -> defaults
  Eigen::MatrixXd weights;  // k x d MAR scores; empty -> defaults
  std::uint64_t seed = 1;
};

struct AmputeInfo {
  int amputed_rows = 0;
  bool no_op = false;
  std::string warning;
};

Dataset ampute(const Dataset& ds, const AmputationConfig& cfg,
               AmputeInfo* info = nullptr);
LabeledDataset ampute(const LabeledDataset& lds, const AmputationConfig& cfg,
                      AmputeInfo* info = nullptr);

/// Ten pattern slots. For d == 2 the two admissible single-coordinate
/// patterns cycle through the slots; for larger d the d single-coordinate
/// patterns are padded with seeded random two-coordinate patterns. No
/// pattern ever covers a whole row.
BoolMatrix default_patterns(int d, int k = 10, std::uint64_t seed = 1);

/// Unit weight on every to-remain-observed coordinate, scaled per slot so
/// the slots carry distinct vectors.
Eigen::MatrixXd default_weights(const BoolMatrix& patterns);

}  // namespace cnmix
