#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace cnmix {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

/// Chance-corrected partition agreement from the contingency table.
/// 1 for identical partitions up to relabeling. When the maximum index
/// equals the expected index (degenerate table), returns 1 if the two
/// partitions are identical and 0 otherwise.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// TPR = tp/(tp+fn), FPR = fp/(fp+tn); a rate with an empty denominator is
/// reported as absent, never as zero.
struct OutlierRates {
  std::optional<double> tpr;
  std::optional<double> fpr;
  ConfusionCounts counts;
};

OutlierRates outlier_rates(std::span<const std::uint8_t> predicted,
                           std::span<const std::uint8_t> truth);

}  // namespace cnmix
