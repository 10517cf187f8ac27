#include "cnmix/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace cnmix {

namespace {

inline double choose2(double x) { return 0.5 * x * (x - 1.0); }

// First-occurrence canonical relabeling; two partitions are the same
// clustering iff their canonical forms match.
std::vector<int> canonical(std::span<const int> labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("adjusted_rand_index: length mismatch");
  if (a.empty())
    throw std::invalid_argument("adjusted_rand_index: empty partitions");

  std::map<std::pair<int, int>, long> table;
  std::map<int, long> row_sum, col_sum;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[{a[i], b[i]}];
    ++row_sum[a[i]];
    ++col_sum[b[i]];
  }

  double index = 0.0;
  for (const auto& [key, count] : table) index += choose2(static_cast<double>(count));
  double sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : row_sum) sum_a += choose2(static_cast<double>(count));
  for (const auto& [key, count] : col_sum) sum_b += choose2(static_cast<double>(count));

  const double pairs = choose2(static_cast<double>(a.size()));
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected)
    return canonical(a) == canonical(b) ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

OutlierRates outlier_rates(std::span<const std::uint8_t> predicted,
                           std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("outlier_rates: length mismatch");

  OutlierRates r;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t)
      ++r.counts.tp;
    else if (p && !t)
      ++r.counts.fp;
    else if (!p && t)
      ++r.counts.fn;
    else
      ++r.counts.tn;
  }
  if (r.counts.tp + r.counts.fn > 0)
    r.tpr = static_cast<double>(r.counts.tp) /
            static_cast<double>(r.counts.tp + r.counts.fn);
  if (r.counts.fp + r.counts.tn > 0)
    r.fpr = static_cast<double>(r.counts.fp) /
            static_cast<double>(r.counts.fp + r.counts.tn);
  return r;
}

}  // namespace cnmix
