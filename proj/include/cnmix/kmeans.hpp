#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace cnmix {

struct KMeansResult {
  std::vector<int> labels;   // 0-based cluster per row
  Eigen::MatrixXd centers;   // k x d
  double inertia = 0.0;      // total within-cluster squared distance
};

/// Lloyd's algorithm with D^2-weighted seeding. Runs `restarts` seedings
/// from the supplied generator and keeps the lowest-inertia solution.
/// Emptied clusters are reseeded to the point farthest from its center.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng,
                    int restarts = 10, int max_iter = 100);

}  // namespace cnmix
