#include "cnmix/kmeans.hpp"

#include <limits>
#include <stdexcept>

namespace cnmix {

namespace {

// D^2-weighted seeding.
Eigen::MatrixXd seed_centers(const Eigen::MatrixXd& x, int k,
                             std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 =
      (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          chosen = i;
          break;
        }
        chosen = i;
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin(
        (x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng,
                    int restarts, int max_iter) {
  const Eigen::Index n = x.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer rows than clusters");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int attempt = 0; attempt < restarts; ++attempt) {
    Eigen::MatrixXd centers = seed_centers(x, k, rng);
    std::vector<int> labels(static_cast<std::size_t>(n), 0);

    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double bestd = (x.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double dist = (x.row(i) - centers.row(c)).squaredNorm();
          if (dist < bestd) {
            bestd = dist;
            arg = c;
          }
        }
        if (labels[static_cast<std::size_t>(i)] != arg) {
          labels[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }

      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        counts[labels[static_cast<std::size_t>(i)]] += 1.0;
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0.0) {
          centers.row(c) = sums.row(c) / counts[c];
        } else {
          // Reseed an emptied cluster to the globally farthest point.
          Eigen::Index far = 0;
          double fard = -1.0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double dist =
                (x.row(i) -
                 centers.row(labels[static_cast<std::size_t>(i)]))
                    .squaredNorm();
            if (dist > fard) {
              fard = dist;
              far = i;
            }
          }
          centers.row(c) = x.row(far);
          changed = true;
        }
      }
      if (!changed && iter > 0) break;
    }

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia +=
          (x.row(i) - centers.row(labels[static_cast<std::size_t>(i)]))
              .squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centers = centers;
    }
  }
  return best;
}

}  // namespace cnmix
