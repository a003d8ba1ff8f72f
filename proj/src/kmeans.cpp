#include "capomdp/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace capomdp {

int KMeansModel::classify(const Eigen::VectorXd& features) const {
    int best = 0;
    double best_d = (centroids_.row(0).transpose() - features).squaredNorm();
    for (int c = 1; c < k(); ++c) {
        double d = (centroids_.row(c).transpose() - features).squaredNorm();
        if (d < best_d - 1e-15) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

KMeansModel KMeansModel::fit(const Eigen::MatrixXd& rows, int k, std::uint64_t seed, int max_iter) {
    const int n = static_cast<int>(rows.rows());
    const int d = static_cast<int>(rows.cols());
    if (k <= 0) throw ModelFormatError("k must be positive");
    if (n < 10 * k)
        throw InsufficientData("k-means needs at least " + std::to_string(10 * k) + " rows, got " +
                               std::to_string(n));

    Rng rng(derive_seed(seed, 0x4bea75ULL));
    Eigen::MatrixXd centroids(k, d);

    // k-means++ seeding
    std::uniform_int_distribution<int> pick(0, n - 1);
    centroids.row(0) = rows.row(pick(rng));
    Eigen::VectorXd dist2 = (rows.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = dist2.sum();
        int chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dist2[i];
                if (target <= acc) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.row(c) = rows.row(chosen);
        dist2 = dist2.cwiseMin((rows.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (rows.row(i) - centroids.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                double dd = (rows.row(i) - centroids.row(c)).squaredNorm();
                if (dd < best_d - 1e-15) {
                    best_d = dd;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(assign[i]) += rows.row(i);
            ++counts[assign[i]];
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centroids.row(c) = sums.row(c) / counts[c];
        // empty clusters respawn at the farthest point
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            int far = 0;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                double dd = (rows.row(i) - centroids.row(assign[i])).squaredNorm();
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            centroids.row(c) = rows.row(far);
        }
    }

    // canonical order: ascending centroid norm
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double na = centroids.row(a).norm();
        double nb = centroids.row(b).norm();
        if (std::abs(na - nb) > 1e-12) return na < nb;
        return a < b;
    });
    Eigen::MatrixXd sorted(k, d);
    for (int c = 0; c < k; ++c) sorted.row(c) = centroids.row(order[c]);

    KMeansModel model;
    model.centroids_ = std::move(sorted);
    return model;
}

}  // namespace capomdp
