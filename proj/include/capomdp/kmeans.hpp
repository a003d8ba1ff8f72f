#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "capomdp/common.hpp"

namespace capomdp {

/// Lloyd's k-means with k-means++ seeding. Cluster indices are canonicalized
/// by ascending centroid norm so refits on permuted data label identically.
class KMeansModel {
public:
    KMeansModel() = default;

    int k() const { return static_cast<int>(centroids_.rows()); }
    int dim() const { return static_cast<int>(centroids_.cols()); }
    const Eigen::MatrixXd& centroids() const { return centroids_; }
    void set_centroids(Eigen::MatrixXd c) { centroids_ = std::move(c); }

    /// Nearest centroid; equidistant ties go to the lower cluster index.
    int classify(const Eigen::VectorXd& features) const;

    /// Fits k clusters. Requires at least 10*k rows (InsufficientData).
    static KMeansModel fit(const Eigen::MatrixXd& rows, int k, std::uint64_t seed, int max_iter = 100);

private:
    Eigen::MatrixXd centroids_;  // k x dim
};

}  // namespace capomdp
