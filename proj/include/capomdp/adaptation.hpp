#pragma once

#include <Eigen/Dense>

#include "capomdp/common.hpp"

namespace capomdp {

/// Dirichlet-categorical posterior over p(o|a): pseudo-counts plus observed
/// counts, row-normalized on demand.
class EdgePosterior {
public:
    EdgePosterior() = default;
    EdgePosterior(int n_actions, int n_observations, double pseudo_count = 1.0);
    /// Arbitrary positive pseudo-count matrix; used to re-baseline after a
    /// recompute so drift is measured against the learned distribution.
    explicit EdgePosterior(Eigen::MatrixXd pseudo);

    int num_actions() const { return static_cast<int>(pseudo_.rows()); }
    int num_observations() const { return static_cast<int>(pseudo_.cols()); }

    void observe(int action, int observation);

    /// (count + pseudo) / sum over observations.
    double probability(int action, int observation) const;
    Eigen::VectorXd row(int action) const;
    Eigen::MatrixXd matrix() const;

    /// The prior alone (no observations), for drift comparisons.
    Eigen::VectorXd prior_row(int action) const;

    double count(int action, int observation) const { return counts_(action, observation); }

private:
    Eigen::MatrixXd pseudo_;
    Eigen::MatrixXd counts_;
};

/// update_edge per the closed form; returns the updated posterior.
EdgePosterior update_edge(EdgePosterior posterior, int action, int observation);

/// Gaussian conjugate mean tracker with known observation variance equal to
/// the prior variance.
class UtilizationEstimator {
public:
    UtilizationEstimator() = default;
    UtilizationEstimator(int n_resources, int n_actions);

    void set_prior(int resource, int action, double mean, double stddev);
    void observe(int resource, int action, double measured);

    double posterior_mean(int resource, int action) const;
    double posterior_std(int resource, int action) const;
    double prior_mean(int resource, int action) const { return prior_mean_(resource, action); }
    double prior_std(int resource, int action) const { return prior_std_(resource, action); }
    long observation_count(int resource, int action) const { return counts_(resource, action); }

    int num_resources() const { return static_cast<int>(prior_mean_.rows()); }
    int num_actions() const { return static_cast<int>(prior_mean_.cols()); }

private:
    Eigen::MatrixXd prior_mean_, prior_std_;
    Eigen::MatrixXd sum_;
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

UtilizationEstimator update_utilization(UtilizationEstimator est, int resource, int action, double measured);

/// d(X,Y) = H(X|Y) + H(Y|X) in bits, computed from a joint distribution.
/// Throws InvalidDistribution when the joint does not sum to 1.
double variation_of_information(const Eigen::MatrixXd& joint);

/// The joint used to compare a prior distribution against a learned one:
/// identical outcomes paired with mass min(p,q), residual mass spread
/// uniformly over the off-diagonal cells.
Eigen::MatrixXd overlap_coupling(const Eigen::VectorXd& prior, const Eigen::VectorXd& learned);

/// VoI between prior and learned discrete distributions under the overlap
/// coupling.
double distribution_drift_bits(const Eigen::VectorXd& prior, const Eigen::VectorXd& learned);

/// Discretizes two Gaussians onto `bins` cells spanning prior mean ± 4 prior
/// std and measures their drift.
double gaussian_drift_bits(double prior_mean, double prior_std, double learned_mean, double learned_std,
                           int bins = 32);

struct RecomputeTrigger {
    bool recompute = false;
    double voi_edges = 0.0;        // max over actions
    double voi_utilization = 0.0;  // max over (resource, action)
};

/// Fires when either the edge posterior or the utilization estimator drifted
/// beyond `threshold` bits from its prior. The caller restarts constraint
/// improvement from the cached optimal controller and omega pool.
RecomputeTrigger should_recompute(const EdgePosterior& edges, const UtilizationEstimator& util,
                                  double threshold);

}  // namespace capomdp
