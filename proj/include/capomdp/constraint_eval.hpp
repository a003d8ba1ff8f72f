#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "capomdp/constraints.hpp"
#include "capomdp/controller.hpp"

namespace capomdp {

/// Gaussian summary of total utilization over one horizon, per resource,
/// with the chain diagnostics gathered while estimating it.
struct UtilizationPosterior {
    Eigen::VectorXd mean;  // per resource
    Eigen::VectorXd std;   // per resource
    double accept_rate = 0.0;
    int chain_length = 1;
    int n_restarts = 0;
};

struct ConstraintEvalOptions {
    double epsilon_d = 0.01;      // variational-distance mixing threshold
    double epsilon_cov = 0.005;   // lagged autocovariance restart threshold
    int lag = 5;
    int burn_in = 50;             // chain steps discarded before fitting
    int max_chain_steps = 2000;
    int max_restarts = 200;
    int min_restarts = 8;
    int parallel_restarts = 4;
    std::uint64_t seed = 0;
};

/// Inverse standard normal CDF (Acklam's rational approximation).
double normal_quantile(double p);

struct ConstraintEvalResult {
    Eigen::VectorXd satisfaction;  // N_h per resource
    UtilizationPosterior posterior;
    bool converged = true;

    /// True when N_h >= eta_h for every resource.
    bool passes(const ConstraintSpec& spec, double slack = 0.0) const {
        for (int h = 0; h < spec.num_resources(); ++h)
            if (satisfaction[h] < spec.rows[h].eta - slack) return false;
        return true;
    }

    /// Worst-resource z-score headroom: min_h [(c_h - mean_h)/std_h -
    /// quantile(eta_h)], clamped to +-50. Unlike the probability margin this
    /// stays informative when the CDF saturates, so searches can rank
    /// non-passing controllers.
    double z_margin(const ConstraintSpec& spec) const;
};

/// One horizon walk of the controller: T/dt epochs, each drawing per-resource
/// usage from N(mu, sigma) clamped at zero and the next node from the current
/// node's edge_obs row composed with its successor map. Returns per-resource
/// totals.
Eigen::VectorXd sample_trajectory(const FiniteStateController& fsc, const UtilizationModel& util,
                                  int start_node, const ConstraintSpec& spec, Rng& rng);

/// Metropolis-Hastings acceptance ratio between two fitted posteriors under
/// the walk-centred Gaussian prior. The likelihood of each batch mean under
/// its own fit contributes 1/sigma, so the ratio multiplies prior odds with
/// the std ratio per resource.
double acceptance_ratio(const UtilizationPosterior& proposed, const UtilizationPosterior& current,
                        const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_std);

/// Accepts when the ratio clears 1, otherwise with probability equal to the
/// ratio against a uniform draw.
bool metropolis_accept(const UtilizationPosterior& proposed, const UtilizationPosterior& current,
                       const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_std, Rng& rng);
bool accept_with_ratio(double ratio, Rng& rng);

/// Expected per-resource total of a horizon walk under uniform edge
/// probabilities, starting from a uniform node distribution. Used as the
/// centre of the MH prior (std = 50% of the mean).
Eigen::VectorXd deterministic_mean_walk(const FiniteStateController& fsc, const UtilizationModel& util,
                                        const ConstraintSpec& spec);

/// Full evaluation loop: MH chains from random start beliefs, restarted until
/// the lagged autocovariance of the restart posteriors settles, then
/// N_h = CDF of the pooled posterior at c_h.
ConstraintEvalResult constraint_eval(const FiniteStateController& fsc, const ConstraintSpec& spec,
                                     const UtilizationModel& util,
                                     const ConstraintEvalOptions& opts = {});

}  // namespace capomdp
