#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "capomdp/common.hpp"

namespace capomdp {

/// Discrete POMDP with dense tensors. Sizes stay small (|S| of order tens),
/// so everything is stored flat and validated on construction.
class PomdpModel {
public:
    PomdpModel() = default;
    PomdpModel(int n_states, int n_actions, int n_observations, double discount = 0.95);

    int num_states() const { return n_states_; }
    int num_actions() const { return n_actions_; }
    int num_observations() const { return n_obs_; }
    double discount() const { return discount_; }
    void set_discount(double gamma);

    // T(s'|s,a)
    double transition(int s, int a, int s_next) const {
        return transition_[(static_cast<std::size_t>(a) * n_states_ + s) * n_states_ + s_next];
    }
    double& transition(int s, int a, int s_next) {
        return transition_[(static_cast<std::size_t>(a) * n_states_ + s) * n_states_ + s_next];
    }

    // R(s,a)
    double reward(int s, int a) const {
        return reward_[static_cast<std::size_t>(s) * n_actions_ + a];
    }
    double& reward(int s, int a) {
        return reward_[static_cast<std::size_t>(s) * n_actions_ + a];
    }

    // O(o|s',a)
    double observation(int o, int s_next, int a) const {
        return obs_[(static_cast<std::size_t>(a) * n_states_ + s_next) * n_obs_ + o];
    }
    double& observation(int o, int s_next, int a) {
        return obs_[(static_cast<std::size_t>(a) * n_states_ + s_next) * n_obs_ + o];
    }

    /// Checks row-stochasticity of T and O and the discount range.
    /// Throws ModelFormatError naming the offending index.
    void validate() const;

    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::string> observation_names;

private:
    int n_states_ = 0;
    int n_actions_ = 0;
    int n_obs_ = 0;
    double discount_ = 0.95;
    std::vector<double> transition_;  // [a][s][s']
    std::vector<double> reward_;      // [s][a]
    std::vector<double> obs_;         // [a][s'][o]
};

/// Probability vector over states.
class Belief {
public:
    Belief() = default;
    explicit Belief(Eigen::VectorXd probs);
    static Belief uniform(int n_states);

    const Eigen::VectorXd& probs() const { return probs_; }
    double operator[](int s) const { return probs_[s]; }
    int size() const { return static_cast<int>(probs_.size()); }

private:
    Eigen::VectorXd probs_;
};

struct AlphaVector {
    Eigen::VectorXd values;
    int action = 0;
};

/// Bayes filter step: b'(s') ∝ O(o|s',a) Σ_s T(s'|s,a) b(s).
/// Throws ZeroProbabilityObservation when the normalizer vanishes.
Belief belief_update(const PomdpModel& model, const Belief& b, int action, int observation);

/// Dirichlet(1) belief sample (uniform over the simplex).
Belief random_belief(int n_states, Rng& rng);

}  // namespace capomdp
