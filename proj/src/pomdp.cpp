#include "capomdp/pomdp.hpp"

#include <cmath>

namespace capomdp {

namespace {
constexpr double kRowSumTol = 1e-9;
}

PomdpModel::PomdpModel(int n_states, int n_actions, int n_observations, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      n_obs_(n_observations),
      discount_(discount),
      transition_(static_cast<std::size_t>(n_actions) * n_states * n_states, 0.0),
      reward_(static_cast<std::size_t>(n_states) * n_actions, 0.0),
      obs_(static_cast<std::size_t>(n_actions) * n_states * n_observations, 0.0) {
    if (n_states <= 0 || n_actions <= 0 || n_observations <= 0)
        throw ModelFormatError("model dimensions must be positive");
}

void PomdpModel::set_discount(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ModelFormatError("discount must lie in (0,1), got " + std::to_string(gamma));
    discount_ = gamma;
}

void PomdpModel::validate() const {
    if (!(discount_ > 0.0 && discount_ < 1.0))
        throw ModelFormatError("discount must lie in (0,1)");
    for (int a = 0; a < n_actions_; ++a) {
        for (int s = 0; s < n_states_; ++s) {
            double sum = 0.0;
            for (int sp = 0; sp < n_states_; ++sp) {
                double v = transition(s, a, sp);
                if (v < 0.0)
                    throw ModelFormatError("transition[" + std::to_string(a) + "][" + std::to_string(s) +
                                           "][" + std::to_string(sp) + "] is negative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw ModelFormatError("transition rows must sum to 1: offending (a=" + std::to_string(a) +
                                       ", s=" + std::to_string(s) + ") sums to " + std::to_string(sum));
        }
        for (int sp = 0; sp < n_states_; ++sp) {
            double sum = 0.0;
            for (int o = 0; o < n_obs_; ++o) {
                double v = observation(o, sp, a);
                if (v < 0.0)
                    throw ModelFormatError("obs_model[" + std::to_string(a) + "][" + std::to_string(sp) +
                                           "][" + std::to_string(o) + "] is negative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw ModelFormatError("obs_model rows must sum to 1: offending (a=" + std::to_string(a) +
                                       ", s'=" + std::to_string(sp) + ") sums to " + std::to_string(sum));
        }
    }
    for (std::size_t i = 0; i < reward_.size(); ++i)
        if (!std::isfinite(reward_[i]))
            throw ModelFormatError("reward entry " + std::to_string(i) + " is not finite");
}

Belief::Belief(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
        if (probs_[i] < 0.0)
            throw ModelFormatError("belief entry " + std::to_string(i) + " is negative");
        sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ModelFormatError("belief must sum to 1, got " + std::to_string(sum));
}

Belief Belief::uniform(int n_states) {
    return Belief(Eigen::VectorXd::Constant(n_states, 1.0 / n_states));
}

Belief belief_update(const PomdpModel& model, const Belief& b, int action, int observation) {
    const int n = model.num_states();
    Eigen::VectorXd next(n);
    double norm = 0.0;
    for (int sp = 0; sp < n; ++sp) {
        double pred = 0.0;
        for (int s = 0; s < n; ++s) pred += model.transition(s, action, sp) * b[s];
        double v = model.observation(observation, sp, action) * pred;
        next[sp] = v;
        norm += v;
    }
    if (norm <= 0.0) throw ZeroProbabilityObservation(action, observation);
    next /= norm;
    return Belief(next);
}

Belief random_belief(int n_states, Rng& rng) {
    std::exponential_distribution<double> exp1(1.0);
    Eigen::VectorXd v(n_states);
    double sum = 0.0;
    for (int i = 0; i < n_states; ++i) {
        v[i] = exp1(rng);
        sum += v[i];
    }
    v /= sum;
    return Belief(v);
}

}  // namespace capomdp
