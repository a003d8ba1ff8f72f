#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "capomdp/common.hpp"

namespace capomdp {

struct ResourceLimit {
    std::string resource;
    double limit = 0.0;  // allowed total over one horizon
    double eta = 0.0;    // required satisfaction probability
};

/// Soft limits [c_h, eta_h] over a horizon of T seconds sampled every dt.
struct ConstraintSpec {
    std::vector<ResourceLimit> rows;
    double horizon_s = 1.0;
    double epoch_s = 0.1;

    int num_resources() const { return static_cast<int>(rows.size()); }

    int epochs_per_horizon() const {
        double ratio = horizon_s / epoch_s;
        int n = static_cast<int>(std::lround(ratio));
        if (n <= 0 || std::abs(ratio - n) > 1e-9)
            throw ModelFormatError("horizon_s / epoch_s must be a positive integer, got " +
                                   std::to_string(ratio));
        return n;
    }

    void validate() const {
        for (const auto& r : rows) {
            if (!(r.limit > 0.0)) throw ModelFormatError("constraint limit for '" + r.resource + "' must be > 0");
            if (!(r.eta > 0.0 && r.eta < 1.0))
                throw ModelFormatError("constraint eta for '" + r.resource + "' must lie in (0,1)");
        }
        (void)epochs_per_horizon();
    }
};

/// Per-resource, per-action Gaussian usage per epoch.
class UtilizationModel {
public:
    UtilizationModel() = default;
    UtilizationModel(int n_resources, int n_actions)
        : n_resources_(n_resources), n_actions_(n_actions),
          mean_(static_cast<std::size_t>(n_resources) * n_actions, 0.0),
          std_(static_cast<std::size_t>(n_resources) * n_actions, 0.0) {}

    int num_resources() const { return n_resources_; }
    int num_actions() const { return n_actions_; }

    double mean(int resource, int action) const { return mean_[idx(resource, action)]; }
    double stddev(int resource, int action) const { return std_[idx(resource, action)]; }

    void set(int resource, int action, double mean, double stddev) {
        if (mean < 0.0 || stddev < 0.0)
            throw ModelFormatError("utilization parameters must be nonnegative (resource " +
                                   std::to_string(resource) + ", action " + std::to_string(action) + ")");
        mean_[idx(resource, action)] = mean;
        std_[idx(resource, action)] = stddev;
    }

    /// Strictly smaller mean in every resource: the feasibility test for
    /// injecting `candidate` in place of `incumbent`.
    bool strictly_cheaper(int candidate_action, int incumbent_action) const {
        for (int h = 0; h < n_resources_; ++h)
            if (!(mean(h, candidate_action) < mean(h, incumbent_action))) return false;
        return true;
    }

private:
    std::size_t idx(int resource, int action) const {
        return static_cast<std::size_t>(resource) * n_actions_ + action;
    }
    int n_resources_ = 0;
    int n_actions_ = 0;
    std::vector<double> mean_;
    std::vector<double> std_;
};

}  // namespace capomdp
