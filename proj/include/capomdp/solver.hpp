#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "capomdp/constraints.hpp"
#include "capomdp/controller.hpp"
#include "capomdp/pomdp.hpp"

namespace capomdp {

struct BackupCandidate {
    Eigen::VectorXd values;
    int action = 0;
    std::vector<int> choice;  // observation -> index into the backed-up value set
};

/// Exact dynamic-programming update: every action crossed with every mapping
/// from observations to input vectors. Candidate order is fixed (action-major,
/// observation 0 the least significant digit), which later merges rely on.
/// Throws CandidateExplosion when |A|·|V|^|O| exceeds `cap`.
std::vector<BackupCandidate> dp_backup(const PomdpModel& model,
                                       const std::vector<Eigen::VectorXd>& values,
                                       std::size_t cap = 200000);

struct PruneResult {
    std::vector<int> kept;    // indices into the input, ascending
    std::vector<int> pruned;  // complement, ascending
};

/// LP-based pruning: a vector is kept iff some belief exists where it
/// exceeds every convex combination of the other vectors by more than
/// `margin_tol`. Exact duplicates keep their lowest-index representative.
PruneResult prune_dominated(const std::vector<Eigen::VectorXd>& vectors, double margin_tol = 1e-9);

/// Non-dominant alpha vectors kept around as future constraint states.
class OmegaPool {
public:
    struct Entry {
        Eigen::VectorXd values;
        int action = 0;
    };

    /// Dedup within `dedup_tol` max-norm; entries dominant over the current
    /// controller surface at any probe belief are rejected. Past `cap`,
    /// evicts the highest-utilization entry (FIFO when no utilization model).
    bool insert(Entry entry, const FiniteStateController& current, const std::vector<Belief>& probes,
                const UtilizationModel* util = nullptr);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<Entry>& entries() const { return entries_; }
    void add_raw(Entry entry) { entries_.push_back(std::move(entry)); }  // for file loading

    std::size_t cap = 500;
    double dedup_tol = 1e-9;

private:
    std::vector<Entry> entries_;
};

struct PolicyIterationOptions {
    double epsilon = 1e-4;
    int max_iterations = 500;
    int probe_count = 200;
    std::uint64_t seed = 0;
    std::size_t candidate_cap = 200000;
    std::size_t omega_cap = 500;
    // Dominance margin for pruning; coarser values collapse near-ties and
    // bound the surface on larger models at a small value cost.
    double prune_margin = 1e-9;
    // Called after each evaluation with the current controller; used by
    // monotonicity tests and progress reporting.
    std::function<void(const FiniteStateController&, int iteration)> on_iteration;
};

struct PolicyIterationResult {
    FiniteStateController controller;
    OmegaPool omega;
    bool converged = false;
    int iterations = 0;
    double final_improvement = 0.0;
};

/// Hansen policy iteration: evaluate / back up / prune / transform until the
/// Bellman improvement over the probe beliefs drops below epsilon. Pruned
/// candidates feed the omega pool.
PolicyIterationResult policy_iteration(const PomdpModel& model, FiniteStateController pi0,
                                       const PolicyIterationOptions& opts = {},
                                       const UtilizationModel* util = nullptr);

/// The probe belief set used for convergence and dominance-region queries.
std::vector<Belief> make_probe_beliefs(int n_states, int count, std::uint64_t seed);

}  // namespace capomdp
