#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "capomdp/constraint_eval.hpp"
#include "capomdp/controller.hpp"
#include "capomdp/solver.hpp"

namespace capomdp {

/// A feasible (machine state, omega entry) pair: the omega action uses
/// strictly less of every constrained resource than the host's action.
/// `gap` is the mean value difference over the host's dominance region.
struct FeasiblePair {
    int node = 0;
    int omega = 0;
    double gap = 0.0;
};

/// Ordered search space of the branch and bound: pairs ascending by value
/// gap crossed with the redirection levels; `span` is a contiguous index
/// range in pair-major, level-minor order.
struct FeasibleRegion {
    std::vector<FeasiblePair> pairs;
    std::vector<double> levels;
    int span_begin = 0;
    int span_end = 0;

    int span_size() const { return span_end - span_begin; }
    int pair_of(int element) const { return element / static_cast<int>(levels.size()); }
    int level_of(int element) const { return element % static_cast<int>(levels.size()); }
};

struct BnBNode {
    FeasibleRegion region;
    double lower_g = 0.0;  // value loss with no edges redirected
    double upper_f = 0.0;  // value loss with every edge redirected
    Eigen::VectorXd max_redirect_satisfaction;
};

/// Enumerates all feasible pairs, ordered by ascending value gap, spanning
/// every (pair, level) element. Throws NoFeasiblePair when no omega action
/// strictly reduces utilization against any node.
FeasibleRegion all_feasible_regions(const FiniteStateController& pi, const OmegaPool& omega,
                                    const UtilizationModel& util, const std::vector<double>& levels,
                                    const std::vector<Belief>& probes);

/// The root the search actually explores: feasible pairs minus hosts without
/// foreign in-edges (their injections are no-ops at every level), truncated
/// to `max_pairs` with the lowest-gap pairs kept per omega action so cheap
/// actions survive the cut. max_pairs <= 0 keeps everything.
FeasibleRegion prepare_feasible_root(const FiniteStateController& pi, const OmegaPool& omega,
                                     const UtilizationModel& util, const std::vector<double>& levels,
                                     const std::vector<Belief>& probes, int max_pairs);

/// Injects omega entry `entry` next to `host`: the new node takes the host's
/// outgoing edges (self-loops of the host turn into edges back to the host)
/// and each in-edge of the host is independently redirected with probability
/// `level`. The result is re-evaluated. `redirect_all` forces every in-edge
/// over (used for upper bounds).
FiniteStateController inject(const PomdpModel& model, const FiniteStateController& pi, int host,
                             const OmegaPool::Entry& entry, double level, Rng& rng,
                             bool redirect_all = false);

struct ConstraintImproveOptions {
    std::vector<double> levels = {0.25, 0.5, 0.75, 1.0};
    // Progress hook: (outer iteration, injected so far, z margin, satisfied)
    std::function<void(int, int, double, bool)> on_outer;
    int max_outer = 20;            // constraint states injected at most
    int max_pairs = 0;             // 0 = no cap; otherwise keep lowest-gap pairs
    int bound_span_min = 16;       // spans at least this large get bound-pruned
    int restoration_states = 2;    // value-restoring injections after compliance
    std::uint64_t seed = 0;
    int probe_count = 200;
    ConstraintEvalOptions eval;        // leaf + final evaluations
    ConstraintEvalOptions bound_eval;  // cheaper settings for bound pruning

    ConstraintImproveOptions() {
        bound_eval.min_restarts = 6;
        bound_eval.max_restarts = 40;
    }
};

struct ConstraintImproveResult {
    FiniteStateController controller;
    Eigen::VectorXd satisfaction;
    double value_loss = 0.0;
    int states_injected = 0;
    long leaves_explored = 0;
    bool unsatisfiable = false;
    bool already_compliant = false;
};

/// Deterministic leaf evaluation shared by the search and by exhaustive
/// oracles: inject, re-evaluate, measure loss against the optimal surface,
/// run constraint_eval under a seed derived from (seed, outer, host, omega,
/// level index).
struct LeafEvaluation {
    FiniteStateController controller;
    double value_loss = 0.0;
    Eigen::VectorXd satisfaction;
    double z_margin = 0.0;  // worst-resource z headroom; ranks non-passing leaves
    bool satisfied = false;
};
LeafEvaluation evaluate_injection_leaf(const PomdpModel& model, const FiniteStateController& incumbent,
                                       const FiniteStateController& optimal, const OmegaPool::Entry& entry,
                                       int host, double level, int level_index, const ConstraintSpec& spec,
                                       const UtilizationModel& util, const std::vector<Belief>& probes,
                                       const ConstraintEvalOptions& eval_opts, std::uint64_t seed, int outer);

/// Best-first branch and bound injecting one constraint state per outer
/// iteration until the soft constraints hold, then optional value-restoring
/// injections that keep them holding.
ConstraintImproveResult constraint_improve(const PomdpModel& model, const FiniteStateController& optimal,
                                           const OmegaPool& omega, const ConstraintSpec& spec,
                                           const UtilizationModel& util,
                                           const ConstraintImproveOptions& opts = {});

/// max over probes of optimal(b) - candidate(b), clamped at zero.
double value_loss_against(const FiniteStateController& optimal, const FiniteStateController& candidate,
                          const std::vector<Belief>& probes);

}  // namespace capomdp
