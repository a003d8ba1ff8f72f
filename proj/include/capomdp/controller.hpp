#pragma once

#include <Eigen/Dense>
#include <vector>

#include "capomdp/pomdp.hpp"

namespace capomdp {

struct MachineState {
    int action = 0;
    std::vector<int> successor;  // indexed by observation, holds node ids
};

/// Cyclic deterministic-successor policy graph. Node ids are positions in
/// `nodes`. `values` holds the per-node alpha vectors filled in by
/// evaluate_policy; `edge_obs` is the per-node observation distribution used
/// when sampling the controller (rows sum to 1).
class FiniteStateController {
public:
    FiniteStateController() = default;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_observations() const { return nodes.empty() ? 0 : static_cast<int>(nodes[0].successor.size()); }

    /// Appends a node and a uniform edge_obs row; returns its id.
    int add_node(int action, std::vector<int> successors);

    /// Structural checks: closed graph, full successor maps, stochastic
    /// edge_obs rows. Throws ModelFormatError on violation.
    void validate() const;

    /// Drops all nodes not reachable from `roots`, compacting ids.
    /// Successor maps and value/edge rows are remapped in place.
    void sweep_unreachable(const std::vector<int>& roots);

    /// Sets every node's edge_obs row from a per-action distribution
    /// (rows of `per_action` indexed by action).
    void set_edge_obs_per_action(const Eigen::MatrixXd& per_action);

    std::vector<MachineState> nodes;
    std::vector<Eigen::VectorXd> values;  // alpha vector per node
    Eigen::MatrixXd edge_obs;             // num_nodes x num_observations
};

/// One self-looping node per action; the conventional starting controller.
FiniteStateController initial_controller(const PomdpModel& model);

/// argmax_i values[i]·b, ties broken toward the lowest node id.
int best_node(const FiniteStateController& fsc, const Belief& b);

/// Exact policy evaluation: solves the |nodes|·|S| linear system
///   V_i(s) = R(s,a_i) + γ Σ_{s'} T(s'|s,a_i) Σ_o O(o|s',a_i) V_{succ(i,o)}(s')
/// and stores the result into fsc.values. Returns the residual max-norm.
/// Throws SystemTooLarge above 10,000 unknowns and SingularSystem if the
/// factorization fails (cannot happen for γ < 1).
double evaluate_policy(const PomdpModel& model, FiniteStateController& fsc);

/// Policy value at a belief: max_i V_i·b.
double controller_value(const FiniteStateController& fsc, const Belief& b);

}  // namespace capomdp
