#pragma once

#include <Eigen/Dense>
#include <vector>

namespace capomdp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    Eigen::VectorXd x;
};

/// maximize c·x subject to A x <= b, x >= 0. Dense two-phase simplex with
/// Bland's rule; sized for the small programs the pruning step produces.
LpSolution solve_lp_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

struct DominanceWitness {
    bool dominant = false;      // true when margin > tolerance
    double margin = 0.0;        // max_b min_j b·(alpha - w_j)
    Eigen::VectorXd belief;     // the witness belief when dominant
};

/// Best-belief margin of `alpha` against every convex combination of
/// `others`. alpha is kept by pruning iff the margin is strictly positive.
DominanceWitness best_belief_margin(const Eigen::VectorXd& alpha,
                                    const std::vector<Eigen::VectorXd>& others,
                                    double tol = 1e-9);

}  // namespace capomdp
