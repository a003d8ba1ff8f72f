#include "capomdp/lp.hpp"

#include <cmath>
#include <limits>

namespace capomdp {

namespace {

constexpr double kTol = 1e-9;

// Runs simplex iterations on a canonical tableau. `tab` has one row per
// constraint plus an objective row at the bottom; the last column is the rhs.
// `basis[i]` is the variable occupying row i. Returns false on unboundedness.
bool run_simplex(Eigen::MatrixXd& tab, std::vector<int>& basis, int n_cols) {
    const int m = static_cast<int>(tab.rows()) - 1;
    const int obj = m;
    const int rhs = n_cols;
    for (;;) {
        // Bland: entering variable = lowest index with positive reduced cost.
        int enter = -1;
        for (int j = 0; j < n_cols; ++j)
            if (tab(obj, j) > kTol) {
                enter = j;
                break;
            }
        if (enter < 0) return true;  // optimal

        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            double a = tab(i, enter);
            if (a > kTol) {
                double ratio = tab(i, rhs) / a;
                if (ratio < best_ratio - kTol ||
                    (ratio < best_ratio + kTol && (leave < 0 || basis[i] < basis[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return false;  // unbounded

        double pivot = tab(leave, enter);
        tab.row(leave) /= pivot;
        for (int i = 0; i <= m; ++i) {
            if (i == leave) continue;
            double f = tab(i, enter);
            if (f != 0.0) tab.row(i) -= f * tab.row(leave);
        }
        basis[leave] = enter;
    }
}

}  // namespace

LpSolution solve_lp_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());

    // Rows with negative rhs are negated so every rhs is nonnegative; those
    // rows get a -1 slack and an artificial variable instead.
    std::vector<int> art_rows;
    for (int i = 0; i < m; ++i)
        if (b[i] < 0.0) art_rows.push_back(i);
    const int k = static_cast<int>(art_rows.size());
    const int n_total = n + m + k;

    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, n_total + 1);
    std::vector<int> basis(m, -1);
    int art = 0;
    for (int i = 0; i < m; ++i) {
        double sign = (b[i] < 0.0) ? -1.0 : 1.0;
        tab.block(i, 0, 1, n) = sign * A.row(i);
        tab(i, n + i) = sign;  // slack
        tab(i, n_total) = sign * b[i];
        if (b[i] < 0.0) {
            tab(i, n + m + art) = 1.0;
            basis[i] = n + m + art;
            ++art;
        } else {
            basis[i] = n + i;
        }
    }

    if (k > 0) {
        // Phase 1: maximize -sum(artificials) == canonical row = sum of their rows.
        for (int i = 0; i < m; ++i)
            if (basis[i] >= n + m) tab.row(m) += tab.row(i);
        for (int j = n + m; j < n_total; ++j) tab(m, j) = 0.0;
        if (!run_simplex(tab, basis, n_total)) return {LpStatus::Infeasible, 0.0, {}};
        if (tab(m, n_total) > 1e-7) return {LpStatus::Infeasible, 0.0, {}};
        // Pivot any artificial still basic (at zero level) out if possible.
        for (int i = 0; i < m; ++i) {
            if (basis[i] < n + m) continue;
            int enter = -1;
            for (int j = 0; j < n + m; ++j)
                if (std::abs(tab(i, j)) > kTol) {
                    enter = j;
                    break;
                }
            if (enter >= 0) {
                double pivot = tab(i, enter);
                tab.row(i) /= pivot;
                for (int r = 0; r <= m; ++r) {
                    if (r == i) continue;
                    double f = tab(r, enter);
                    if (f != 0.0) tab.row(r) -= f * tab.row(i);
                }
                basis[i] = enter;
            }
        }
    }

    // Phase 2 objective over the original + slack columns.
    tab.row(m).setZero();
    tab.block(m, 0, 1, n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        int bv = basis[i];
        if (bv < n && std::abs(c[bv]) > 0.0) tab.row(m) -= c[bv] * tab.row(i);
    }
    // Artificials must not re-enter.
    for (int j = n + m; j < n_total; ++j) tab(m, j) = -1.0;

    if (!run_simplex(tab, basis, n + m)) return {LpStatus::Unbounded, 0.0, {}};

    LpSolution sol;
    sol.status = LpStatus::Optimal;
    sol.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) sol.x[basis[i]] = tab(i, n_total);
    // The canonical objective row keeps -z in the rhs cell.
    sol.objective = -tab(m, n_total);
    return sol;
}

DominanceWitness best_belief_margin(const Eigen::VectorXd& alpha,
                                    const std::vector<Eigen::VectorXd>& others,
                                    double tol) {
    const int n = static_cast<int>(alpha.size());
    DominanceWitness w;
    if (others.empty()) {
        w.dominant = true;
        w.margin = std::numeric_limits<double>::infinity();
        w.belief = Eigen::VectorXd::Constant(n, 1.0 / n);
        return w;
    }

    // Variables: belief (n), delta+ and delta- (delta free).
    // max delta  s.t.  b·(w_j - alpha) + delta <= 0  for all j,
    //                  sum b <= 1,  -sum b <= -1,  b >= 0.
    const int m = static_cast<int>(others.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 2, n + 2);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 2);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 2);
    for (int j = 0; j < m; ++j) {
        A.block(j, 0, 1, n) = (others[j] - alpha).transpose();
        A(j, n) = 1.0;
        A(j, n + 1) = -1.0;
    }
    A.block(m, 0, 1, n).setConstant(1.0);
    b[m] = 1.0;
    A.block(m + 1, 0, 1, n).setConstant(-1.0);
    b[m + 1] = -1.0;
    c[n] = 1.0;
    c[n + 1] = -1.0;

    LpSolution sol = solve_lp_max(A, b, c);
    if (sol.status != LpStatus::Optimal) return w;  // treat as dominated
    w.margin = sol.objective;
    w.dominant = sol.objective > tol;
    Eigen::VectorXd belief = sol.x.head(n).cwiseMax(0.0);
    double s = belief.sum();
    if (s > 0) belief /= s;
    w.belief = belief;
    return w;
}

}  // namespace capomdp
