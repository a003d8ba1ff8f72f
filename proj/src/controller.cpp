#include "capomdp/controller.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <string>

namespace capomdp {

namespace {
constexpr int kMaxUnknowns = 10000;
constexpr int kDenseLimit = 2048;  // past this, switch to a sparse factorization
}

int FiniteStateController::add_node(int action, std::vector<int> successors) {
    const int n_obs = static_cast<int>(successors.size());
    nodes.push_back(MachineState{action, std::move(successors)});
    values.emplace_back(Eigen::VectorXd());
    Eigen::MatrixXd grown(nodes.size(), n_obs);
    if (edge_obs.rows() > 0) grown.topRows(edge_obs.rows()) = edge_obs;
    grown.row(nodes.size() - 1).setConstant(1.0 / n_obs);
    edge_obs = std::move(grown);
    return static_cast<int>(nodes.size()) - 1;
}

void FiniteStateController::validate() const {
    if (nodes.empty()) throw ModelFormatError("controller has no nodes");
    const int n_obs = num_observations();
    for (int i = 0; i < num_nodes(); ++i) {
        if (static_cast<int>(nodes[i].successor.size()) != n_obs)
            throw ModelFormatError("node " + std::to_string(i) + " is missing successors");
        for (int o = 0; o < n_obs; ++o) {
            int j = nodes[i].successor[o];
            if (j < 0 || j >= num_nodes())
                throw ModelFormatError("node " + std::to_string(i) + " successor for observation " +
                                       std::to_string(o) + " points to missing node " + std::to_string(j));
        }
    }
    if (edge_obs.rows() != num_nodes() || edge_obs.cols() != n_obs)
        throw ModelFormatError("edge_obs shape does not match controller");
    for (int i = 0; i < num_nodes(); ++i) {
        double sum = edge_obs.row(i).sum();
        if (std::abs(sum - 1.0) > 1e-9 || edge_obs.row(i).minCoeff() < 0.0)
            throw ModelFormatError("edge_obs row " + std::to_string(i) + " is not a distribution");
    }
}

void FiniteStateController::sweep_unreachable(const std::vector<int>& roots) {
    const int n = num_nodes();
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int r : roots)
        if (r >= 0 && r < n && !seen[r]) {
            seen[r] = 1;
            stack.push_back(r);
        }
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        for (int j : nodes[i].successor)
            if (!seen[j]) {
                seen[j] = 1;
                stack.push_back(j);
            }
    }
    std::vector<int> remap(n, -1);
    int kept = 0;
    for (int i = 0; i < n; ++i)
        if (seen[i]) remap[i] = kept++;
    if (kept == n) return;

    std::vector<MachineState> new_nodes;
    std::vector<Eigen::VectorXd> new_values;
    Eigen::MatrixXd new_edges(kept, num_observations());
    new_nodes.reserve(kept);
    new_values.reserve(kept);
    for (int i = 0; i < n; ++i) {
        if (!seen[i]) continue;
        MachineState ms = nodes[i];
        for (int& j : ms.successor) j = remap[j];
        new_edges.row(new_nodes.size()) = edge_obs.row(i);
        new_nodes.push_back(std::move(ms));
        new_values.push_back(values[i]);
    }
    nodes = std::move(new_nodes);
    values = std::move(new_values);
    edge_obs = std::move(new_edges);
}

void FiniteStateController::set_edge_obs_per_action(const Eigen::MatrixXd& per_action) {
    for (int i = 0; i < num_nodes(); ++i) edge_obs.row(i) = per_action.row(nodes[i].action);
}

FiniteStateController initial_controller(const PomdpModel& model) {
    FiniteStateController fsc;
    for (int a = 0; a < model.num_actions(); ++a) {
        std::vector<int> succ(model.num_observations(), a);
        fsc.add_node(a, std::move(succ));
    }
    return fsc;
}

int best_node(const FiniteStateController& fsc, const Belief& b) {
    int best = 0;
    double best_val = fsc.values[0].dot(b.probs());
    for (int i = 1; i < fsc.num_nodes(); ++i) {
        double v = fsc.values[i].dot(b.probs());
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return best;
}

double controller_value(const FiniteStateController& fsc, const Belief& b) {
    double best = fsc.values[0].dot(b.probs());
    for (int i = 1; i < fsc.num_nodes(); ++i) best = std::max(best, fsc.values[i].dot(b.probs()));
    return best;
}

double evaluate_policy(const PomdpModel& model, FiniteStateController& fsc) {
    const int n_nodes = fsc.num_nodes();
    const int n_states = model.num_states();
    const int dim = n_nodes * n_states;
    if (dim > kMaxUnknowns)
        throw SystemTooLarge("policy evaluation system has " + std::to_string(dim) +
                             " unknowns, cap is " + std::to_string(kMaxUnknowns));
    const double gamma = model.discount();

    // Coefficient of V_j(s') in node i's equation:
    //   gamma * T(s'|s,a_i) * sum_{o: succ(i,o)=j} O(o|s',a_i)
    auto obs_mass = [&](int i, int sp, int j) {
        double m = 0.0;
        const MachineState& ms = fsc.nodes[i];
        for (int o = 0; o < model.num_observations(); ++o)
            if (ms.successor[o] == j) m += model.observation(o, sp, ms.action);
        return m;
    };

    Eigen::VectorXd rhs(dim);
    for (int i = 0; i < n_nodes; ++i)
        for (int s = 0; s < n_states; ++s) rhs[i * n_states + s] = model.reward(s, fsc.nodes[i].action);

    Eigen::VectorXd x;
    if (dim <= kDenseLimit) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(dim, dim);
        for (int i = 0; i < n_nodes; ++i) {
            const int a = fsc.nodes[i].action;
            for (int s = 0; s < n_states; ++s)
                for (int sp = 0; sp < n_states; ++sp) {
                    double t = model.transition(s, a, sp);
                    if (t == 0.0) continue;
                    for (int j = 0; j < n_nodes; ++j) {
                        double m = obs_mass(i, sp, j);
                        if (m > 0.0) A(i * n_states + s, j * n_states + sp) -= gamma * t * m;
                    }
                }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        x = lu.solve(rhs);
        double residual = (A * x - rhs).lpNorm<Eigen::Infinity>();
        if (!x.allFinite() || residual > 1e-8) throw SingularSystem("policy evaluation solve failed");
        for (int i = 0; i < n_nodes; ++i) fsc.values[i] = x.segment(i * n_states, n_states);
        return residual;
    }

    // Large controllers: same system, sparse direct factorization.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(dim) * 8);
    for (int r = 0; r < dim; ++r) trip.emplace_back(r, r, 1.0);
    for (int i = 0; i < n_nodes; ++i) {
        const int a = fsc.nodes[i].action;
        for (int s = 0; s < n_states; ++s)
            for (int sp = 0; sp < n_states; ++sp) {
                double t = model.transition(s, a, sp);
                if (t == 0.0) continue;
                for (int j = 0; j < n_nodes; ++j) {
                    double m = obs_mass(i, sp, j);
                    if (m > 0.0) trip.emplace_back(i * n_states + s, j * n_states + sp, -gamma * t * m);
                }
            }
    }
    Eigen::SparseMatrix<double> A(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) throw SingularSystem("sparse policy evaluation factorization failed");
    x = lu.solve(rhs);
    double residual = (A * x - rhs).lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || residual > 1e-8) throw SingularSystem("sparse policy evaluation solve failed");
    for (int i = 0; i < n_nodes; ++i) fsc.values[i] = x.segment(i * n_states, n_states);
    return residual;
}

}  // namespace capomdp
