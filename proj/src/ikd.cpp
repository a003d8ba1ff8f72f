#include "capomdp/ikd.hpp"

#include <algorithm>
#include <cmath>

namespace capomdp {

std::string sensor_name(SensorType t) {
    switch (t) {
        case SensorType::RF_GEO: return "rf_geo";
        case SensorType::OPTICAL: return "optical";
        case SensorType::LASER: return "laser";
    }
    return "unknown";
}

std::vector<std::vector<int>> neighbor_graph(const std::vector<Eigen::Vector2d>& positions,
                                             const std::vector<double>& radii) {
    const int n = static_cast<int>(positions.size());
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
        if (!positions[i].allFinite()) throw ModelFormatError("agent positions must be finite");
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if ((positions[i] - positions[j]).norm() <= radii[i]) adj[i].push_back(j);
        }
    }
    return adj;
}

std::vector<IkdAction> build_actions(const AgentConfig& cfg, const std::vector<int>& neighbors) {
    cfg.validate();
    std::vector<IkdAction> actions;
    actions.push_back(IkdAction{});  // null / silence
    std::vector<int> sorted = neighbors;
    std::sort(sorted.begin(), sorted.end());
    for (int j : sorted)
        for (int k = 0; k < static_cast<int>(cfg.sensors.size()); ++k)
            actions.push_back(IkdAction{true, k, j});
    return actions;
}

namespace {

int pow_int(int base, int exp) {
    int r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

int encode_digits(const std::vector<int>& rel, const std::vector<int>& collab, int rel_levels,
                  int collab_levels) {
    int idx = 0;
    for (int d : rel) idx = idx * rel_levels + d;
    for (int d : collab) idx = idx * collab_levels + d;
    return idx;
}

void decode_digits(int idx, std::vector<int>& rel, std::vector<int>& collab, int rel_count,
                   int collab_count, int rel_levels, int collab_levels) {
    rel.assign(rel_count, 0);
    collab.assign(collab_count, 0);
    for (int d = collab_count - 1; d >= 0; --d) {
        collab[d] = idx % collab_levels;
        idx /= collab_levels;
    }
    for (int d = rel_count - 1; d >= 0; --d) {
        rel[d] = idx % rel_levels;
        idx /= rel_levels;
    }
}

void check_component(const Eigen::MatrixXd& table, int rows, const std::string& what) {
    if (table.rows() != rows)
        throw InvalidComponentTable(what + " has " + std::to_string(table.rows()) + " rows, expected " +
                                    std::to_string(rows));
    for (int r = 0; r < table.rows(); ++r) {
        if (table.row(r).minCoeff() < 0.0 || std::abs(table.row(r).sum() - 1.0) > 1e-9)
            throw InvalidComponentTable(what + " row " + std::to_string(r) + " is not stochastic");
    }
}

}  // namespace

int IkdSpace::num_states() const {
    return pow_int(relevance_levels, relevance_elements) * pow_int(collaboration_levels, n_neighbors);
}

int IkdSpace::num_observations() const {
    return pow_int(obs_relevance_levels, relevance_elements) *
           pow_int(obs_collaboration_levels, n_neighbors);
}

int IkdSpace::state_index(const std::vector<int>& rel, const std::vector<int>& collab) const {
    return encode_digits(rel, collab, relevance_levels, collaboration_levels);
}

void IkdSpace::decode_state(int s, std::vector<int>& rel, std::vector<int>& collab) const {
    decode_digits(s, rel, collab, relevance_elements, n_neighbors, relevance_levels, collaboration_levels);
}

int IkdSpace::obs_index(const std::vector<int>& rel, const std::vector<int>& collab) const {
    return encode_digits(rel, collab, obs_relevance_levels, obs_collaboration_levels);
}

void IkdSpace::decode_obs(int o, std::vector<int>& rel, std::vector<int>& collab) const {
    decode_digits(o, rel, collab, relevance_elements, n_neighbors, obs_relevance_levels,
                  obs_collaboration_levels);
}

void build_transitions(const IkdSpace& space, const ComponentTables& tables, PomdpModel& model) {
    const int S = space.num_states();
    const int A = space.n_actions;
    if (static_cast<int>(tables.relevance.size()) != A || static_cast<int>(tables.collaboration.size()) != A)
        throw InvalidComponentTable("component tables must cover every action");

    std::vector<int> rel, collab, rel2, collab2;
    for (int a = 0; a < A; ++a) {
        for (int k = 0; k < space.relevance_elements; ++k)
            check_component(tables.relevance[a][k], space.relevance_levels,
                            "relevance transition [a=" + std::to_string(a) + "][k=" + std::to_string(k) + "]");
        for (int j = 0; j < space.n_neighbors; ++j)
            check_component(tables.collaboration[a][j], space.collaboration_levels,
                            "collaboration transition [a=" + std::to_string(a) + "][j=" + std::to_string(j) + "]");
        for (int s = 0; s < S; ++s) {
            space.decode_state(s, rel, collab);
            for (int sp = 0; sp < S; ++sp) {
                space.decode_state(sp, rel2, collab2);
                double p = 1.0;
                for (int k = 0; k < space.relevance_elements; ++k)
                    p *= tables.relevance[a][k](rel[k], rel2[k]);
                for (int j = 0; j < space.n_neighbors; ++j)
                    p *= tables.collaboration[a][j](collab[j], collab2[j]);
                model.transition(s, a, sp) = p;
            }
        }
    }
}

void build_observations(const IkdSpace& space, const ComponentTables& tables, PomdpModel& model) {
    const int S = space.num_states();
    const int A = space.n_actions;
    const int O = space.num_observations();
    if (static_cast<int>(tables.relevance.size()) != A || static_cast<int>(tables.collaboration.size()) != A)
        throw InvalidComponentTable("component tables must cover every action");

    std::vector<int> rel, collab, orel, ocollab;
    for (int a = 0; a < A; ++a) {
        for (int k = 0; k < space.relevance_elements; ++k)
            check_component(tables.relevance[a][k], space.relevance_levels,
                            "relevance observation [a=" + std::to_string(a) + "][k=" + std::to_string(k) + "]");
        for (int j = 0; j < space.n_neighbors; ++j)
            check_component(tables.collaboration[a][j], space.collaboration_levels,
                            "collaboration observation [a=" + std::to_string(a) + "][j=" + std::to_string(j) + "]");
        for (int sp = 0; sp < S; ++sp) {
            space.decode_state(sp, rel, collab);
            for (int o = 0; o < O; ++o) {
                space.decode_obs(o, orel, ocollab);
                double p = 1.0;
                for (int k = 0; k < space.relevance_elements; ++k)
                    p *= tables.relevance[a][k](rel[k], orel[k]);
                for (int j = 0; j < space.n_neighbors; ++j)
                    p *= tables.collaboration[a][j](collab[j], ocollab[j]);
                model.observation(o, sp, a) = p;
            }
        }
    }
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

RewardComponents reward_components(const IkdSpace& space, const std::vector<IkdAction>& actions,
                                   const RewardContext& ctx, int state, int action) {
    RewardComponents rc;
    const IkdAction& act = actions[action];
    if (!act.transmit) return rc;  // silence earns nothing by design

    if (static_cast<int>(ctx.hazard_free_likelihood.size()) != space.relevance_levels)
        throw UnknownContext("hazard-free likelihood table does not cover every relevance level");
    if (static_cast<int>(ctx.lambda_per_collab_level.size()) != space.collaboration_levels)
        throw UnknownContext("lambda table does not cover every collaboration level");
    if (ctx.own_sensor_variance.empty() || ctx.neighbor_best_variance.empty())
        throw UnknownContext("sensor variances missing from reward context");

    std::vector<int> rel, collab;
    space.decode_state(state, rel, collab);

    // kappa_a = min over neighbors of (own transmitted sensor var * neighbor best var)
    double sigma_own = ctx.own_sensor_variance.at(act.sensor);
    double kappa = std::numeric_limits<double>::infinity();
    for (double vj : ctx.neighbor_best_variance) kappa = std::min(kappa, sigma_own * vj);
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw UnknownContext("kappa is not positive and finite");
    const double info_value = 1.0 / kappa;

    // Relevance: likelihood the next state stays clear of the critical set
    // times the information value. With several relevance elements, the most
    // at-risk one drives the likelihood lookup.
    int level = *std::max_element(rel.begin(), rel.end());
    rc.relevance = ctx.hazard_free_likelihood.at(level) * info_value;

    // Collaboration: mean over neighbors of the sigmoid of the proximity to
    // the divergence heuristic, times the information value.
    const double x0 = 0.5 * (ctx.lambda_upper + ctx.lambda_lower);
    double acc = 0.0;
    const int n = static_cast<int>(collab.size());
    for (int j = 0; j < n; ++j) {
        double lambda_hat = ctx.lambda_per_collab_level.at(collab[j]);
        // A transmit aimed at j predicts better arrival there. Collaboration
        // digits follow the sorted neighbor id list.
        bool targeted = j < static_cast<int>(ctx.neighbor_ids.size()) &&
                        act.neighbor == ctx.neighbor_ids[j];
        if (targeted) lambda_hat = std::min(1.0, lambda_hat + ctx.arrival_boost);
        double q = (x0 - lambda_hat) * ctx.sigmoid_k;
        acc += sigmoid(q);
    }
    rc.collaboration = n > 0 ? (acc / n) * info_value : 0.0;
    return rc;
}

Eigen::MatrixXd build_rewards(const IkdSpace& space, const std::vector<IkdAction>& actions,
                              const RewardContext& ctx) {
    const int S = space.num_states();
    const int A = static_cast<int>(actions.size());
    Eigen::MatrixXd rel(S, A), col(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            RewardComponents rc = reward_components(space, actions, ctx, s, a);
            rel(s, a) = rc.relevance;
            col(s, a) = rc.collaboration;
        }
    double rel_max = rel.maxCoeff();
    double col_max = col.maxCoeff();
    if (rel_max > 0.0) rel /= rel_max;
    if (col_max > 0.0) col /= col_max;
    return rel + col;
}

ObservationMaps observation_map_fit(const Eigen::MatrixXd& relevance_features,
                                    const Eigen::MatrixXd& collaboration_features, int k_relevance,
                                    int k_collaboration, std::uint64_t seed) {
    ObservationMaps maps;
    maps.relevance = KMeansModel::fit(relevance_features, k_relevance, derive_seed(seed, 0x9e1ULL));
    maps.collaboration =
        KMeansModel::fit(collaboration_features, k_collaboration, derive_seed(seed, 0x9e2ULL));
    return maps;
}

int observe(const ObservationMaps& maps, const IkdSpace& space,
            const std::vector<Eigen::VectorXd>& relevance_features,
            const std::vector<Eigen::VectorXd>& collaboration_features) {
    std::vector<int> rel(space.relevance_elements), collab(space.n_neighbors);
    for (int k = 0; k < space.relevance_elements; ++k)
        rel[k] = maps.relevance.classify(relevance_features.at(k));
    for (int j = 0; j < space.n_neighbors; ++j)
        collab[j] = maps.collaboration.classify(collaboration_features.at(j));
    return space.obs_index(rel, collab);
}

}  // namespace capomdp
