#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "capomdp/kmeans.hpp"
#include "capomdp/pomdp.hpp"

namespace capomdp {

enum class SensorType { RF_GEO = 0, OPTICAL = 1, LASER = 2 };

std::string sensor_name(SensorType t);

struct Sensor {
    SensorType type = SensorType::RF_GEO;
    double range_var = 1.0;    // meters^2
    double bearing_var = 0.01; // radians^2

    double variance_product() const { return range_var * bearing_var; }
};

struct AgentConfig {
    int id = 0;
    std::vector<Sensor> sensors;       // one to three aboard
    double interaction_radius = 0.0;   // rho(x_i), meters

    void validate() const {
        if (sensors.empty() || sensors.size() > 3)
            throw ModelFormatError("agent " + std::to_string(id) + " must carry 1..3 sensors");
        if (!(interaction_radius > 0.0))
            throw ModelFormatError("agent " + std::to_string(id) + " needs a positive interaction radius");
    }
};

/// edge (i,j) present iff ||x_i - x_j|| <= rho(x_i); directed, asymmetric
/// radii allowed. Returns sorted adjacency lists.
std::vector<std::vector<int>> neighbor_graph(const std::vector<Eigen::Vector2d>& positions,
                                             const std::vector<double>& radii);

struct IkdAction {
    bool transmit = false;
    int sensor = -1;    // index into the sender's sensor list
    int neighbor = -1;  // receiving agent id

    bool operator==(const IkdAction&) const = default;
};

/// Null action first, then one transmit action per (neighbor id, sensor id).
std::vector<IkdAction> build_actions(const AgentConfig& cfg, const std::vector<int>& neighbors);

/// Composite state/observation space of one agent: relevance digits (one per
/// information element) and collaboration digits (one per neighbor), each
/// with a fixed number of levels. Indices are mixed-radix with relevance
/// digits leading.
struct IkdSpace {
    int relevance_levels = 3;
    int relevance_elements = 1;
    int collaboration_levels = 3;
    int n_neighbors = 0;
    int obs_relevance_levels = 3;
    int obs_collaboration_levels = 3;
    int n_actions = 0;

    int num_states() const;
    int num_observations() const;

    int state_index(const std::vector<int>& rel, const std::vector<int>& collab) const;
    void decode_state(int s, std::vector<int>& rel, std::vector<int>& collab) const;
    int obs_index(const std::vector<int>& rel, const std::vector<int>& collab) const;
    void decode_obs(int o, std::vector<int>& rel, std::vector<int>& collab) const;
};

/// Per-action component matrices: `relevance[a][k]` and `collaboration[a][j]`
/// with rows indexed by the current level. For transitions the matrices are
/// square; for observations columns run over observation levels.
struct ComponentTables {
    std::vector<std::vector<Eigen::MatrixXd>> relevance;
    std::vector<std::vector<Eigen::MatrixXd>> collaboration;
};

/// T(a,s,s') = prod_k Tr[a][k](r_k,r'_k) * prod_j Tc[a][j](c_j,c'_j).
/// Throws InvalidComponentTable when a component row is not stochastic.
void build_transitions(const IkdSpace& space, const ComponentTables& tables, PomdpModel& model);

/// O(a,s,o) factored the same way over observation digits.
void build_observations(const IkdSpace& space, const ComponentTables& tables, PomdpModel& model);

/// Everything the reward instantiation needs from the scenario.
struct RewardContext {
    std::vector<double> hazard_free_likelihood;   // per relevance level
    std::vector<double> lambda_per_collab_level;  // predicted arrival per collaboration level
    double lambda_lower = 0.2;
    double lambda_upper = 0.6;
    double sigmoid_k = 12.0;
    double arrival_boost = 0.1;                  // targeted transmit lifts predicted arrival
    std::vector<double> own_sensor_variance;     // per sensor of this agent
    std::vector<int> neighbor_ids;               // sorted, aligned with collaboration digits
    std::vector<double> neighbor_best_variance;  // per neighbor (same order)
};

/// Raw (unnormalized) relevance and collaboration components for one (s,a).
/// The null action contributes zero to both.
struct RewardComponents {
    double relevance = 0.0;
    double collaboration = 0.0;
};
RewardComponents reward_components(const IkdSpace& space, const std::vector<IkdAction>& actions,
                                   const RewardContext& ctx, int state, int action);

/// Full S x A reward matrix: each component normalized to [0,1] by its grid
/// maximum, then summed (null action rows stay zero).
Eigen::MatrixXd build_rewards(const IkdSpace& space, const std::vector<IkdAction>& actions,
                              const RewardContext& ctx);

/// Fitted observation mappings: one relevance clusterer (reused per element)
/// and one collaboration clusterer (reused per neighbor).
struct ObservationMaps {
    KMeansModel relevance;
    KMeansModel collaboration;
};

/// K-means fit of both mappings. Requires >= 10*k rows each.
ObservationMaps observation_map_fit(const Eigen::MatrixXd& relevance_features,
                                    const Eigen::MatrixXd& collaboration_features, int k_relevance,
                                    int k_collaboration, std::uint64_t seed);

/// Live classification into the composite observation index.
int observe(const ObservationMaps& maps, const IkdSpace& space,
            const std::vector<Eigen::VectorXd>& relevance_features,
            const std::vector<Eigen::VectorXd>& collaboration_features);

}  // namespace capomdp
