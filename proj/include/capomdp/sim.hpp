#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "capomdp/adaptation.hpp"
#include "capomdp/constraint_improve.hpp"
#include "capomdp/ikd.hpp"
#include "capomdp/model_io.hpp"
#include "capomdp/tracking.hpp"

namespace capomdp {

enum class Strategy { Greedy, Naive, Intelligent };
std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

/// Per-transmission cost and sensing accuracy of one sensor type.
struct SensorSpec {
    SensorType type = SensorType::RF_GEO;
    double range_var = 1.0;
    double bearing_var = 0.01;
    double mb_per_tx = 0.2;
    double ws_per_tx = 0.6;
};

struct SimConfig {
    std::uint64_t seed = 1;

    // world
    double arena = 200.0;
    int n_hazards = 4;
    double hazard_clearance = 25.0;
    double obstruction_len = 30.0;
    double epoch_s = 0.1;
    int horizon_epochs = 600;
    double message_loss = 0.05;
    double asset_speed = 2.0;
    double wheelbase = 1.0;
    double drone_speed = 8.0;
    double interaction_radius = 500.0;

    // resources and limits
    ConstraintSpec constraints;
    double null_mb = 0.01;
    double null_ws = 0.05;
    double util_sigma_frac = 0.10;

    // sensors: catalog plus per-drone assignment (indices into the catalog)
    std::vector<SensorSpec> catalog;
    std::vector<std::vector<int>> drone_sensors;

    // naive strategy: relevance level -> transmit probability
    std::array<double, 3> naive_transmit_prob = {0.6, 0.85, 0.98};
    double relevance_near = 30.0;  // estimate-to-hazard distance thresholds
    double relevance_mid = 60.0;

    // IKD space sizes
    int relevance_levels = 3;
    int collab_levels = 2;
    int obs_relevance_levels = 2;
    int obs_collab_levels = 2;

    // component tables (hand-set, same for every drone)
    Eigen::MatrixXd t_relevance;          // relevance_levels^2
    Eigen::MatrixXd t_collab_targeted;    // collab_levels^2
    Eigen::MatrixXd t_collab_untargeted;  // collab_levels^2
    Eigen::MatrixXd o_relevance;          // relevance_levels x obs_relevance_levels
    Eigen::MatrixXd o_collab;             // collab_levels x obs_collab_levels

    // reward context pieces
    std::vector<double> hazard_free_likelihood = {0.95, 0.6, 0.2};
    LambdaBounds lambda{0.05, 0.20, 12.0};
    double arrival_boost = 0.1;

    // solver / constraint knobs
    double solver_epsilon = 1e-3;
    std::size_t solver_candidate_cap = 3000000;
    int solver_max_iterations = 40;
    double solver_prune_margin = 2e-3;
    int bnb_max_pairs = 48;
    ConstraintEvalOptions eval;

    // ukf
    Eigen::Matrix3d process_noise = (Eigen::Matrix3d() << 0.02, 0, 0, 0, 0.02, 0, 0, 0, 0.005).finished();
    UkfParams ukf;

    // adaptation
    double voi_threshold = 0.5;
    int max_recomputes_per_run = 1;

    // bootstrap runs used to fit the observation maps
    int bootstrap_runs = 4;

    bool record_epochs = true;

    int num_drones() const { return static_cast<int>(drone_sensors.size()); }

    /// Shipped defaults: three drones with overlapping sensor pairs, 6 MB/s
    /// bandwidth and 12 W·s/s power limits at eta 0.95.
    static SimConfig defaults();
};

SimConfig load_sim_config(const std::string& path);
void save_sim_config(const SimConfig& cfg, const std::string& path);

// ---------------------------------------------------------------------------
// scenario (randomized per run) and fixed drone patterns
// ---------------------------------------------------------------------------

struct Hazard {
    Eigen::Vector2d pos;
    Eigen::Vector2d wall_a;  // obstruction segment blocking line of sight
    Eigen::Vector2d wall_b;
};

struct Scenario {
    std::uint64_t seed = 0;
    Eigen::Vector2d start, goal;
    std::vector<Hazard> hazards;
    std::vector<GroundTruth> asset_path;  // scripted, one pose per epoch
    std::vector<Eigen::Vector2d> asset_controls;  // (v, alpha) per epoch
};

Scenario make_scenario(const SimConfig& cfg, std::uint64_t run_seed);

/// Fixed rectangular search pattern per drone, identical across scenarios.
std::vector<std::vector<Eigen::Vector2d>> drone_waypoints(const SimConfig& cfg);

bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                        const Eigen::Vector2d& d);
bool line_of_sight(const Eigen::Vector2d& from, const Eigen::Vector2d& to, const std::vector<Hazard>& hazards);

// ---------------------------------------------------------------------------
// per-drone model artifacts
// ---------------------------------------------------------------------------

struct AgentArtifacts {
    AgentConfig agent;
    std::vector<int> neighbors;  // sorted ids
    IkdSpace space;
    std::vector<IkdAction> actions;
    ModelFile model;
    ObservationMaps maps;
    FiniteStateController optimal;
    OmegaPool omega;
    FiniteStateController constrained;
    bool constrained_ok = false;
};

/// Builds the per-drone POMDP (actions, factored tensors, rewards,
/// utilization) from the config. Observation maps are fitted from bootstrap
/// naive runs when `fit_maps` is set.
std::vector<AgentArtifacts> build_agent_models(const SimConfig& cfg, bool fit_maps);

/// Solves and constrains every agent in `agents` in place.
void solve_and_constrain(const SimConfig& cfg, std::vector<AgentArtifacts>& agents);

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

/// Lowest-variance sensor every epoch, destination round-robin.
IkdAction strategy_greedy(const std::vector<Sensor>& sensors, const std::vector<int>& neighbors,
                          long epoch);

/// Transmit with the relevance-mapped probability, sensor and destination
/// uniform; otherwise silence.
IkdAction strategy_naive(int relevance_level, const std::array<double, 3>& prob_map,
                         const std::vector<Sensor>& sensors, const std::vector<int>& neighbors, Rng& rng);

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct EpochRecord {
    int run, epoch, agent, action;
    double bw, ws, cov_norm;
};

struct SecondRecord {
    int run, second, agent;
    double bw, ws;
};

struct RunMetrics {
    int runs = 0;
    Strategy strategy = Strategy::Greedy;
    std::vector<std::uint64_t> run_seeds;
    std::vector<SecondRecord> seconds;
    std::vector<EpochRecord> epochs;
    Eigen::VectorXd satisfaction;  // per resource: share of agent-seconds under the limit
    double mean_cov_norm = 0.0;
    std::map<std::string, long> message_counts;
    long recompute_events = 0;
    double total_bw = 0.0;
    double total_ws = 0.0;
};

/// Seeded Monte Carlo over `n_runs` scenarios. Deterministic per
/// (seed, strategy).
RunMetrics run_monte_carlo(const SimConfig& cfg, std::vector<AgentArtifacts>& agents, int n_runs,
                           Strategy strategy);

/// One scenario under one strategy. The optional sinks collect k-means
/// training features during bootstrap passes.
void simulate_single_run(const SimConfig& cfg, std::vector<AgentArtifacts>& agents, Strategy strategy,
                         int run_index, std::uint64_t run_seed, RunMetrics* metrics,
                         std::vector<Eigen::VectorXd>* rel_sink, std::vector<Eigen::VectorXd>* col_sink);

struct CompareRow {
    std::string strategy;
    double bw_satisfaction = 0.0;
    double power_satisfaction = 0.0;
    double mean_cov_norm = 0.0;
};

/// Per-strategy summary in the comparison-table layout. Throws SeedMismatch
/// when the runs do not share seed sets.
std::vector<CompareRow> compare(const std::vector<RunMetrics>& results);

// CSV / JSON outputs
void write_metrics_csv(const RunMetrics& m, const std::string& path);
void write_seconds_csv(const RunMetrics& m, const std::string& path);
void write_summary_csv(const std::vector<CompareRow>& rows, const std::string& path);
void write_report_json(const RunMetrics& m, const SimConfig& cfg, const std::string& path);
RunMetrics read_report_json(const std::string& path);

}  // namespace capomdp
