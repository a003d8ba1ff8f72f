#include "capomdp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <json.hpp>

#include "capomdp/constraint_eval.hpp"
#include "capomdp/solver.hpp"

namespace capomdp {

using nlohmann::json;

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Greedy: return "greedy";
        case Strategy::Naive: return "naive";
        case Strategy::Intelligent: return "intelligent";
    }
    return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "greedy") return Strategy::Greedy;
    if (name == "naive") return Strategy::Naive;
    if (name == "intelligent") return Strategy::Intelligent;
    throw ModelFormatError("unknown strategy '" + name + "'");
}

SimConfig SimConfig::defaults() {
    SimConfig cfg;
    cfg.catalog = {
        {SensorType::RF_GEO, 4.0, 0.02, 0.2, 0.6},
        {SensorType::OPTICAL, 1.0, 0.005, 0.9, 2.0},
        {SensorType::LASER, 2.0, 0.01, 0.7, 1.5},
    };
    cfg.drone_sensors = {{1, 2}, {1, 0}, {2, 0}};  // optical+laser, optical+rf, laser+rf

    cfg.constraints.rows = {{"bandwidth", 6.0, 0.95}, {"power", 12.0, 0.95}};
    cfg.constraints.horizon_s = 1.0;
    cfg.constraints.epoch_s = 0.1;

    cfg.t_relevance = (Eigen::MatrixXd(3, 3) << 0.90, 0.08, 0.02,
                                                0.08, 0.84, 0.08,
                                                0.02, 0.08, 0.90).finished();
    cfg.t_collab_targeted = (Eigen::MatrixXd(2, 2) << 0.25, 0.75,
                                                      0.10, 0.90).finished();
    cfg.t_collab_untargeted = (Eigen::MatrixXd(2, 2) << 0.88, 0.12,
                                                        0.18, 0.82).finished();
    cfg.o_relevance = (Eigen::MatrixXd(3, 2) << 0.90, 0.10,
                                                0.50, 0.50,
                                                0.10, 0.90).finished();
    cfg.o_collab = (Eigen::MatrixXd(2, 2) << 0.85, 0.15,
                                             0.15, 0.85).finished();
    return cfg;
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                        const Eigen::Vector2d& d) {
    auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); };
    double d1 = cross(b - a, c - a);
    double d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c);
    double d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool line_of_sight(const Eigen::Vector2d& from, const Eigen::Vector2d& to, const std::vector<Hazard>& hazards) {
    for (const Hazard& h : hazards)
        if (segments_intersect(from, to, h.wall_a, h.wall_b)) return false;
    return true;
}

std::vector<std::vector<Eigen::Vector2d>> drone_waypoints(const SimConfig& cfg) {
    const double a = cfg.arena;
    std::vector<std::vector<Eigen::Vector2d>> wp;
    wp.push_back({{0.2 * a, 0.2 * a}, {0.8 * a, 0.2 * a}, {0.8 * a, 0.45 * a}, {0.2 * a, 0.45 * a}});
    wp.push_back({{0.2 * a, 0.55 * a}, {0.8 * a, 0.55 * a}, {0.8 * a, 0.8 * a}, {0.2 * a, 0.8 * a}});
    wp.push_back({{0.35 * a, 0.3 * a}, {0.65 * a, 0.3 * a}, {0.65 * a, 0.7 * a}, {0.35 * a, 0.7 * a}});
    while (static_cast<int>(wp.size()) < cfg.num_drones()) wp.push_back(wp[wp.size() % 3]);
    wp.resize(cfg.num_drones());
    return wp;
}

Scenario make_scenario(const SimConfig& cfg, std::uint64_t run_seed) {
    Scenario sc;
    sc.seed = run_seed;
    Rng rng(derive_seed(run_seed, 0x5ce9a1ULL));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const double margin = 0.1 * cfg.arena;

    // hazards with minimum spacing, each shadowed by an obstruction wall
    for (int tries = 0; static_cast<int>(sc.hazards.size()) < cfg.n_hazards && tries < 1000; ++tries) {
        Eigen::Vector2d p(margin + u01(rng) * (cfg.arena - 2 * margin),
                          margin + u01(rng) * (cfg.arena - 2 * margin));
        bool ok = true;
        for (const Hazard& h : sc.hazards)
            if ((h.pos - p).norm() < cfg.hazard_clearance) ok = false;
        if (!ok) continue;
        Hazard h;
        h.pos = p;
        double angle = u01(rng) * M_PI;
        Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
        h.wall_a = p - 0.5 * cfg.obstruction_len * dir;
        h.wall_b = p + 0.5 * cfg.obstruction_len * dir;
        sc.hazards.push_back(h);
    }

    // start and goal on opposite bands, far apart
    for (int tries = 0; tries < 1000; ++tries) {
        Eigen::Vector2d s(margin + u01(rng) * (cfg.arena - 2 * margin), margin + u01(rng) * 0.15 * cfg.arena);
        Eigen::Vector2d g(margin + u01(rng) * (cfg.arena - 2 * margin),
                          cfg.arena - margin - u01(rng) * 0.15 * cfg.arena);
        if ((s - g).norm() < 0.6 * cfg.arena) continue;
        sc.start = s;
        sc.goal = g;
        break;
    }

    // waypoints: straight to goal, detouring around hazards near the path
    std::vector<Eigen::Vector2d> waypoints{sc.start};
    {
        Eigen::Vector2d cur = sc.start;
        std::vector<char> used(sc.hazards.size(), 0);
        for (int hop = 0; hop < cfg.n_hazards + 1; ++hop) {
            Eigen::Vector2d dir = (sc.goal - cur).normalized();
            double seg_len = (sc.goal - cur).norm();
            int nearest = -1;
            double nearest_t = 1e18;
            for (std::size_t i = 0; i < sc.hazards.size(); ++i) {
                if (used[i]) continue;
                Eigen::Vector2d to_h = sc.hazards[i].pos - cur;
                double t = to_h.dot(dir);
                if (t < 1.0 || t > seg_len - 1.0) continue;
                double off = (to_h - t * dir).norm();
                if (off < cfg.hazard_clearance * 0.8 && t < nearest_t) {
                    nearest_t = t;
                    nearest = static_cast<int>(i);
                }
            }
            if (nearest < 0) break;
            used[nearest] = 1;
            Eigen::Vector2d to_h = sc.hazards[nearest].pos - cur;
            Eigen::Vector2d perp(-dir.y(), dir.x());
            double side = perp.dot(to_h) > 0 ? -1.0 : 1.0;  // detour away from the hazard
            Eigen::Vector2d detour = sc.hazards[nearest].pos + side * perp * cfg.hazard_clearance;
            detour.x() = std::clamp(detour.x(), 2.0, cfg.arena - 2.0);
            detour.y() = std::clamp(detour.y(), 2.0, cfg.arena - 2.0);
            waypoints.push_back(detour);
            cur = detour;
        }
        waypoints.push_back(sc.goal);
    }

    // scripted controls: pure pursuit along the waypoints
    GroundTruth pose;
    pose.x = sc.start.x();
    pose.y = sc.start.y();
    pose.theta = std::atan2(waypoints[1].y() - sc.start.y(), waypoints[1].x() - sc.start.x());
    std::size_t target = 1;
    sc.asset_path.reserve(cfg.horizon_epochs);
    sc.asset_controls.reserve(cfg.horizon_epochs);
    for (int t = 0; t < cfg.horizon_epochs; ++t) {
        double v = cfg.asset_speed;
        double alpha = 0.0;
        if (target < waypoints.size()) {
            Eigen::Vector2d to_wp = waypoints[target] - Eigen::Vector2d(pose.x, pose.y);
            if (to_wp.norm() < 3.0 && target + 1 <= waypoints.size()) {
                ++target;
                if (target < waypoints.size()) to_wp = waypoints[target] - Eigen::Vector2d(pose.x, pose.y);
            }
            if (target >= waypoints.size()) {
                v = 0.0;
            } else {
                double desired = std::atan2(to_wp.y(), to_wp.x());
                double err = wrap_angle(desired - pose.theta);
                alpha = std::clamp(1.2 * err, -0.5, 0.5);
            }
        } else {
            v = 0.0;
        }
        pose = bicycle_predict(pose, v, alpha, cfg.epoch_s, cfg.wheelbase);
        sc.asset_path.push_back(pose);
        sc.asset_controls.emplace_back(v, alpha);
    }
    return sc;
}

// ---------------------------------------------------------------------------
// agent model construction
// ---------------------------------------------------------------------------

namespace {

std::string ikd_action_name(const IkdAction& a, const std::vector<Sensor>& sensors) {
    if (!a.transmit) return "null";
    return "tx_" + sensor_name(sensors[a.sensor].type) + "_to_" + std::to_string(a.neighbor);
}

// Collaboration-level -> predicted arrival probability, spread around the
// divergence bracket so the sigmoid actually switches.
std::vector<double> lambda_levels(const SimConfig& cfg) {
    std::vector<double> v(cfg.collab_levels);
    double lo = std::max(0.02, cfg.lambda.lower - 0.02);
    double hi = std::min(0.98, cfg.lambda.upper + 0.10);
    if (cfg.collab_levels == 1) {
        v[0] = 0.5 * (lo + hi);
        return v;
    }
    for (int i = 0; i < cfg.collab_levels; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / (cfg.collab_levels - 1);
    return v;
}

}  // namespace

std::vector<AgentArtifacts> build_agent_models(const SimConfig& cfg, bool fit_maps) {
    const int n = cfg.num_drones();
    auto patterns = drone_waypoints(cfg);
    std::vector<Eigen::Vector2d> homes;
    std::vector<double> radii;
    for (int i = 0; i < n; ++i) {
        homes.push_back(patterns[i][0]);
        radii.push_back(cfg.interaction_radius);
    }
    auto adjacency = neighbor_graph(homes, radii);

    std::vector<AgentArtifacts> agents(n);
    for (int i = 0; i < n; ++i) {
        AgentArtifacts& art = agents[i];
        art.agent.id = i;
        art.agent.interaction_radius = cfg.interaction_radius;
        for (int s : cfg.drone_sensors[i]) {
            const SensorSpec& spec = cfg.catalog[s];
            art.agent.sensors.push_back(Sensor{spec.type, spec.range_var, spec.bearing_var});
        }
        art.neighbors = adjacency[i];
        std::sort(art.neighbors.begin(), art.neighbors.end());
        art.actions = build_actions(art.agent, art.neighbors);

        art.space.relevance_levels = cfg.relevance_levels;
        art.space.relevance_elements = 1;  // shared asset-track relevance
        art.space.collaboration_levels = cfg.collab_levels;
        art.space.n_neighbors = static_cast<int>(art.neighbors.size());
        art.space.obs_relevance_levels = cfg.obs_relevance_levels;
        art.space.obs_collaboration_levels = cfg.obs_collab_levels;
        art.space.n_actions = static_cast<int>(art.actions.size());

        const int S = art.space.num_states();
        const int A = art.space.n_actions;
        const int O = art.space.num_observations();
        art.model.model = PomdpModel(S, A, O, 0.95);

        ComponentTables trans, obs;
        trans.relevance.resize(A);
        trans.collaboration.resize(A);
        obs.relevance.resize(A);
        obs.collaboration.resize(A);
        for (int a = 0; a < A; ++a) {
            trans.relevance[a] = {cfg.t_relevance};
            obs.relevance[a] = {cfg.o_relevance};
            trans.collaboration[a].resize(art.space.n_neighbors);
            obs.collaboration[a].resize(art.space.n_neighbors);
            for (int j = 0; j < art.space.n_neighbors; ++j) {
                bool targeted = art.actions[a].transmit && art.actions[a].neighbor == art.neighbors[j];
                trans.collaboration[a][j] = targeted ? cfg.t_collab_targeted : cfg.t_collab_untargeted;
                obs.collaboration[a][j] = cfg.o_collab;
            }
        }
        build_transitions(art.space, trans, art.model.model);
        build_observations(art.space, obs, art.model.model);

        RewardContext ctx;
        ctx.hazard_free_likelihood = cfg.hazard_free_likelihood;
        ctx.lambda_per_collab_level = lambda_levels(cfg);
        ctx.lambda_lower = cfg.lambda.lower;
        ctx.lambda_upper = cfg.lambda.upper;
        ctx.sigmoid_k = cfg.lambda.sigmoid_k;
        ctx.arrival_boost = cfg.arrival_boost;
        for (const Sensor& s : art.agent.sensors) ctx.own_sensor_variance.push_back(s.variance_product());
        ctx.neighbor_ids = art.neighbors;
        for (int j : art.neighbors) {
            double best = std::numeric_limits<double>::infinity();
            for (int si : cfg.drone_sensors[j]) {
                const SensorSpec& spec = cfg.catalog[si];
                best = std::min(best, spec.range_var * spec.bearing_var);
            }
            ctx.neighbor_best_variance.push_back(best);
        }
        Eigen::MatrixXd R = build_rewards(art.space, art.actions, ctx);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) art.model.model.reward(s, a) = R(s, a);

        // names
        for (int s = 0; s < S; ++s) art.model.model.state_names.push_back("s" + std::to_string(s));
        for (int o = 0; o < O; ++o) art.model.model.observation_names.push_back("o" + std::to_string(o));
        for (int a = 0; a < A; ++a)
            art.model.model.action_names.push_back(ikd_action_name(art.actions[a], art.agent.sensors));
        art.model.model.validate();

        art.model.constraints = cfg.constraints;
        art.model.utilization = UtilizationModel(cfg.constraints.num_resources(), A);
        for (int a = 0; a < A; ++a) {
            double mb = cfg.null_mb, ws = cfg.null_ws;
            if (art.actions[a].transmit) {
                const SensorSpec& spec = cfg.catalog[cfg.drone_sensors[i][art.actions[a].sensor]];
                mb = spec.mb_per_tx;
                ws = spec.ws_per_tx;
            }
            art.model.utilization.set(0, a, mb, cfg.util_sigma_frac * mb);
            art.model.utilization.set(1, a, ws, cfg.util_sigma_frac * ws);
        }
    }

    if (fit_maps) {
        // Bootstrap with the naive strategy to gather feature rows, then fit
        // the cluster maps used by the intelligent observation function.
        Eigen::MatrixXd rel_rows, col_rows;
        std::vector<Eigen::VectorXd> rel_list, col_list;
        RunMetrics scratch;
        for (int b = 0; b < cfg.bootstrap_runs; ++b) {
            simulate_single_run(cfg, agents, Strategy::Naive, b,
                                derive_seed(cfg.seed, 0xb007ULL, static_cast<std::uint64_t>(b)), &scratch,
                                &rel_list, &col_list);
        }
        rel_rows.resize(static_cast<Eigen::Index>(rel_list.size()), rel_list.empty() ? 2 : rel_list[0].size());
        for (std::size_t r = 0; r < rel_list.size(); ++r) rel_rows.row(r) = rel_list[r].transpose();
        col_rows.resize(static_cast<Eigen::Index>(col_list.size()), col_list.empty() ? 3 : col_list[0].size());
        for (std::size_t r = 0; r < col_list.size(); ++r) col_rows.row(r) = col_list[r].transpose();
        ObservationMaps maps = observation_map_fit(rel_rows, col_rows, cfg.obs_relevance_levels,
                                                   cfg.obs_collab_levels, derive_seed(cfg.seed, 0x9a95ULL));
        for (auto& art : agents) art.maps = maps;
    }
    return agents;
}

void solve_and_constrain(const SimConfig& cfg, std::vector<AgentArtifacts>& agents) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        AgentArtifacts& art = agents[i];
        PolicyIterationOptions po;
        po.epsilon = cfg.solver_epsilon;
        po.max_iterations = cfg.solver_max_iterations;
        po.candidate_cap = cfg.solver_candidate_cap;
        po.prune_margin = cfg.solver_prune_margin;
        po.seed = derive_seed(cfg.seed, 0x5019eULL, i);
        PolicyIterationResult pr =
            policy_iteration(art.model.model, FiniteStateController{}, po, &art.model.utilization);
        art.optimal = pr.controller;
        art.omega = std::move(pr.omega);

        ConstraintImproveOptions co;
        co.seed = derive_seed(cfg.seed, 0xc09ULL, i);
        co.max_pairs = cfg.bnb_max_pairs;
        co.eval = cfg.eval;
        ConstraintImproveResult cr = constraint_improve(art.model.model, art.optimal, art.omega,
                                                        art.model.constraints, art.model.utilization, co);
        art.constrained = cr.controller;
        art.constrained_ok = !cr.unsatisfiable;
    }
}

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

IkdAction strategy_greedy(const std::vector<Sensor>& sensors, const std::vector<int>& neighbors,
                          long epoch) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(sensors.size()); ++k)
        if (sensors[k].variance_product() < sensors[best].variance_product()) best = k;
    IkdAction a;
    a.transmit = true;
    a.sensor = best;
    a.neighbor = neighbors[epoch % neighbors.size()];
    return a;
}

IkdAction strategy_naive(int relevance_level, const std::array<double, 3>& prob_map,
                         const std::vector<Sensor>& sensors, const std::vector<int>& neighbors, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double p = prob_map[std::clamp(relevance_level, 0, 2)];
    if (u01(rng) >= p) return IkdAction{};  // silence
    std::uniform_int_distribution<int> pick_sensor(0, static_cast<int>(sensors.size()) - 1);
    std::uniform_int_distribution<int> pick_dest(0, static_cast<int>(neighbors.size()) - 1);
    IkdAction a;
    a.transmit = true;
    a.sensor = pick_sensor(rng);
    a.neighbor = neighbors[pick_dest(rng)];
    return a;
}

// ---------------------------------------------------------------------------
// run loop
// ---------------------------------------------------------------------------

namespace {

struct Message {
    int from = 0;
    int to = 0;
    bool has_data = false;
    RangeBearingMeasurement measurement;
    double info_value = 0.0;
    bool arrives = false;
};

struct AgentRuntime {
    UkfEstimate est;
    FiniteStateController controller;
    bool controller_pending = false;
    FiniteStateController pending_controller;
    int node = 0;
    EdgePosterior edges;
    UtilizationEstimator util_est;
    std::vector<std::deque<char>> arrival_window;  // per neighbor
    std::vector<double> recent_value;              // per neighbor EMA
    std::deque<double> cov_history;
    int recomputes = 0;
    Rng act_rng, noise_rng, util_rng, loss_rng;
};

double lag_autocov(const std::deque<double>& xs, int lag) {
    const int n = static_cast<int>(xs.size());
    if (n < lag + 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double cov = 0.0;
    for (int i = 0; i + lag < n; ++i) cov += (xs[i] - mean) * (xs[i + lag] - mean);
    return cov / (n - lag);
}

Eigen::VectorXd relevance_features(const SimConfig& cfg, const UkfEstimate& est,
                                   const std::vector<Hazard>& hazards) {
    double d = 1e9;
    for (const Hazard& h : hazards)
        d = std::min(d, (h.pos - Eigen::Vector2d(est.mean[0], est.mean[1])).norm());
    Eigen::VectorXd f(2);
    f[0] = 5.0 * std::exp(-d / 40.0);
    f[1] = std::min(est.covariance.norm(), 10.0);
    (void)cfg;
    return f;
}

Eigen::VectorXd collaboration_features(const AgentRuntime& rt, int neighbor_pos) {
    const auto& win = rt.arrival_window[neighbor_pos];
    double succ = 0.0;
    for (char c : win) succ += c;
    double lambda_hat = (1.0 + succ) / (2.0 + win.size());
    Eigen::VectorXd f(3);
    f[0] = 2.0 * lambda_hat;
    f[1] = std::min(rt.recent_value[neighbor_pos], 2.0);
    f[2] = std::exp(-std::min(lag_autocov(rt.cov_history, 5), 5.0));
    return f;
}

int naive_relevance_level(const SimConfig& cfg, const UkfEstimate& est, const std::vector<Hazard>& hazards) {
    double d = 1e9;
    for (const Hazard& h : hazards)
        d = std::min(d, (h.pos - Eigen::Vector2d(est.mean[0], est.mean[1])).norm());
    if (d < cfg.relevance_near) return 2;
    if (d < cfg.relevance_mid) return 1;
    return 0;
}

int best_sensor(const std::vector<Sensor>& sensors) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(sensors.size()); ++k)
        if (sensors[k].variance_product() < sensors[best].variance_product()) best = k;
    return best;
}

}  // namespace

// Runs one scenario under one strategy. Optional sinks collect the k-means
// training features (used by the bootstrap pass).
void simulate_single_run(const SimConfig& cfg, std::vector<AgentArtifacts>& agents, Strategy strategy,
                         int run_index, std::uint64_t run_seed, RunMetrics* metrics,
                         std::vector<Eigen::VectorXd>* rel_sink, std::vector<Eigen::VectorXd>* col_sink) {
    const int n_agents = static_cast<int>(agents.size());
    Scenario sc = make_scenario(cfg, run_seed);
    auto patterns = drone_waypoints(cfg);

    // drone motion state: position + current waypoint target
    std::vector<Eigen::Vector2d> drone_pos(n_agents);
    std::vector<std::size_t> drone_target(n_agents, 1);
    for (int i = 0; i < n_agents; ++i) drone_pos[i] = patterns[i][0];

    std::vector<AgentRuntime> rt(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        AgentRuntime& r = rt[i];
        r.noise_rng.seed(derive_seed(run_seed, 0x401eULL, static_cast<std::uint64_t>(i)));
        r.act_rng.seed(derive_seed(run_seed, 0xac7ULL, static_cast<std::uint64_t>(i)));
        r.util_rng.seed(derive_seed(run_seed, 0x57aULL, static_cast<std::uint64_t>(i)));
        r.loss_rng.seed(derive_seed(run_seed, 0x1055ULL, static_cast<std::uint64_t>(i)));

        std::normal_distribution<double> unit;
        r.est.mean << sc.start.x() + 3.0 * unit(r.noise_rng), sc.start.y() + 3.0 * unit(r.noise_rng),
            sc.asset_path.empty() ? 0.0 : sc.asset_path[0].theta;
        r.est.covariance = Eigen::Matrix3d::Identity() * 25.0;
        r.est.covariance(2, 2) = 0.5;
        r.est.process_noise = cfg.process_noise;
        r.est.params = cfg.ukf;

        const int A = static_cast<int>(agents[i].actions.size());
        const int O = agents[i].space.num_observations();
        r.edges = EdgePosterior(A, O, 1.0);
        r.util_est = UtilizationEstimator(cfg.constraints.num_resources(), A);
        for (int h = 0; h < cfg.constraints.num_resources(); ++h)
            for (int a = 0; a < A; ++a)
                r.util_est.set_prior(h, a, agents[i].model.utilization.mean(h, a),
                                     std::max(1e-3, agents[i].model.utilization.stddev(h, a)));
        r.arrival_window.resize(agents[i].neighbors.size());
        r.recent_value.assign(agents[i].neighbors.size(), 0.0);

        if (strategy == Strategy::Intelligent) {
            r.controller = agents[i].constrained;
            Rng belief_rng(derive_seed(run_seed, 0xbe1ULL, static_cast<std::uint64_t>(i)));
            Belief b0 = random_belief(agents[i].space.num_states(), belief_rng);
            r.node = best_node(r.controller, b0);
        }
    }

    std::vector<Message> in_flight;
    const int epochs_per_second = std::max(1, static_cast<int>(std::lround(1.0 / cfg.epoch_s)));
    std::vector<std::vector<double>> second_bw(n_agents), second_ws(n_agents);
    std::vector<double> acc_bw(n_agents, 0.0), acc_ws(n_agents, 0.0);
    double cov_sum = 0.0;
    long cov_count = 0;

    for (int t = 0; t < cfg.horizon_epochs; ++t) {
        const GroundTruth& asset = sc.asset_path[t];
        const Eigen::Vector2d control = sc.asset_controls[t];

        // drones fly their fixed patterns
        for (int i = 0; i < n_agents; ++i) {
            Eigen::Vector2d to_wp = patterns[i][drone_target[i] % patterns[i].size()] - drone_pos[i];
            if (to_wp.norm() < 2.0) {
                drone_target[i] = (drone_target[i] + 1) % patterns[i].size();
                to_wp = patterns[i][drone_target[i]] - drone_pos[i];
            }
            if (to_wp.norm() > 1e-9)
                drone_pos[i] += to_wp.normalized() * std::min(cfg.drone_speed * cfg.epoch_s, to_wp.norm());
        }

        // deliveries from last epoch
        std::vector<std::vector<Message>> inbox(n_agents);
        for (const Message& msg : in_flight)
            if (msg.arrives) inbox[msg.to].push_back(msg);
        in_flight.clear();

        for (int i = 0; i < n_agents; ++i) {
            AgentRuntime& r = rt[i];
            const AgentArtifacts& art = agents[i];
            std::normal_distribution<double> unit;

            // own sensing with the most accurate sensor aboard
            Eigen::Vector2d asset_pos(asset.x, asset.y);
            bool own_los = line_of_sight(drone_pos[i], asset_pos, sc.hazards);
            std::vector<RangeBearingMeasurement> fused;
            RangeBearingMeasurement own;
            if (own_los) {
                const Sensor& s = art.agent.sensors[best_sensor(art.agent.sensors)];
                auto [rg, br] = measure(asset.x, asset.y, asset.theta, drone_pos[i].x(), drone_pos[i].y());
                own.range = std::max(0.0, rg + std::sqrt(s.range_var) * unit(r.noise_rng));
                own.bearing = wrap_angle(br + std::sqrt(s.bearing_var) * unit(r.noise_rng));
                own.range_var = s.range_var;
                own.bearing_var = s.bearing_var;
                own.px = drone_pos[i].x();
                own.py = drone_pos[i].y();
                fused.push_back(own);
            }
            for (const Message& msg : inbox[i])
                if (msg.has_data) fused.push_back(msg.measurement);

            r.est = ukf_step(r.est, control.x(), control.y(), cfg.epoch_s, cfg.wheelbase, fused);
            r.cov_history.push_back(r.est.covariance.norm());
            if (r.cov_history.size() > 20) r.cov_history.pop_front();
            cov_sum += r.est.covariance.norm();
            ++cov_count;

            // collaboration statistics per neighbor
            for (std::size_t jpos = 0; jpos < art.neighbors.size(); ++jpos) {
                int j = art.neighbors[jpos];
                bool arrived = false;
                double value = 0.0;
                for (const Message& msg : inbox[i])
                    if (msg.from == j) {
                        arrived = true;
                        value = std::max(value, msg.info_value);
                    }
                r.arrival_window[jpos].push_back(arrived ? 1 : 0);
                if (r.arrival_window[jpos].size() > 50) r.arrival_window[jpos].pop_front();
                r.recent_value[jpos] = 0.95 * r.recent_value[jpos] + (arrived ? value : 0.0);
            }

            // choose the action
            IkdAction action;
            int action_index = 0;
            switch (strategy) {
                case Strategy::Greedy:
                    action = strategy_greedy(art.agent.sensors, art.neighbors, t);
                    break;
                case Strategy::Naive:
                    action = strategy_naive(naive_relevance_level(cfg, r.est, sc.hazards),
                                            cfg.naive_transmit_prob, art.agent.sensors, art.neighbors,
                                            r.act_rng);
                    break;
                case Strategy::Intelligent:
                    action_index = r.controller.nodes[r.node].action;
                    action = art.actions[action_index];
                    break;
            }
            if (strategy != Strategy::Intelligent) {
                for (std::size_t a = 0; a < art.actions.size(); ++a)
                    if (art.actions[a] == action) action_index = static_cast<int>(a);
            }

            // transmit
            if (action.transmit) {
                Message msg;
                msg.from = i;
                msg.to = action.neighbor;
                const Sensor& s = art.agent.sensors[action.sensor];
                if (own_los) {
                    auto [rg, br] = measure(asset.x, asset.y, asset.theta, drone_pos[i].x(), drone_pos[i].y());
                    msg.measurement.range = std::max(0.0, rg + std::sqrt(s.range_var) * unit(r.noise_rng));
                    msg.measurement.bearing = wrap_angle(br + std::sqrt(s.bearing_var) * unit(r.noise_rng));
                    msg.measurement.range_var = s.range_var;
                    msg.measurement.bearing_var = s.bearing_var;
                    msg.measurement.px = drone_pos[i].x();
                    msg.measurement.py = drone_pos[i].y();
                    msg.has_data = true;
                    double kappa = s.variance_product();
                    msg.info_value = std::clamp((-std::log10(std::max(kappa, 1e-12)) - 2.0) / 3.0, 0.0, 1.0) * 2.0;
                }
                std::uniform_real_distribution<double> u01(0.0, 1.0);
                msg.arrives = u01(r.loss_rng) >= cfg.message_loss;
                in_flight.push_back(msg);
            }

            // resources
            double bw = 0.0, ws = 0.0;
            {
                std::normal_distribution<double> unit_util;
                bw = std::max(0.0, art.model.utilization.mean(0, action_index) +
                                       art.model.utilization.stddev(0, action_index) * unit_util(r.util_rng));
                ws = std::max(0.0, art.model.utilization.mean(1, action_index) +
                                       art.model.utilization.stddev(1, action_index) * unit_util(r.util_rng));
            }
            acc_bw[i] += bw;
            acc_ws[i] += ws;
            if (metrics) {
                metrics->total_bw += bw;
                metrics->total_ws += ws;
                std::string key = action.transmit ? sensor_name(art.agent.sensors[action.sensor].type) : "null";
                metrics->message_counts[key] += 1;
                if (cfg.record_epochs)
                    metrics->epochs.push_back(
                        {run_index, t, i, action_index, bw, ws, r.est.covariance.norm()});
            }

            // observation features, FSC edge, adaptation
            Eigen::VectorXd rel_f = relevance_features(cfg, r.est, sc.hazards);
            std::vector<Eigen::VectorXd> col_f;
            for (std::size_t jpos = 0; jpos < art.neighbors.size(); ++jpos)
                col_f.push_back(collaboration_features(r, static_cast<int>(jpos)));
            if (rel_sink) rel_sink->push_back(rel_f);
            if (col_sink)
                for (const auto& f : col_f) col_sink->push_back(f);

            if (strategy == Strategy::Intelligent) {
                int obs = observe(art.maps, art.space, {rel_f}, col_f);
                if (obs < 0 || obs >= r.controller.num_observations())
                    throw ControllerDesync("observation index " + std::to_string(obs) +
                                           " outside controller range");
                r.edges = update_edge(std::move(r.edges), action_index, obs);
                r.util_est.observe(0, action_index, bw);
                r.util_est.observe(1, action_index, ws);
                r.node = r.controller.nodes[r.node].successor[obs];
            }
        }

        // second boundary bookkeeping
        if ((t + 1) % epochs_per_second == 0) {
            int second = t / epochs_per_second;
            for (int i = 0; i < n_agents; ++i) {
                second_bw[i].push_back(acc_bw[i]);
                second_ws[i].push_back(acc_ws[i]);
                if (metrics) metrics->seconds.push_back({run_index, second, i, acc_bw[i], acc_ws[i]});
                acc_bw[i] = 0.0;
                acc_ws[i] = 0.0;
            }

            if (strategy == Strategy::Intelligent) {
                for (int i = 0; i < n_agents; ++i) {
                    AgentRuntime& r = rt[i];
                    if (r.controller_pending) {
                        r.controller = std::move(r.pending_controller);
                        r.controller_pending = false;
                        Belief b = Belief::uniform(agents[i].space.num_states());
                        r.node = best_node(r.controller, b);
                    }
                    if (r.recomputes >= cfg.max_recomputes_per_run) continue;
                    RecomputeTrigger trig = should_recompute(r.edges, r.util_est, cfg.voi_threshold);
                    if (!trig.recompute) continue;

                    // learned edge and utilization models feed a fresh
                    // constraint improvement from the cached optimal + omega
                    AgentArtifacts& art = agents[i];
                    UtilizationModel learned(cfg.constraints.num_resources(),
                                             static_cast<int>(art.actions.size()));
                    for (int h = 0; h < cfg.constraints.num_resources(); ++h)
                        for (std::size_t a = 0; a < art.actions.size(); ++a)
                            learned.set(h, static_cast<int>(a),
                                        std::max(0.0, r.util_est.posterior_mean(h, static_cast<int>(a))),
                                        art.model.utilization.stddev(h, static_cast<int>(a)));
                    FiniteStateController opt = art.optimal;
                    opt.set_edge_obs_per_action(r.edges.matrix());

                    ConstraintImproveOptions co;
                    co.seed = derive_seed(run_seed, 0x12ec0ULL,
                                          static_cast<std::uint64_t>(i * 100000 + t));
                    co.max_pairs = cfg.bnb_max_pairs;
                    co.eval = cfg.eval;
                    ConstraintImproveResult cr = constraint_improve(art.model.model, opt, art.omega,
                                                                    art.model.constraints, learned, co);
                    r.pending_controller = cr.controller;
                    r.pending_controller.set_edge_obs_per_action(r.edges.matrix());
                    r.controller_pending = true;
                    ++r.recomputes;
                    if (metrics) ++metrics->recompute_events;

                    // re-baseline drift on the learned distributions
                    Eigen::MatrixXd new_pseudo = Eigen::MatrixXd::Zero(r.edges.num_actions(),
                                                                       r.edges.num_observations());
                    for (int a = 0; a < r.edges.num_actions(); ++a)
                        new_pseudo.row(a) = r.edges.row(a).transpose() * 8.0;
                    r.edges = EdgePosterior(new_pseudo.cwiseMax(1e-3));
                    UtilizationEstimator fresh(cfg.constraints.num_resources(),
                                               static_cast<int>(art.actions.size()));
                    for (int h = 0; h < cfg.constraints.num_resources(); ++h)
                        for (std::size_t a = 0; a < art.actions.size(); ++a)
                            fresh.set_prior(h, static_cast<int>(a),
                                            r.util_est.posterior_mean(h, static_cast<int>(a)),
                                            std::max(1e-3, r.util_est.prior_std(h, static_cast<int>(a))));
                    r.util_est = std::move(fresh);
                }
            }
        }
    }

    if (metrics) {
        metrics->run_seeds.push_back(run_seed);
        ++metrics->runs;
        // incremental satisfaction and covariance stats folded at the end of
        // run_monte_carlo; store raw sums here
        metrics->mean_cov_norm += cov_sum;
        metrics->satisfaction.resize(0);
        metrics->strategy = strategy;
        (void)cov_count;
    }
}

RunMetrics run_monte_carlo(const SimConfig& cfg, std::vector<AgentArtifacts>& agents, int n_runs,
                           Strategy strategy) {
    RunMetrics metrics;
    metrics.strategy = strategy;
    long cov_count = 0;
    for (int run = 0; run < n_runs; ++run) {
        std::uint64_t run_seed = derive_seed(cfg.seed, 0x9412ULL, static_cast<std::uint64_t>(run));
        simulate_single_run(cfg, agents, strategy, run, run_seed, &metrics, nullptr, nullptr);
        cov_count += static_cast<long>(cfg.horizon_epochs) * agents.size();
    }
    if (cov_count > 0) metrics.mean_cov_norm /= cov_count;

    const int H = cfg.constraints.num_resources();
    metrics.satisfaction = Eigen::VectorXd::Zero(H);
    if (!metrics.seconds.empty()) {
        long under_bw = 0, under_ws = 0;
        for (const SecondRecord& s : metrics.seconds) {
            if (s.bw <= cfg.constraints.rows[0].limit) ++under_bw;
            if (H > 1 && s.ws <= cfg.constraints.rows[1].limit) ++under_ws;
        }
        metrics.satisfaction[0] = static_cast<double>(under_bw) / metrics.seconds.size();
        if (H > 1) metrics.satisfaction[1] = static_cast<double>(under_ws) / metrics.seconds.size();
    }
    return metrics;
}

std::vector<CompareRow> compare(const std::vector<RunMetrics>& results) {
    if (results.size() > 1) {
        for (std::size_t i = 1; i < results.size(); ++i)
            if (results[i].run_seeds != results[0].run_seeds)
                throw SeedMismatch("strategies were run on different seed sets");
    }
    std::vector<CompareRow> rows;
    for (const RunMetrics& m : results) {
        CompareRow row;
        row.strategy = strategy_name(m.strategy);
        row.bw_satisfaction = m.satisfaction.size() > 0 ? m.satisfaction[0] : 0.0;
        row.power_satisfaction = m.satisfaction.size() > 1 ? m.satisfaction[1] : 0.0;
        row.mean_cov_norm = m.mean_cov_norm;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// files
// ---------------------------------------------------------------------------

void write_metrics_csv(const RunMetrics& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << "run,epoch,agent,action,bandwidth_mb,power_ws,cov_norm\n";
    for (const EpochRecord& e : m.epochs)
        out << e.run << ',' << e.epoch << ',' << e.agent << ',' << e.action << ',' << e.bw << ',' << e.ws
            << ',' << e.cov_norm << '\n';
}

void write_seconds_csv(const RunMetrics& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << "run,second,agent,bandwidth_mb,power_ws\n";
    for (const SecondRecord& s : m.seconds)
        out << s.run << ',' << s.second << ',' << s.agent << ',' << s.bw << ',' << s.ws << '\n';
}

void write_summary_csv(const std::vector<CompareRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << "strategy,bandwidth_satisfaction,power_satisfaction,mean_cov_norm\n";
    for (const CompareRow& r : rows)
        out << r.strategy << ',' << r.bw_satisfaction << ',' << r.power_satisfaction << ','
            << r.mean_cov_norm << '\n';
}

void write_report_json(const RunMetrics& m, const SimConfig& cfg, const std::string& path) {
    json j;
    j["strategy"] = strategy_name(m.strategy);
    j["runs"] = m.runs;
    j["run_seeds"] = m.run_seeds;
    j["satisfaction"] = std::vector<double>(m.satisfaction.data(), m.satisfaction.data() + m.satisfaction.size());
    j["mean_cov_norm"] = m.mean_cov_norm;
    j["message_counts"] = m.message_counts;
    j["recompute_events"] = m.recompute_events;
    j["total_bandwidth_mb"] = m.total_bw;
    j["total_power_ws"] = m.total_ws;
    j["resources"] = json::array();
    for (const auto& row : cfg.constraints.rows)
        j["resources"].push_back({{"resource", row.resource}, {"limit", row.limit}, {"eta", row.eta}});
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << j.dump(2) << "\n";
}

RunMetrics read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open " + path);
    json j;
    in >> j;
    RunMetrics m;
    m.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    m.runs = j.at("runs").get<int>();
    m.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
    auto sat = j.at("satisfaction").get<std::vector<double>>();
    m.satisfaction = Eigen::Map<Eigen::VectorXd>(sat.data(), sat.size());
    m.mean_cov_norm = j.at("mean_cov_norm").get<double>();
    m.recompute_events = j.at("recompute_events").get<long>();
    m.total_bw = j.at("total_bandwidth_mb").get<double>();
    m.total_ws = j.at("total_power_ws").get<double>();
    for (auto& [k, v] : j.at("message_counts").items()) m.message_counts[k] = v.get<long>();
    return m;
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd matrix_from_json(const json& j) {
    Eigen::MatrixXd m(j.size(), j.empty() ? 0 : j[0].size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

SensorType sensor_type_from_name(const std::string& s) {
    if (s == "rf_geo") return SensorType::RF_GEO;
    if (s == "optical") return SensorType::OPTICAL;
    if (s == "laser") return SensorType::LASER;
    throw ModelFormatError("unknown sensor type '" + s + "'");
}

}  // namespace

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path + ": " + e.what());
    }

    SimConfig cfg = SimConfig::defaults();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.arena = j.value("arena_m", cfg.arena);
    cfg.n_hazards = j.value("hazards", cfg.n_hazards);
    cfg.hazard_clearance = j.value("hazard_clearance_m", cfg.hazard_clearance);
    cfg.obstruction_len = j.value("obstruction_len_m", cfg.obstruction_len);
    cfg.epoch_s = j.value("epoch_s", cfg.epoch_s);
    cfg.horizon_epochs = j.value("horizon_epochs", cfg.horizon_epochs);
    cfg.message_loss = j.value("message_loss", cfg.message_loss);
    cfg.asset_speed = j.value("asset_speed_mps", cfg.asset_speed);
    cfg.wheelbase = j.value("wheelbase_m", cfg.wheelbase);
    cfg.drone_speed = j.value("drone_speed_mps", cfg.drone_speed);
    cfg.interaction_radius = j.value("interaction_radius_m", cfg.interaction_radius);
    cfg.null_mb = j.value("null_mb", cfg.null_mb);
    cfg.null_ws = j.value("null_ws", cfg.null_ws);
    cfg.util_sigma_frac = j.value("util_sigma_frac", cfg.util_sigma_frac);
    cfg.voi_threshold = j.value("voi_threshold_bits", cfg.voi_threshold);
    cfg.max_recomputes_per_run = j.value("max_recomputes_per_run", cfg.max_recomputes_per_run);
    cfg.bootstrap_runs = j.value("bootstrap_runs", cfg.bootstrap_runs);
    cfg.solver_epsilon = j.value("solver_epsilon", cfg.solver_epsilon);
    cfg.solver_candidate_cap = j.value("solver_candidate_cap", cfg.solver_candidate_cap);
    cfg.solver_max_iterations = j.value("solver_max_iterations", cfg.solver_max_iterations);
    cfg.solver_prune_margin = j.value("solver_prune_margin", cfg.solver_prune_margin);
    cfg.bnb_max_pairs = j.value("bnb_max_pairs", cfg.bnb_max_pairs);
    cfg.record_epochs = j.value("record_epochs", cfg.record_epochs);
    cfg.relevance_near = j.value("relevance_near_m", cfg.relevance_near);
    cfg.relevance_mid = j.value("relevance_mid_m", cfg.relevance_mid);

    if (j.contains("constraints")) {
        cfg.constraints.rows.clear();
        for (const auto& c : j["constraints"])
            cfg.constraints.rows.push_back(
                {c.at("resource").get<std::string>(), c.at("limit").get<double>(), c.at("eta").get<double>()});
        cfg.constraints.horizon_s = j.value("horizon_s", 1.0);
        cfg.constraints.epoch_s = cfg.epoch_s;
        cfg.constraints.validate();
    }
    if (j.contains("sensors")) {
        cfg.catalog.clear();
        for (const auto& s : j["sensors"]) {
            SensorSpec spec;
            spec.type = sensor_type_from_name(s.at("type").get<std::string>());
            spec.range_var = s.at("range_var").get<double>();
            spec.bearing_var = s.at("bearing_var").get<double>();
            spec.mb_per_tx = s.at("mb_per_tx").get<double>();
            spec.ws_per_tx = s.at("ws_per_tx").get<double>();
            cfg.catalog.push_back(spec);
        }
    }
    if (j.contains("drone_sensors")) cfg.drone_sensors = j["drone_sensors"].get<std::vector<std::vector<int>>>();
    if (j.contains("naive_transmit_prob")) {
        auto v = j["naive_transmit_prob"].get<std::vector<double>>();
        for (std::size_t i = 0; i < std::min<std::size_t>(3, v.size()); ++i) cfg.naive_transmit_prob[i] = v[i];
    }
    cfg.relevance_levels = j.value("relevance_levels", cfg.relevance_levels);
    cfg.collab_levels = j.value("collab_levels", cfg.collab_levels);
    cfg.obs_relevance_levels = j.value("obs_relevance_levels", cfg.obs_relevance_levels);
    cfg.obs_collab_levels = j.value("obs_collab_levels", cfg.obs_collab_levels);
    if (j.contains("component_tables")) {
        const auto& ct = j["component_tables"];
        if (ct.contains("t_relevance")) cfg.t_relevance = matrix_from_json(ct["t_relevance"]);
        if (ct.contains("t_collab_targeted")) cfg.t_collab_targeted = matrix_from_json(ct["t_collab_targeted"]);
        if (ct.contains("t_collab_untargeted"))
            cfg.t_collab_untargeted = matrix_from_json(ct["t_collab_untargeted"]);
        if (ct.contains("o_relevance")) cfg.o_relevance = matrix_from_json(ct["o_relevance"]);
        if (ct.contains("o_collab")) cfg.o_collab = matrix_from_json(ct["o_collab"]);
    }
    if (j.contains("hazard_free_likelihood"))
        cfg.hazard_free_likelihood = j["hazard_free_likelihood"].get<std::vector<double>>();
    if (j.contains("lambda")) {
        cfg.lambda.lower = j["lambda"].value("lower", cfg.lambda.lower);
        cfg.lambda.upper = j["lambda"].value("upper", cfg.lambda.upper);
        cfg.lambda.sigmoid_k = j["lambda"].value("sigmoid_k", cfg.lambda.sigmoid_k);
    }
    cfg.arrival_boost = j.value("arrival_boost", cfg.arrival_boost);

    const char* env_seed = std::getenv("CAPOMDP_SEED");
    if (env_seed != nullptr) cfg.seed = std::strtoull(env_seed, nullptr, 10);
    return cfg;
}

void save_sim_config(const SimConfig& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["arena_m"] = cfg.arena;
    j["hazards"] = cfg.n_hazards;
    j["hazard_clearance_m"] = cfg.hazard_clearance;
    j["obstruction_len_m"] = cfg.obstruction_len;
    j["epoch_s"] = cfg.epoch_s;
    j["horizon_epochs"] = cfg.horizon_epochs;
    j["horizon_s"] = cfg.constraints.horizon_s;
    j["message_loss"] = cfg.message_loss;
    j["asset_speed_mps"] = cfg.asset_speed;
    j["wheelbase_m"] = cfg.wheelbase;
    j["drone_speed_mps"] = cfg.drone_speed;
    j["interaction_radius_m"] = cfg.interaction_radius;
    j["null_mb"] = cfg.null_mb;
    j["null_ws"] = cfg.null_ws;
    j["util_sigma_frac"] = cfg.util_sigma_frac;
    j["voi_threshold_bits"] = cfg.voi_threshold;
    j["max_recomputes_per_run"] = cfg.max_recomputes_per_run;
    j["bootstrap_runs"] = cfg.bootstrap_runs;
    j["solver_epsilon"] = cfg.solver_epsilon;
    j["solver_candidate_cap"] = cfg.solver_candidate_cap;
    j["solver_max_iterations"] = cfg.solver_max_iterations;
    j["solver_prune_margin"] = cfg.solver_prune_margin;
    j["bnb_max_pairs"] = cfg.bnb_max_pairs;
    j["record_epochs"] = cfg.record_epochs;
    j["relevance_near_m"] = cfg.relevance_near;
    j["relevance_mid_m"] = cfg.relevance_mid;
    j["constraints"] = json::array();
    for (const auto& row : cfg.constraints.rows)
        j["constraints"].push_back({{"resource", row.resource}, {"limit", row.limit}, {"eta", row.eta}});
    j["sensors"] = json::array();
    for (const auto& s : cfg.catalog)
        j["sensors"].push_back({{"type", sensor_name(s.type)},
                                {"range_var", s.range_var},
                                {"bearing_var", s.bearing_var},
                                {"mb_per_tx", s.mb_per_tx},
                                {"ws_per_tx", s.ws_per_tx}});
    j["drone_sensors"] = cfg.drone_sensors;
    j["naive_transmit_prob"] = cfg.naive_transmit_prob;
    j["relevance_levels"] = cfg.relevance_levels;
    j["collab_levels"] = cfg.collab_levels;
    j["obs_relevance_levels"] = cfg.obs_relevance_levels;
    j["obs_collab_levels"] = cfg.obs_collab_levels;
    j["component_tables"] = {{"t_relevance", matrix_to_json(cfg.t_relevance)},
                             {"t_collab_targeted", matrix_to_json(cfg.t_collab_targeted)},
                             {"t_collab_untargeted", matrix_to_json(cfg.t_collab_untargeted)},
                             {"o_relevance", matrix_to_json(cfg.o_relevance)},
                             {"o_collab", matrix_to_json(cfg.o_collab)}};
    j["hazard_free_likelihood"] = cfg.hazard_free_likelihood;
    j["lambda"] = {{"lower", cfg.lambda.lower}, {"upper", cfg.lambda.upper}, {"sigmoid_k", cfg.lambda.sigmoid_k}};
    j["arrival_boost"] = cfg.arrival_boost;
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace capomdp
