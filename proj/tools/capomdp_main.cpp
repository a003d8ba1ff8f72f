#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "capomdp/constraint_eval.hpp"
#include "capomdp/constraint_improve.hpp"
#include "capomdp/model_io.hpp"
#include "capomdp/sim.hpp"
#include "capomdp/solver.hpp"
#include "capomdp/tracking.hpp"

namespace fs = std::filesystem;
using namespace capomdp;

namespace {

std::uint64_t effective_seed(std::uint64_t cli_seed) {
    const char* env = std::getenv("CAPOMDP_SEED");
    if (env != nullptr) return std::strtoull(env, nullptr, 10);
    return cli_seed;
}

std::vector<double> parse_levels(const std::string& csv) {
    std::vector<double> levels;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        levels.push_back(std::stod(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return levels;
}

int cmd_solve(const std::string& model_path, const std::string& out_path, double epsilon,
              std::uint64_t seed) {
    ModelFile mf = load_model_file(model_path);
    PolicyIterationOptions opts;
    opts.epsilon = epsilon;
    opts.seed = effective_seed(seed);
    PolicyIterationResult res = policy_iteration(mf.model, FiniteStateController{}, opts, &mf.utilization);

    ControllerFile cf;
    cf.controller = res.controller;
    cf.omega = std::move(res.omega);
    cf.converged = res.converged;
    save_controller_file(cf, out_path);
    std::printf("solved: %d nodes, %zu omega entries, %s after %d iterations\n",
                cf.controller.num_nodes(), cf.omega.size(), res.converged ? "converged" : "NOT converged",
                res.iterations);
    return res.converged ? 0 : 2;
}

int cmd_eval(const std::string& model_path, const std::string& controller_path, std::uint64_t seed,
             bool as_json) {
    ModelFile mf = load_model_file(model_path);
    ControllerFile cf = load_controller_file(controller_path);
    ConstraintEvalOptions opts;
    opts.seed = effective_seed(seed);
    ConstraintEvalResult res = constraint_eval(cf.controller, mf.constraints, mf.utilization, opts);

    if (as_json) {
        std::printf("{\n  \"converged\": %s,\n", res.converged ? "true" : "false");
        std::printf("  \"diagnostics\": {\"accept_rate\": %.4f, \"chain_length\": %d, \"n_restarts\": %d},\n",
                    res.posterior.accept_rate, res.posterior.chain_length, res.posterior.n_restarts);
        std::printf("  \"resources\": [\n");
        for (int h = 0; h < mf.constraints.num_resources(); ++h) {
            const auto& row = mf.constraints.rows[h];
            std::printf("    {\"resource\": \"%s\", \"N\": %.4f, \"limit\": %.4f, \"eta\": %.4f, \"pass\": %s}%s\n",
                        row.resource.c_str(), res.satisfaction[h], row.limit, row.eta,
                        res.satisfaction[h] >= row.eta ? "true" : "false",
                        h + 1 < mf.constraints.num_resources() ? "," : "");
        }
        std::printf("  ]\n}\n");
    } else {
        for (int h = 0; h < mf.constraints.num_resources(); ++h) {
            const auto& row = mf.constraints.rows[h];
            std::printf("%-12s N=%.4f  c=%.3f  eta=%.3f  %s\n", row.resource.c_str(), res.satisfaction[h],
                        row.limit, row.eta, res.satisfaction[h] >= row.eta ? "PASS" : "FAIL");
        }
        std::printf("chain: accept_rate=%.3f mean_length=%d restarts=%d%s\n", res.posterior.accept_rate,
                    res.posterior.chain_length, res.posterior.n_restarts,
                    res.converged ? "" : " (flagged: no convergence)");
    }
    return 0;
}

int cmd_constrain(const std::string& model_path, const std::string& controller_path,
                  const std::string& out_path, const std::string& levels_csv, std::uint64_t seed) {
    ModelFile mf = load_model_file(model_path);
    ControllerFile cf = load_controller_file(controller_path);

    ConstraintImproveOptions opts;
    opts.levels = parse_levels(levels_csv);
    opts.seed = effective_seed(seed);
    ConstraintImproveResult res = constraint_improve(mf.model, cf.controller, cf.omega, mf.constraints,
                                                     mf.utilization, opts);

    ControllerFile out;
    out.controller = res.controller;
    out.omega = cf.omega;
    out.converged = !res.unsatisfiable;
    out.has_optimal = true;
    out.optimal = cf.controller;
    save_controller_file(out, out_path);

    std::printf("{\"value_loss\": %.6f, \"states_injected\": %d, \"leaves_explored\": %ld, "
                "\"unsatisfiable\": %s, \"already_compliant\": %s, \"N\": [",
                res.value_loss, res.states_injected, res.leaves_explored,
                res.unsatisfiable ? "true" : "false", res.already_compliant ? "true" : "false");
    for (int h = 0; h < res.satisfaction.size(); ++h)
        std::printf("%s%.4f", h ? ", " : "", res.satisfaction[h]);
    std::printf("]}\n");
    return res.unsatisfiable ? 3 : 0;
}

int cmd_build_model(const std::string& config_path, const std::string& out_dir) {
    SimConfig cfg = load_sim_config(config_path);
    fs::create_directories(out_dir);
    std::vector<AgentArtifacts> agents = build_agent_models(cfg, /*fit_maps=*/true);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        std::string path = out_dir + "/agent" + std::to_string(i) + "_model.json";
        save_model_file(agents[i].model, path);
        std::printf("agent %zu: %d states, %d actions, %d observations -> %s\n", i,
                    agents[i].model.model.num_states(), agents[i].model.model.num_actions(),
                    agents[i].model.model.num_observations(), path.c_str());
    }
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& strategy_name_arg, int runs,
                 std::uint64_t seed, const std::string& out_dir) {
    SimConfig cfg = load_sim_config(config_path);
    if (seed != 0) cfg.seed = effective_seed(seed);
    Strategy strategy = strategy_from_name(strategy_name_arg);

    fs::create_directories(out_dir);
    bool needs_controllers = strategy == Strategy::Intelligent;
    std::vector<AgentArtifacts> agents = build_agent_models(cfg, /*fit_maps=*/true);
    if (needs_controllers) {
        solve_and_constrain(cfg, agents);
        for (std::size_t i = 0; i < agents.size(); ++i) {
            ControllerFile out;
            out.controller = agents[i].constrained;
            out.omega = agents[i].omega;
            out.has_optimal = true;
            out.optimal = agents[i].optimal;
            save_controller_file(out, out_dir + "/agent" + std::to_string(i) + "_controller.json");
        }
    }

    RunMetrics metrics = run_monte_carlo(cfg, agents, runs, strategy);
    write_metrics_csv(metrics, out_dir + "/metrics.csv");
    write_seconds_csv(metrics, out_dir + "/seconds.csv");
    write_report_json(metrics, cfg, out_dir + "/report.json");
    std::vector<CompareRow> rows = compare({metrics});
    write_summary_csv(rows, out_dir + "/summary.csv");

    std::printf("%s: %d runs, bandwidth satisfaction %.3f, power satisfaction %.3f, mean cov %.5f\n",
                strategy_name(strategy).c_str(), metrics.runs, rows[0].bw_satisfaction,
                rows[0].power_satisfaction, rows[0].mean_cov_norm);
    return 0;
}

int cmd_compare(const std::vector<std::string>& in_dirs, const std::string& out_path) {
    std::vector<RunMetrics> all;
    for (const std::string& dir : in_dirs) all.push_back(read_report_json(dir + "/report.json"));
    std::vector<CompareRow> rows = compare(all);
    write_summary_csv(rows, out_path);
    std::printf("%-14s %-10s %-10s %s\n", "strategy", "bw", "power", "cov");
    for (const auto& r : rows)
        std::printf("%-14s %-10.3f %-10.3f %.5f\n", r.strategy.c_str(), r.bw_satisfaction,
                    r.power_satisfaction, r.mean_cov_norm);
    return 0;
}

int cmd_calibrate_lambda(const std::string& config_path, std::uint64_t seed) {
    LambdaCalibrationConfig cal;
    if (!config_path.empty()) {
        SimConfig cfg = load_sim_config(config_path);
        cal.seed = cfg.seed;
        cal.process_noise = cfg.process_noise;
        cal.dt = cfg.epoch_s;
        cal.wheelbase = cfg.wheelbase;
    }
    if (seed != 0) cal.seed = effective_seed(seed);
    LambdaCalibrationReport rep = calibrate_lambda(cal);
    std::printf("steady_state=%.5f threshold=%.5f\n", rep.steady_state, rep.threshold);
    std::printf("%-8s %-12s %-12s\n", "lambda", "median|P|", "p95|P|");
    for (std::size_t i = 0; i < rep.grid.size(); ++i)
        std::printf("%-8.2f %-12.5f %-12.5f\n", rep.grid[i], rep.median_norm[i], rep.p95_norm[i]);
    std::printf("lambda_lower=%.3f lambda_upper=%.3f center=%.3f\n", rep.bounds.lower, rep.bounds.upper,
                rep.bounds.center());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained-action POMDP solver and multi-UAV tracking simulation"};
    app.require_subcommand(1);

    // solve
    std::string model_path, out_path, controller_path, config_path, strategy_arg, out_dir = "out";
    std::string levels_csv = "0.25,0.5,0.75,1.0";
    std::vector<std::string> in_dirs;
    double epsilon = 1e-4;
    std::uint64_t seed = 0;
    int runs = 100;
    bool as_json = false;

    auto* solve = app.add_subcommand("solve", "Policy iteration on a model file");
    solve->add_option("--model", model_path)->required();
    solve->add_option("--out", out_path)->required();
    solve->add_option("--epsilon", epsilon);
    solve->add_option("--seed", seed);

    auto* eval = app.add_subcommand("eval-constraints", "MCMC constraint satisfaction of a controller");
    eval->add_option("--model", model_path)->required();
    eval->add_option("--controller", controller_path)->required();
    eval->add_option("--seed", seed);
    eval->add_flag("--json", as_json);

    auto* constrain = app.add_subcommand("constrain", "Branch-and-bound constraint improvement");
    constrain->add_option("--model", model_path)->required();
    constrain->add_option("--controller", controller_path)->required();
    constrain->add_option("--out", out_path)->required();
    constrain->add_option("--levels", levels_csv);
    constrain->add_option("--seed", seed);

    auto* build = app.add_subcommand("build-model", "Emit per-drone POMDP model files from a scenario config");
    build->add_option("--config", config_path)->required();
    build->add_option("--out", out_dir);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs under one strategy");
    simulate->add_option("--config", config_path)->required();
    simulate->add_option("--strategy", strategy_arg)->required()->check(CLI::IsMember({"greedy", "naive", "intelligent"}));
    simulate->add_option("--runs", runs);
    simulate->add_option("--seed", seed);
    simulate->add_option("--out", out_dir);

    auto* comp = app.add_subcommand("compare", "Summarize strategy runs into one table");
    comp->add_option("--in", in_dirs)->required()->expected(-1);
    comp->add_option("--out", out_path)->required();

    auto* calib = app.add_subcommand("calibrate-lambda", "Bracket the filter divergence arrival probability");
    calib->add_option("--config", config_path);
    calib->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(model_path, out_path, epsilon, seed);
        if (eval->parsed()) return cmd_eval(model_path, controller_path, seed, as_json);
        if (constrain->parsed()) return cmd_constrain(model_path, controller_path, out_path, levels_csv, seed);
        if (build->parsed()) return cmd_build_model(config_path, out_dir);
        if (simulate->parsed()) return cmd_simulate(config_path, strategy_arg, runs, seed, out_dir);
        if (comp->parsed()) return cmd_compare(in_dirs, out_path);
        if (calib->parsed()) return cmd_calibrate_lambda(config_path, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
