#include "capomdp/model_io.hpp"

#include <fstream>
#include <json.hpp>

namespace capomdp {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path + ": " + e.what());
    }
    return j;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::vector<std::string> name_list(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_array())
        throw ModelFormatError("model file is missing name list '" + key + "'");
    std::vector<std::string> names;
    for (const auto& v : j[key]) names.push_back(v.get<std::string>());
    if (names.empty()) throw ModelFormatError("name list '" + key + "' is empty");
    return names;
}

}  // namespace

ModelFile load_model_file(const std::string& path) {
    json j = load_json(path);
    ModelFile mf;

    auto states = name_list(j, "states");
    auto actions = name_list(j, "actions");
    auto observations = name_list(j, "observations");
    const int S = static_cast<int>(states.size());
    const int A = static_cast<int>(actions.size());
    const int O = static_cast<int>(observations.size());

    double discount = j.value("discount", 0.95);
    mf.model = PomdpModel(S, A, O, discount);
    mf.model.state_names = states;
    mf.model.action_names = actions;
    mf.model.observation_names = observations;

    const auto& T = j.at("transition");
    if (static_cast<int>(T.size()) != A) throw ModelFormatError("transition must have one matrix per action");
    for (int a = 0; a < A; ++a) {
        if (static_cast<int>(T[a].size()) != S)
            throw ModelFormatError("transition[" + std::to_string(a) + "] must have " + std::to_string(S) + " rows");
        for (int s = 0; s < S; ++s) {
            if (static_cast<int>(T[a][s].size()) != S)
                throw ModelFormatError("transition[" + std::to_string(a) + "][" + std::to_string(s) + "] has wrong width");
            for (int sp = 0; sp < S; ++sp) mf.model.transition(s, a, sp) = T[a][s][sp].get<double>();
        }
    }

    const auto& R = j.at("reward");
    if (static_cast<int>(R.size()) != S) throw ModelFormatError("reward must have one row per state");
    for (int s = 0; s < S; ++s) {
        if (static_cast<int>(R[s].size()) != A)
            throw ModelFormatError("reward[" + std::to_string(s) + "] has wrong width");
        for (int a = 0; a < A; ++a) mf.model.reward(s, a) = R[s][a].get<double>();
    }

    const auto& Ob = j.at("obs_model");
    if (static_cast<int>(Ob.size()) != A) throw ModelFormatError("obs_model must have one matrix per action");
    for (int a = 0; a < A; ++a) {
        if (static_cast<int>(Ob[a].size()) != S)
            throw ModelFormatError("obs_model[" + std::to_string(a) + "] must have " + std::to_string(S) + " rows");
        for (int sp = 0; sp < S; ++sp) {
            if (static_cast<int>(Ob[a][sp].size()) != O)
                throw ModelFormatError("obs_model[" + std::to_string(a) + "][" + std::to_string(sp) + "] has wrong width");
            for (int o = 0; o < O; ++o) mf.model.observation(o, sp, a) = Ob[a][sp][o].get<double>();
        }
    }

    mf.model.validate();

    mf.constraints.horizon_s = j.value("horizon_s", 1.0);
    mf.constraints.epoch_s = j.value("epoch_s", 0.1);
    std::vector<std::string> resources;
    if (j.contains("constraints")) {
        for (const auto& c : j["constraints"]) {
            ResourceLimit row;
            row.resource = c.at("resource").get<std::string>();
            row.limit = c.at("limit").get<double>();
            row.eta = c.at("eta").get<double>();
            mf.constraints.rows.push_back(row);
            resources.push_back(row.resource);
        }
        mf.constraints.validate();
    }

    mf.utilization = UtilizationModel(static_cast<int>(resources.size()), A);
    if (j.contains("utilization")) {
        for (std::size_t h = 0; h < resources.size(); ++h) {
            const auto& per_action = j["utilization"].at(resources[h]);
            for (int a = 0; a < A; ++a) {
                const auto& u = per_action.at(actions[a]);
                mf.utilization.set(static_cast<int>(h), a, u.at("mean").get<double>(),
                                   u.at("std").get<double>());
            }
        }
    } else if (!resources.empty()) {
        throw ModelFormatError("constraints present but utilization table missing");
    }
    return mf;
}

void save_model_file(const ModelFile& mf, const std::string& path) {
    const PomdpModel& m = mf.model;
    json j;
    j["states"] = m.state_names;
    j["actions"] = m.action_names;
    j["observations"] = m.observation_names;
    j["discount"] = m.discount();

    json T = json::array();
    for (int a = 0; a < m.num_actions(); ++a) {
        json mat = json::array();
        for (int s = 0; s < m.num_states(); ++s) {
            json row = json::array();
            for (int sp = 0; sp < m.num_states(); ++sp) row.push_back(m.transition(s, a, sp));
            mat.push_back(row);
        }
        T.push_back(mat);
    }
    j["transition"] = T;

    json R = json::array();
    for (int s = 0; s < m.num_states(); ++s) {
        json row = json::array();
        for (int a = 0; a < m.num_actions(); ++a) row.push_back(m.reward(s, a));
        R.push_back(row);
    }
    j["reward"] = R;

    json Ob = json::array();
    for (int a = 0; a < m.num_actions(); ++a) {
        json mat = json::array();
        for (int sp = 0; sp < m.num_states(); ++sp) {
            json row = json::array();
            for (int o = 0; o < m.num_observations(); ++o) row.push_back(m.observation(o, sp, a));
            mat.push_back(row);
        }
        Ob.push_back(mat);
    }
    j["obs_model"] = Ob;

    j["horizon_s"] = mf.constraints.horizon_s;
    j["epoch_s"] = mf.constraints.epoch_s;
    json cons = json::array();
    for (const auto& row : mf.constraints.rows)
        cons.push_back({{"resource", row.resource}, {"limit", row.limit}, {"eta", row.eta}});
    j["constraints"] = cons;

    json util;
    for (int h = 0; h < mf.utilization.num_resources(); ++h) {
        json per_action;
        for (int a = 0; a < m.num_actions(); ++a)
            per_action[m.action_names[a]] = {{"mean", mf.utilization.mean(h, a)},
                                             {"std", mf.utilization.stddev(h, a)}};
        util[mf.constraints.rows[h].resource] = per_action;
    }
    j["utilization"] = util;

    write_json(j, path);
}

ControllerFile load_controller_file(const std::string& path) {
    json j = load_json(path);
    ControllerFile cf;

    auto parse_fsc = [](const json& jc) {
        FiniteStateController fsc;
        for (const auto& n : jc.at("nodes")) {
            std::vector<int> succ = n.at("successors").get<std::vector<int>>();
            int id = fsc.add_node(n.at("action").get<int>(), std::move(succ));
            auto alpha = n.at("alpha").get<std::vector<double>>();
            fsc.values[id] = Eigen::Map<Eigen::VectorXd>(alpha.data(), alpha.size());
        }
        if (jc.contains("edge_obs")) {
            const auto& E = jc["edge_obs"];
            for (int i = 0; i < fsc.num_nodes(); ++i)
                for (int o = 0; o < fsc.num_observations(); ++o)
                    fsc.edge_obs(i, o) = E[i][o].get<double>();
        }
        fsc.validate();
        return fsc;
    };

    cf.controller = parse_fsc(j.at("controller"));
    cf.converged = j.value("converged", true);
    if (j.contains("omega")) {
        for (const auto& e : j["omega"]) {
            OmegaPool::Entry entry;
            entry.action = e.at("action").get<int>();
            auto vals = e.at("values").get<std::vector<double>>();
            entry.values = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
            cf.omega.add_raw(std::move(entry));
        }
    }
    if (j.contains("optimal")) {
        cf.optimal = parse_fsc(j["optimal"]);
        cf.has_optimal = true;
    }
    return cf;
}

void save_controller_file(const ControllerFile& cf, const std::string& path) {
    auto dump_fsc = [](const FiniteStateController& fsc) {
        json jc;
        json nodes = json::array();
        for (int i = 0; i < fsc.num_nodes(); ++i) {
            json n;
            n["id"] = i;
            n["action"] = fsc.nodes[i].action;
            n["successors"] = fsc.nodes[i].successor;
            std::vector<double> alpha(fsc.values[i].data(), fsc.values[i].data() + fsc.values[i].size());
            n["alpha"] = alpha;
            nodes.push_back(n);
        }
        jc["nodes"] = nodes;
        json E = json::array();
        for (int i = 0; i < fsc.num_nodes(); ++i) {
            json row = json::array();
            for (int o = 0; o < fsc.num_observations(); ++o) row.push_back(fsc.edge_obs(i, o));
            E.push_back(row);
        }
        jc["edge_obs"] = E;
        return jc;
    };

    json j;
    j["controller"] = dump_fsc(cf.controller);
    j["converged"] = cf.converged;
    json omega = json::array();
    for (const auto& e : cf.omega.entries()) {
        std::vector<double> vals(e.values.data(), e.values.data() + e.values.size());
        omega.push_back({{"action", e.action}, {"values", vals}});
    }
    j["omega"] = omega;
    if (cf.has_optimal) j["optimal"] = dump_fsc(cf.optimal);
    write_json(j, path);
}

}  // namespace capomdp
