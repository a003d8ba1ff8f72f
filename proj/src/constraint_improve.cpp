#include "capomdp/constraint_improve.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

namespace capomdp {

namespace {

// Mean value gap of an omega entry against a host node over the host's
// dominance region (the probe beliefs the host wins); falls back to the whole
// probe set for nodes that win nowhere.
double dominance_gap(const FiniteStateController& pi, int host, const Eigen::VectorXd& omega_values,
                     const std::vector<Belief>& probes) {
    double sum = 0.0;
    int count = 0;
    for (const Belief& b : probes) {
        if (best_node(pi, b) != host) continue;
        sum += pi.values[host].dot(b.probs()) - omega_values.dot(b.probs());
        ++count;
    }
    if (count == 0) {
        for (const Belief& b : probes) sum += pi.values[host].dot(b.probs()) - omega_values.dot(b.probs());
        count = static_cast<int>(probes.size());
    }
    return sum / count;
}

Eigen::VectorXd eta_vector(const ConstraintSpec& spec) {
    Eigen::VectorXd eta(spec.num_resources());
    for (int h = 0; h < spec.num_resources(); ++h) eta[h] = spec.rows[h].eta;
    return eta;
}

bool fails_all(const Eigen::VectorXd& satisfaction, const Eigen::VectorXd& eta) {
    for (int h = 0; h < satisfaction.size(); ++h)
        if (satisfaction[h] >= eta[h]) return false;
    return satisfaction.size() > 0;
}

}  // namespace

double value_loss_against(const FiniteStateController& optimal, const FiniteStateController& candidate,
                          const std::vector<Belief>& probes) {
    double loss = 0.0;
    for (const Belief& b : probes)
        loss = std::max(loss, controller_value(optimal, b) - controller_value(candidate, b));
    return std::max(0.0, loss);
}

FeasibleRegion all_feasible_regions(const FiniteStateController& pi, const OmegaPool& omega,
                                    const UtilizationModel& util, const std::vector<double>& levels,
                                    const std::vector<Belief>& probes) {
    if (omega.empty()) throw NoFeasiblePair("omega pool is empty");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0 && levels[k] <= 1.0))
            throw ModelFormatError("redirection levels must lie in (0,1]");
        if (k > 0 && !(levels[k] > levels[k - 1]))
            throw ModelFormatError("redirection levels must be strictly increasing");
    }

    FeasibleRegion region;
    region.levels = levels;
    for (int i = 0; i < pi.num_nodes(); ++i) {
        for (std::size_t j = 0; j < omega.size(); ++j) {
            if (!util.strictly_cheaper(omega[j].action, pi.nodes[i].action)) continue;
            FeasiblePair p;
            p.node = i;
            p.omega = static_cast<int>(j);
            p.gap = dominance_gap(pi, i, omega[j].values, probes);
            region.pairs.push_back(p);
        }
    }
    if (region.pairs.empty())
        throw NoFeasiblePair("no omega action strictly reduces utilization against any machine state");
    std::stable_sort(region.pairs.begin(), region.pairs.end(), [](const FeasiblePair& a, const FeasiblePair& b) {
        if (a.gap != b.gap) return a.gap < b.gap;
        if (a.node != b.node) return a.node < b.node;
        return a.omega < b.omega;
    });
    region.span_begin = 0;
    region.span_end = static_cast<int>(region.pairs.size() * levels.size());
    return region;
}

FeasibleRegion prepare_feasible_root(const FiniteStateController& pi, const OmegaPool& omega,
                                     const UtilizationModel& util, const std::vector<double>& levels,
                                     const std::vector<Belief>& probes, int max_pairs) {
    FeasibleRegion region = all_feasible_regions(pi, omega, util, levels, probes);

    std::vector<int> foreign_indeg(pi.num_nodes(), 0);
    for (int k = 0; k < pi.num_nodes(); ++k)
        for (int o = 0; o < pi.num_observations(); ++o)
            if (pi.nodes[k].successor[o] != k) ++foreign_indeg[pi.nodes[k].successor[o]];

    std::vector<FeasiblePair> reachable;
    for (const FeasiblePair& p : region.pairs)
        if (foreign_indeg[p.node] > 0) reachable.push_back(p);
    if (reachable.empty())
        throw NoFeasiblePair("no feasible pair hosts a redirectable in-edge");

    if (max_pairs > 0 && static_cast<int>(reachable.size()) > max_pairs) {
        // round-robin across omega actions, lowest gap first within each
        std::map<int, std::vector<FeasiblePair>> buckets;
        for (const FeasiblePair& p : reachable) buckets[omega[p.omega].action].push_back(p);
        std::vector<FeasiblePair> kept;
        bool more = true;
        for (std::size_t round = 0; more && static_cast<int>(kept.size()) < max_pairs; ++round) {
            more = false;
            for (auto& [action, bucket] : buckets) {
                if (round < bucket.size()) {
                    more = true;
                    kept.push_back(bucket[round]);
                    if (static_cast<int>(kept.size()) >= max_pairs) break;
                }
            }
        }
        std::stable_sort(kept.begin(), kept.end(), [](const FeasiblePair& a, const FeasiblePair& b) {
            if (a.gap != b.gap) return a.gap < b.gap;
            if (a.node != b.node) return a.node < b.node;
            return a.omega < b.omega;
        });
        reachable = std::move(kept);
    }
    region.pairs = std::move(reachable);
    region.span_begin = 0;
    region.span_end = static_cast<int>(region.pairs.size() * region.levels.size());
    return region;
}

FiniteStateController inject(const PomdpModel& model, const FiniteStateController& pi, int host,
                             const OmegaPool::Entry& entry, double level, Rng& rng, bool redirect_all) {
    FiniteStateController out = pi;
    const int O = out.num_observations();

    // The new node inherits the host's outgoing edges. A self-loop of the
    // host shows up in the copy as an edge back to the host, never as a
    // self-loop of the new node.
    int cj = out.add_node(entry.action, out.nodes[host].successor);

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int k = 0; k < cj; ++k) {
        if (k == host) continue;
        for (int o = 0; o < O; ++o) {
            if (out.nodes[k].successor[o] != host) continue;
            if (redirect_all || u01(rng) < level) out.nodes[k].successor[o] = cj;
        }
    }
    evaluate_policy(model, out);
    return out;
}

LeafEvaluation evaluate_injection_leaf(const PomdpModel& model, const FiniteStateController& incumbent,
                                       const FiniteStateController& optimal, const OmegaPool::Entry& entry,
                                       int host, double level, int level_index, const ConstraintSpec& spec,
                                       const UtilizationModel& util, const std::vector<Belief>& probes,
                                       const ConstraintEvalOptions& eval_opts, std::uint64_t seed, int outer) {
    std::uint64_t leaf_seed = derive_seed(derive_seed(seed, 0x1eafULL, static_cast<std::uint64_t>(outer)),
                                          static_cast<std::uint64_t>(host * 1315423911 + entry.action),
                                          static_cast<std::uint64_t>(level_index));
    Rng rng(leaf_seed);
    LeafEvaluation leaf;
    leaf.controller = inject(model, incumbent, host, entry, level, rng);
    leaf.value_loss = value_loss_against(optimal, leaf.controller, probes);
    ConstraintEvalOptions eo = eval_opts;
    eo.seed = derive_seed(leaf_seed, 0xe1a1ULL);
    ConstraintEvalResult ev = constraint_eval(leaf.controller, spec, util, eo);
    leaf.satisfaction = ev.satisfaction;
    leaf.z_margin = ev.z_margin(spec);
    leaf.satisfied = ev.passes(spec);
    return leaf;
}

namespace {

struct SearchOutcome {
    bool found = false;
    LeafEvaluation best;     // best satisfying leaf
    bool fallback_found = false;
    LeafEvaluation fallback;  // best margin when nothing satisfied
    long leaves = 0;
};

SearchOutcome branch_and_bound(const PomdpModel& model, const FiniteStateController& incumbent,
                               const FiniteStateController& optimal, const OmegaPool& omega,
                               const ConstraintSpec& spec, const UtilizationModel& util,
                               const FeasibleRegion& root, const std::vector<Belief>& probes,
                               const ConstraintImproveOptions& opts, int outer,
                               double incumbent_margin) {
    const Eigen::VectorXd eta = eta_vector(spec);
    SearchOutcome out;
    double incumbent_loss = std::numeric_limits<double>::infinity();
    double fallback_margin = -std::numeric_limits<double>::infinity();

    struct QueueEntry {
        BnBNode node;
        long order = 0;
    };
    std::vector<QueueEntry> queue;
    long counter = 0;
    queue.push_back({BnBNode{root, 0.0, std::numeric_limits<double>::infinity(), {}}, counter++});

    auto pop_least_g = [&]() {
        std::size_t best_i = 0;
        for (std::size_t i = 1; i < queue.size(); ++i) {
            const auto& a = queue[i];
            const auto& b = queue[best_i];
            if (a.node.lower_g < b.node.lower_g - 1e-12 ||
                (std::abs(a.node.lower_g - b.node.lower_g) <= 1e-12 && a.order < b.order))
                best_i = i;
        }
        QueueEntry e = std::move(queue[best_i]);
        queue.erase(queue.begin() + best_i);
        return e;
    };

    while (!queue.empty()) {
        QueueEntry entry = pop_least_g();
        BnBNode& node = entry.node;
        if (node.lower_g > incumbent_loss + 1e-9) continue;  // bound prune

        if (node.region.span_size() == 1) {
            int element = node.region.span_begin;
            const FeasiblePair& pair = node.region.pairs[node.region.pair_of(element)];
            int li = node.region.level_of(element);
            LeafEvaluation leaf = evaluate_injection_leaf(
                model, incumbent, optimal, omega[pair.omega], pair.node, node.region.levels[li], li, spec,
                util, probes, opts.eval, opts.seed, outer);
            ++out.leaves;
            if (leaf.satisfied) {
                if (!out.found || leaf.value_loss < out.best.value_loss - 1e-12) {
                    out.best = leaf;
                    out.found = true;
                    incumbent_loss = leaf.value_loss;
                }
            } else {
                double margin = leaf.z_margin;
                if (!out.fallback_found || margin > fallback_margin + 1e-12 ||
                    (std::abs(margin - fallback_margin) <= 1e-12 &&
                     leaf.value_loss < out.fallback.value_loss - 1e-12)) {
                    out.fallback = leaf;
                    out.fallback_found = true;
                    fallback_margin = margin;
                }
            }
            continue;
        }

        // Bound the region by its most redirection-heavy realization: the
        // cheapest omega action on the busiest host in the span, every
        // in-edge moved over. If even that fails all targets and gives no
        // margin progress over the incumbent, nothing below can help.
        // Skipped on small spans so the search degenerates to exhaustive
        // enumeration there.
        if (node.region.span_size() >= std::max(2, opts.bound_span_min)) {
            std::vector<int> foreign_indeg(incumbent.num_nodes(), 0);
            for (int k = 0; k < incumbent.num_nodes(); ++k)
                for (int o = 0; o < incumbent.num_observations(); ++o)
                    if (incumbent.nodes[k].successor[o] != k) ++foreign_indeg[incumbent.nodes[k].successor[o]];
            int cheapest = node.region.span_begin;
            double cheapest_score = std::numeric_limits<double>::infinity();
            int best_traffic = -1;
            for (int e = node.region.span_begin; e < node.region.span_end; ++e) {
                const FeasiblePair& p = node.region.pairs[node.region.pair_of(e)];
                double score = 0.0;
                for (int h = 0; h < util.num_resources(); ++h)
                    score += util.mean(h, omega[p.omega].action) / spec.rows[h].limit;
                int traffic = foreign_indeg[p.node];
                if (score < cheapest_score - 1e-15 ||
                    (score < cheapest_score + 1e-15 && traffic > best_traffic)) {
                    cheapest_score = score;
                    best_traffic = traffic;
                    cheapest = e;
                }
            }
            const FeasiblePair& pair = node.region.pairs[node.region.pair_of(cheapest)];
            Rng rng(derive_seed(opts.seed, 0xb0edULL, static_cast<std::uint64_t>(cheapest)));
            FiniteStateController pi_max =
                inject(model, incumbent, pair.node, omega[pair.omega], 1.0, rng, /*redirect_all=*/true);
            node.upper_f = value_loss_against(optimal, pi_max, probes);
            ConstraintEvalOptions be = opts.bound_eval;
            be.seed = derive_seed(opts.seed, 0xb0ed2ULL, static_cast<std::uint64_t>(cheapest));
            ConstraintEvalResult bound_eval = constraint_eval(pi_max, spec, util, be);
            node.max_redirect_satisfaction = bound_eval.satisfaction;
            if (fails_all(node.max_redirect_satisfaction, eta) &&
                bound_eval.z_margin(spec) <= incumbent_margin + 1e-6)
                continue;  // prune: no span element can make progress
        }

        int mid = node.region.span_begin + node.region.span_size() / 2;
        for (int half = 0; half < 2; ++half) {
            BnBNode child;
            child.region = node.region;
            child.region.span_begin = half == 0 ? node.region.span_begin : mid;
            child.region.span_end = half == 0 ? mid : node.region.span_end;
            child.lower_g = 0.0;  // no-redirect bound
            child.upper_f = std::numeric_limits<double>::infinity();
            if (child.region.span_size() > 0) queue.push_back({std::move(child), counter++});
        }
    }
    return out;
}

// Single-node self-loop controller on the cheapest action; used for the
// unsatisfiable check. Prefers an action minimal in every resource, else the
// one with the smallest normalized total.
FiniteStateController minimal_action_controller(const PomdpModel& model, const ConstraintSpec& spec,
                                                const UtilizationModel& util) {
    int best_a = 0;
    bool found_global = false;
    for (int a = 0; a < model.num_actions(); ++a) {
        bool minimal = true;
        for (int h = 0; h < util.num_resources() && minimal; ++h)
            for (int a2 = 0; a2 < model.num_actions(); ++a2)
                if (util.mean(h, a2) < util.mean(h, a) - 1e-15) {
                    minimal = false;
                    break;
                }
        if (minimal) {
            best_a = a;
            found_global = true;
            break;
        }
    }
    if (!found_global) {
        double best_score = std::numeric_limits<double>::infinity();
        for (int a = 0; a < model.num_actions(); ++a) {
            double score = 0.0;
            for (int h = 0; h < util.num_resources(); ++h)
                score += util.mean(h, a) * spec.epochs_per_horizon() / spec.rows[h].limit;
            if (score < best_score) {
                best_score = score;
                best_a = a;
            }
        }
    }
    FiniteStateController fsc;
    fsc.add_node(best_a, std::vector<int>(model.num_observations(), 0));
    evaluate_policy(model, fsc);
    return fsc;
}

}  // namespace

ConstraintImproveResult constraint_improve(const PomdpModel& model, const FiniteStateController& optimal,
                                           const OmegaPool& omega, const ConstraintSpec& spec,
                                           const UtilizationModel& util,
                                           const ConstraintImproveOptions& opts) {
    const std::vector<Belief> probes = make_probe_beliefs(model.num_states(), opts.probe_count, opts.seed);
    const Eigen::VectorXd eta = eta_vector(spec);

    ConstraintImproveResult result;
    result.controller = optimal;

    ConstraintEvalOptions first = opts.eval;
    first.seed = derive_seed(opts.seed, 0x0e1a0ULL);
    ConstraintEvalResult n0 = constraint_eval(optimal, spec, util, first);
    if (n0.passes(spec)) {
        result.satisfaction = n0.satisfaction;
        result.already_compliant = true;
        return result;
    }

    FiniteStateController incumbent = optimal;
    Eigen::VectorXd incumbent_sat = n0.satisfaction;
    double incumbent_z = n0.z_margin(spec);
    bool satisfied = false;

    for (int outer = 1; outer <= opts.max_outer && !satisfied; ++outer) {
        FeasibleRegion root;
        try {
            root = prepare_feasible_root(incumbent, omega, util, opts.levels, probes, opts.max_pairs);
        } catch (const NoFeasiblePair&) {
            break;
        }

        SearchOutcome search = branch_and_bound(model, incumbent, optimal, omega, spec, util, root, probes,
                                                opts, outer, incumbent_z);
        result.leaves_explored += search.leaves;

        if (search.found) {
            incumbent = search.best.controller;
            incumbent_sat = search.best.satisfaction;
            incumbent_z = search.best.z_margin;
            ++result.states_injected;
            satisfied = true;
        } else if (search.fallback_found && search.fallback.z_margin > incumbent_z + 1e-9) {
            incumbent = search.fallback.controller;
            incumbent_sat = search.fallback.satisfaction;
            incumbent_z = search.fallback.z_margin;
            ++result.states_injected;
        } else {
            if (opts.on_outer) opts.on_outer(outer, result.states_injected, incumbent_z, false);
            break;  // no change
        }
        if (opts.on_outer) opts.on_outer(outer, result.states_injected, incumbent_z, satisfied);
    }

    if (satisfied && result.states_injected > 0 && opts.restoration_states > 0) {
        // Value restoration: try omega entries that beat degraded regions of
        // the incumbent without breaking the constraints.
        int added = 0;
        for (int round = 0; round < opts.restoration_states && added == round; ++round) {
            struct Candidate {
                int host;
                int omega_idx;
                double gap;
            };
            std::vector<Candidate> cands;
            for (int i = 0; i < incumbent.num_nodes(); ++i)
                for (std::size_t j = 0; j < omega.size(); ++j) {
                    double gap = dominance_gap(incumbent, i, omega[j].values, probes);
                    if (gap < -1e-9) cands.push_back({i, static_cast<int>(j), gap});
                }
            std::stable_sort(cands.begin(), cands.end(),
                             [](const Candidate& a, const Candidate& b) { return a.gap < b.gap; });
            if (cands.size() > 16) cands.resize(16);
            double current_loss = value_loss_against(optimal, incumbent, probes);
            for (const Candidate& c : cands) {
                LeafEvaluation leaf = evaluate_injection_leaf(
                    model, incumbent, optimal, omega[c.omega_idx], c.host, opts.levels.back(),
                    static_cast<int>(opts.levels.size()) - 1, spec, util, probes, opts.eval, opts.seed,
                    1000 + round);
                ++result.leaves_explored;
                if (!leaf.satisfied) continue;
                if (leaf.value_loss < current_loss - 1e-9) {
                    incumbent = leaf.controller;
                    incumbent_sat = leaf.satisfaction;
                    ++result.states_injected;
                    ++added;
                    break;
                }
            }
        }
    }

    if (!satisfied) {
        // The search stalled short of the targets. The cheapest-action
        // controller decides the outcome: if even it fails, the constraints
        // are unsatisfiable; if it passes, it becomes the result (injection
        // cannot reroute a controller whose hosts have no foreign in-edges,
        // a single self-loop being the common case).
        FiniteStateController minimal = minimal_action_controller(model, spec, util);
        ConstraintEvalOptions me = opts.eval;
        me.seed = derive_seed(opts.seed, 0x3333ULL);
        ConstraintEvalResult mres = constraint_eval(minimal, spec, util, me);
        result.controller = minimal;
        result.satisfaction = mres.satisfaction;
        result.value_loss = value_loss_against(optimal, minimal, probes);
        result.unsatisfiable = !mres.passes(spec);
        return result;
    }

    result.controller = incumbent;
    result.satisfaction = incumbent_sat;
    result.value_loss = value_loss_against(optimal, incumbent, probes);
    return result;
}

}  // namespace capomdp
