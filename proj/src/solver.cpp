#include "capomdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "capomdp/lp.hpp"

namespace capomdp {

namespace {

// g[a][o][j](s) = sum_{s'} T(s'|s,a) O(o|s',a) v_j(s'); a backed-up candidate
// is then R(.,a) + gamma * sum_o g[a][o][choice(o)].
std::vector<std::vector<std::vector<Eigen::VectorXd>>> backup_tables(
    const PomdpModel& model, const std::vector<Eigen::VectorXd>& values) {
    const int S = model.num_states();
    const int A = model.num_actions();
    const int O = model.num_observations();
    const int V = static_cast<int>(values.size());
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> g(
        A, std::vector<std::vector<Eigen::VectorXd>>(O, std::vector<Eigen::VectorXd>(V)));
    for (int a = 0; a < A; ++a)
        for (int o = 0; o < O; ++o)
            for (int j = 0; j < V; ++j) {
                Eigen::VectorXd col(S);
                for (int s = 0; s < S; ++s) {
                    double acc = 0.0;
                    for (int sp = 0; sp < S; ++sp)
                        acc += model.transition(s, a, sp) * model.observation(o, sp, a) * values[j][sp];
                    col[s] = acc;
                }
                g[a][o][j] = std::move(col);
            }
    return g;
}

std::size_t pow_checked(std::size_t base, int exp, std::size_t limit) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && r > limit / base) return limit + 1;
        r *= base;
    }
    return r;
}

bool pointwise_leq(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol = 1e-12) {
    return ((a.array() - b.array()) <= tol).all();
}

}  // namespace

std::vector<BackupCandidate> dp_backup(const PomdpModel& model,
                                       const std::vector<Eigen::VectorXd>& values, std::size_t cap) {
    const int A = model.num_actions();
    const int O = model.num_observations();
    const std::size_t V = values.size();
    const std::size_t per_action = pow_checked(V, O, cap + 1);
    if (per_action > cap / A || per_action * A > cap)
        throw CandidateExplosion(per_action > cap ? per_action : per_action * A, cap);

    auto g = backup_tables(model, values);
    const int S = model.num_states();
    const double gamma = model.discount();

    std::vector<BackupCandidate> out;
    out.reserve(per_action * A);
    std::vector<int> choice(O, 0);
    for (int a = 0; a < A; ++a) {
        std::fill(choice.begin(), choice.end(), 0);
        for (std::size_t idx = 0; idx < per_action; ++idx) {
            BackupCandidate cand;
            cand.action = a;
            cand.choice = choice;
            Eigen::VectorXd v(S);
            for (int s = 0; s < S; ++s) v[s] = model.reward(s, a);
            for (int o = 0; o < O; ++o) v += gamma * g[a][o][choice[o]];
            cand.values = std::move(v);
            out.push_back(std::move(cand));
            // mixed-radix increment, observation 0 least significant
            for (int o = 0; o < O; ++o) {
                if (++choice[o] < static_cast<int>(V)) break;
                choice[o] = 0;
            }
        }
    }
    return out;
}

PruneResult prune_dominated(const std::vector<Eigen::VectorXd>& vectors, double margin_tol) {
    const int n = static_cast<int>(vectors.size());
    PruneResult result;
    if (n == 0) return result;
    if (n == 1) {
        result.kept.push_back(0);
        return result;
    }

    // Deduplicate first so identical vectors cannot prune each other.
    std::vector<int> uniques;
    for (int i = 0; i < n; ++i) {
        bool dup = false;
        for (int u : uniques)
            if ((vectors[i] - vectors[u]).lpNorm<Eigen::Infinity>() <= 1e-9) {
                dup = true;
                break;
            }
        if (!dup) uniques.push_back(i);
    }

    // Pointwise prefilter: anything below another unique vector everywhere
    // can never own a witness belief.
    std::vector<int> pending;
    for (int u : uniques) {
        bool dominated = false;
        for (int w : uniques) {
            if (w == u) continue;
            if (pointwise_leq(vectors[u], vectors[w]) && !pointwise_leq(vectors[w], vectors[u])) {
                dominated = true;
                break;
            }
        }
        if (!dominated) pending.push_back(u);
    }

    // Lark's filtering: one LP per vector against the growing surface; the
    // winner at each witness belief joins the surface.
    std::vector<int> surface;
    std::vector<Eigen::VectorXd> surface_vecs;
    auto best_at = [&](const Eigen::VectorXd& belief) {
        int best = pending.front();
        double best_val = vectors[best].dot(belief);
        for (int c : pending) {
            double v = vectors[c].dot(belief);
            if (v > best_val + 1e-12 ||
                (v > best_val - 1e-12 && c != best &&
                 std::lexicographical_compare(vectors[best].data(), vectors[best].data() + vectors[best].size(),
                                              vectors[c].data(), vectors[c].data() + vectors[c].size()))) {
                best_val = v;
                best = c;
            }
        }
        return best;
    };
    while (!pending.empty()) {
        int d = pending.front();
        DominanceWitness wit = best_belief_margin(vectors[d], surface_vecs, margin_tol);
        if (!wit.dominant) {
            pending.erase(pending.begin());
            continue;
        }
        int winner = best_at(wit.belief);  // with an empty surface the witness is the uniform belief
        surface.push_back(winner);
        surface_vecs.push_back(vectors[winner]);
        pending.erase(std::find(pending.begin(), pending.end(), winner));
    }

    std::sort(surface.begin(), surface.end());
    std::vector<char> is_kept(n, 0);
    for (int k : surface) is_kept[k] = 1;
    for (int i = 0; i < n; ++i) {
        if (is_kept[i])
            result.kept.push_back(i);
        else
            result.pruned.push_back(i);
    }
    if (result.kept.empty()) {
        // Numerically flat input (all duplicates of one hyperplane): keep the
        // lowest-index representative rather than returning an empty surface.
        result.kept.push_back(result.pruned.front());
        result.pruned.erase(result.pruned.begin());
    }
    return result;
}

bool OmegaPool::insert(Entry entry, const FiniteStateController& current, const std::vector<Belief>& probes,
                       const UtilizationModel* util) {
    if (!entry.values.allFinite()) return false;
    for (const Entry& e : entries_)
        if (e.values.size() == entry.values.size() &&
            (e.values - entry.values).lpNorm<Eigen::Infinity>() <= dedup_tol)
            return false;
    // Reject entries that beat the current controller surface anywhere on the
    // probe set; those belong in the controller, not the pool.
    if (!current.nodes.empty() && !current.values.empty() && current.values[0].size() == entry.values.size()) {
        for (const Belief& b : probes) {
            double surface = controller_value(current, b);
            if (entry.values.dot(b.probs()) > surface + 1e-9) return false;
        }
    }
    if (entries_.size() >= cap) {
        std::size_t evict = 0;
        if (util != nullptr) {
            auto score = [&](const Entry& e) {
                double total = 0.0;
                for (int h = 0; h < util->num_resources(); ++h) {
                    double worst = 0.0;
                    for (int a = 0; a < util->num_actions(); ++a) worst = std::max(worst, util->mean(h, a));
                    if (worst > 0.0) total += util->mean(h, e.action) / worst;
                }
                return total;
            };
            double worst_score = score(entries_[0]);
            for (std::size_t i = 1; i < entries_.size(); ++i) {
                double s = score(entries_[i]);
                if (s > worst_score) {
                    worst_score = s;
                    evict = i;
                }
            }
            if (score(entry) >= worst_score) return false;  // newcomer is no better
        }
        entries_.erase(entries_.begin() + evict);
    }
    entries_.push_back(std::move(entry));
    return true;
}

std::vector<Belief> make_probe_beliefs(int n_states, int count, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xbe11ef5ULL));
    std::vector<Belief> probes;
    probes.reserve(count);
    for (int i = 0; i < count; ++i) probes.push_back(random_belief(n_states, rng));
    return probes;
}

namespace {

// Incremental pruning: the kept surface of a full exact backup, computed as
// pruned pairwise cross-sums per action. Equivalent to
// prune_dominated(dp_backup(..)) without enumerating |V|^|O| candidates.
// `working_cap` bounds each pre-prune cross-sum.
std::vector<BackupCandidate> backup_surface(
    const PomdpModel& model, const std::vector<Eigen::VectorXd>& values,
    const std::vector<std::vector<std::vector<Eigen::VectorXd>>>& g, std::size_t working_cap,
    double margin_tol) {
    const int S = model.num_states();
    const int A = model.num_actions();
    const int O = model.num_observations();
    const int V = static_cast<int>(values.size());
    const double gamma = model.discount();

    struct Tagged {
        Eigen::VectorXd sum;
        std::vector<int> choice;
    };

    std::vector<BackupCandidate> all;
    for (int a = 0; a < A; ++a) {
        // prune each observation's summand set first
        std::vector<std::vector<int>> kept_js(O);
        for (int o = 0; o < O; ++o) {
            std::vector<Eigen::VectorXd> set;
            set.reserve(V);
            for (int j = 0; j < V; ++j) set.push_back(g[a][o][j]);
            kept_js[o] = prune_dominated(set, margin_tol).kept;
        }

        std::vector<Tagged> cross;
        for (int j : kept_js[0]) cross.push_back({g[a][0][j], {j}});
        for (int o = 1; o < O; ++o) {
            if (cross.size() * kept_js[o].size() > working_cap)
                throw CandidateExplosion(cross.size() * kept_js[o].size(), working_cap);
            std::vector<Tagged> next;
            next.reserve(cross.size() * kept_js[o].size());
            for (const Tagged& c : cross)
                for (int j : kept_js[o]) {
                    Tagged t;
                    t.sum = c.sum + g[a][o][j];
                    t.choice = c.choice;
                    t.choice.push_back(j);
                    next.push_back(std::move(t));
                }
            std::vector<Eigen::VectorXd> vecs;
            vecs.reserve(next.size());
            for (const Tagged& t : next) vecs.push_back(t.sum);
            PruneResult pr = prune_dominated(vecs, margin_tol);
            std::vector<Tagged> pruned_next;
            pruned_next.reserve(pr.kept.size());
            for (int i : pr.kept) pruned_next.push_back(std::move(next[i]));
            cross = std::move(pruned_next);
        }

        Eigen::VectorXd base(S);
        for (int s = 0; s < S; ++s) base[s] = model.reward(s, a);
        for (Tagged& t : cross) {
            BackupCandidate cand;
            cand.action = a;
            cand.choice = std::move(t.choice);
            cand.values = base + gamma * t.sum;
            all.push_back(std::move(cand));
        }
    }

    // prune across actions
    std::vector<Eigen::VectorXd> vecs;
    vecs.reserve(all.size());
    for (const auto& c : all) vecs.push_back(c.values);
    PruneResult pr = prune_dominated(vecs, margin_tol);
    std::vector<BackupCandidate> kept;
    kept.reserve(pr.kept.size());
    for (int i : pr.kept) kept.push_back(std::move(all[i]));
    return kept;
}

// Per-action best candidate at one belief, built digit by digit; the omega
// pool is stocked with these where they fall below the kept surface.
BackupCandidate best_candidate_at(const PomdpModel& model, const Eigen::VectorXd& belief, int action,
                                  const std::vector<std::vector<std::vector<Eigen::VectorXd>>>& g,
                                  int n_values) {
    const int S = model.num_states();
    const int O = model.num_observations();
    BackupCandidate cand;
    cand.action = action;
    cand.choice.resize(O);
    Eigen::VectorXd v(S);
    for (int s = 0; s < S; ++s) v[s] = model.reward(s, action);
    for (int o = 0; o < O; ++o) {
        int best_j = 0;
        double best_val = g[action][o][0].dot(belief);
        for (int j = 1; j < n_values; ++j) {
            double val = g[action][o][j].dot(belief);
            if (val > best_val + 1e-15) {
                best_val = val;
                best_j = j;
            }
        }
        cand.choice[o] = best_j;
        v += model.discount() * g[action][o][best_j];
    }
    cand.values = std::move(v);
    return cand;
}

}  // namespace

PolicyIterationResult policy_iteration(const PomdpModel& model, FiniteStateController pi0,
                                       const PolicyIterationOptions& opts, const UtilizationModel* util) {
    PolicyIterationResult res;
    res.omega.cap = opts.omega_cap;
    FiniteStateController fsc = std::move(pi0);
    if (fsc.nodes.empty()) fsc = initial_controller(model);
    fsc.validate();

    const std::vector<Belief> probes = make_probe_beliefs(model.num_states(), opts.probe_count, opts.seed);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(model.num_states(), 1.0 / model.num_states());
    const int O = model.num_observations();
    const int A = model.num_actions();

    evaluate_policy(model, fsc);
    if (opts.on_iteration) opts.on_iteration(fsc, 0);

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        res.iterations = iter;
        const std::size_t V = fsc.values.size();

        auto g = backup_tables(model, fsc.values);
        std::vector<BackupCandidate> kept_candidates =
            backup_surface(model, fsc.values, g, opts.candidate_cap, opts.prune_margin);

        // Bellman improvement over the probe set.
        double improvement = 0.0;
        for (const Belief& b : probes) {
            double new_best = -std::numeric_limits<double>::infinity();
            for (const auto& k : kept_candidates) new_best = std::max(new_best, k.values.dot(b.probs()));
            improvement = std::max(improvement, new_best - controller_value(fsc, b));
        }
        res.final_improvement = improvement;

        // Omega material: per-action best candidates at the probe beliefs
        // (and at the uniform belief) that fall below the kept surface.
        {
            auto offer = [&](const Eigen::VectorXd& belief) {
                for (int a = 0; a < A; ++a) {
                    BackupCandidate cand = best_candidate_at(model, belief, a, g, static_cast<int>(V));
                    bool on_surface = false;
                    for (const auto& k : kept_candidates)
                        if ((k.values - cand.values).lpNorm<Eigen::Infinity>() <= 1e-9) {
                            on_surface = true;
                            break;
                        }
                    if (!on_surface) res.omega.insert({cand.values, a}, fsc, probes, util);
                }
            };
            offer(uniform);
            for (const Belief& b : probes) offer(b.probs());
        }

        if (improvement < opts.epsilon) {
            res.converged = true;
            break;
        }

        // Hansen transformation against the current node set.
        const std::size_t old_nodes = fsc.nodes.size();
        std::vector<char> replaced(old_nodes, 0);
        for (const auto& cand : kept_candidates) {
            bool skip = false;
            for (std::size_t i = 0; i < old_nodes; ++i) {
                if (fsc.nodes[i].action == cand.action && fsc.nodes[i].successor == cand.choice) {
                    skip = true;
                    break;
                }
            }
            if (skip) continue;
            int replace_at = -1;
            for (std::size_t i = 0; i < old_nodes; ++i) {
                if (replaced[i]) continue;
                if (pointwise_leq(fsc.values[i], cand.values, 1e-9)) {
                    replace_at = static_cast<int>(i);
                    break;
                }
            }
            if (replace_at >= 0) {
                fsc.nodes[replace_at].action = cand.action;
                fsc.nodes[replace_at].successor = cand.choice;
                replaced[replace_at] = 1;
            } else {
                fsc.add_node(cand.action, cand.choice);
            }
        }

        evaluate_policy(model, fsc);
        std::vector<int> roots;
        roots.reserve(probes.size());
        for (const Belief& b : probes) roots.push_back(best_node(fsc, b));
        fsc.sweep_unreachable(roots);
        if (opts.on_iteration) opts.on_iteration(fsc, iter);
    }

    // Pool hygiene: drop anything that coincides with a surviving node vector.
    {
        std::vector<OmegaPool::Entry> filtered;
        for (const auto& e : res.omega.entries()) {
            bool clash = false;
            for (const auto& v : fsc.values)
                if ((v - e.values).lpNorm<Eigen::Infinity>() <= 1e-9) {
                    clash = true;
                    break;
                }
            if (!clash) filtered.push_back(e);
        }
        OmegaPool cleaned;
        cleaned.cap = res.omega.cap;
        for (auto& e : filtered) cleaned.add_raw(std::move(e));
        res.omega = std::move(cleaned);
    }

    res.controller = std::move(fsc);
    return res;
}

}  // namespace capomdp
