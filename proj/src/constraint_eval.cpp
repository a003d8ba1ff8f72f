#include "capomdp/constraint_eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace capomdp {

namespace {

constexpr double kStdFloor = 1e-12;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Total variation distance between two univariate Gaussians, exact via the
// density crossing points.
double tv_distance(double m1, double s1, double m2, double s2) {
    s1 = std::max(s1, kStdFloor);
    s2 = std::max(s2, kStdFloor);
    if (std::abs(m1 - m2) < 1e-15 && std::abs(s1 - s2) < 1e-15) return 0.0;

    auto cdf1 = [&](double x) { return normal_cdf((x - m1) / s1); };
    auto cdf2 = [&](double x) { return normal_cdf((x - m2) / s2); };

    // log p1 - log p2 = a x^2 + b x + c
    double a = 0.5 * (1.0 / (s2 * s2) - 1.0 / (s1 * s1));
    double b = m1 / (s1 * s1) - m2 / (s2 * s2);
    double c = 0.5 * (m2 * m2 / (s2 * s2) - m1 * m1 / (s1 * s1)) + std::log(s2 / s1);

    std::vector<double> cross;
    if (std::abs(a) < 1e-300) {
        if (std::abs(b) > 1e-300) cross.push_back(-c / b);
    } else {
        double disc = b * b - 4 * a * c;
        if (disc > 0) {
            double r = std::sqrt(disc);
            cross.push_back((-b - r) / (2 * a));
            cross.push_back((-b + r) / (2 * a));
            if (cross[0] > cross[1]) std::swap(cross[0], cross[1]);
        }
    }

    // Integrate |p1 - p2| piecewise: the sign of (p1 - p2) is constant
    // between crossings, so each piece contributes |ΔF1 - ΔF2|.
    std::vector<double> bounds;
    bounds.push_back(-std::numeric_limits<double>::infinity());
    for (double x : cross) bounds.push_back(x);
    bounds.push_back(std::numeric_limits<double>::infinity());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        double lo = bounds[i], hi = bounds[i + 1];
        double f1 = (std::isinf(hi) ? 1.0 : cdf1(hi)) - (std::isinf(lo) ? 0.0 : cdf1(lo));
        double f2 = (std::isinf(hi) ? 1.0 : cdf2(hi)) - (std::isinf(lo) ? 0.0 : cdf2(lo));
        total += std::abs(f1 - f2);
    }
    return 0.5 * total;
}

struct GaussFit {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

GaussFit gaussian_fit(const std::vector<Eigen::VectorXd>& samples, std::size_t from) {
    const std::size_t n = samples.size() - from;
    const int H = static_cast<int>(samples.front().size());
    GaussFit fit;
    fit.mean = Eigen::VectorXd::Zero(H);
    fit.std = Eigen::VectorXd::Zero(H);
    for (std::size_t i = from; i < samples.size(); ++i) fit.mean += samples[i];
    fit.mean /= static_cast<double>(n);
    if (n > 1) {
        for (std::size_t i = from; i < samples.size(); ++i) {
            Eigen::VectorXd d = samples[i] - fit.mean;
            fit.std += d.cwiseProduct(d);
        }
        fit.std = (fit.std / static_cast<double>(n - 1)).cwiseSqrt();
    }
    return fit;
}

struct RestartOutcome {
    UtilizationPosterior posterior;
    int accepts = 0;
    int proposals = 0;
};

RestartOutcome run_chain(const FiniteStateController& fsc, const ConstraintSpec& spec,
                         const UtilizationModel& util, const Eigen::VectorXd& prior_mean,
                         const Eigen::VectorXd& prior_std, const ConstraintEvalOptions& opts,
                         std::uint64_t seed) {
    Rng rng(seed);
    Belief b0 = random_belief(static_cast<int>(fsc.values[0].size()), rng);
    int node = best_node(fsc, b0);

    RestartOutcome out;
    std::vector<Eigen::VectorXd> totals;
    totals.reserve(opts.burn_in + 256);
    bool have_current = false;
    UtilizationPosterior current;
    int steps = 0;
    for (int step = 0; step < opts.max_chain_steps; ++step) {
        totals.push_back(sample_trajectory(fsc, util, node, spec, rng));
        ++steps;
        if (static_cast<int>(totals.size()) < opts.burn_in + 2) continue;
        GaussFit fit = gaussian_fit(totals, opts.burn_in);
        UtilizationPosterior proposed;
        proposed.mean = fit.mean;
        proposed.std = fit.std;
        if (!have_current) {
            current = proposed;
            have_current = true;
            continue;
        }
        double d = 0.0;
        for (int h = 0; h < fit.mean.size(); ++h)
            d = std::max(d, tv_distance(current.mean[h], current.std[h], proposed.mean[h], proposed.std[h]));
        if (d <= opts.epsilon_d) {
            current = proposed;
            break;
        }
        ++out.proposals;
        if (metropolis_accept(proposed, current, prior_mean, prior_std, rng)) {
            current = proposed;
            ++out.accepts;
        }
    }
    current.chain_length = steps;
    out.posterior = current;
    return out;
}

}  // namespace

double normal_quantile(double p) {
    if (p <= 0.0) return -50.0;
    if (p >= 1.0) return 50.0;
    // Acklam's rational approximation, |relative error| < 1.15e-9
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

double ConstraintEvalResult::z_margin(const ConstraintSpec& spec) const {
    double margin = std::numeric_limits<double>::infinity();
    for (int h = 0; h < spec.num_resources(); ++h) {
        double s = std::max(posterior.std[h], 1e-9);
        double z = std::clamp((spec.rows[h].limit - posterior.mean[h]) / s, -50.0, 50.0);
        margin = std::min(margin, z - normal_quantile(spec.rows[h].eta));
    }
    return margin;
}

Eigen::VectorXd sample_trajectory(const FiniteStateController& fsc, const UtilizationModel& util,
                                  int start_node, const ConstraintSpec& spec, Rng& rng) {
    const int epochs = spec.epochs_per_horizon();
    const int H = util.num_resources();
    Eigen::VectorXd totals = Eigen::VectorXd::Zero(H);
    std::normal_distribution<double> unit;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int node = start_node;
    for (int t = 0; t < epochs; ++t) {
        const int a = fsc.nodes[node].action;
        for (int h = 0; h < H; ++h) {
            double draw = util.mean(h, a) + util.stddev(h, a) * unit(rng);
            totals[h] += std::max(0.0, draw);
        }
        // next node: observation from this node's edge distribution, then the
        // deterministic successor edge
        double u = u01(rng);
        int obs = fsc.num_observations() - 1;
        double acc = 0.0;
        for (int o = 0; o < fsc.num_observations(); ++o) {
            acc += fsc.edge_obs(node, o);
            if (u <= acc) {
                obs = o;
                break;
            }
        }
        node = fsc.nodes[node].successor[obs];
    }
    return totals;
}

double acceptance_ratio(const UtilizationPosterior& proposed, const UtilizationPosterior& current,
                        const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_std) {
    double log_a = 0.0;
    for (int h = 0; h < proposed.mean.size(); ++h) {
        double sp = std::max(proposed.std[h], kStdFloor);
        double sc = std::max(current.std[h], kStdFloor);
        double ps = std::max(prior_std[h], kStdFloor);
        // batch-mean likelihood at its own fit contributes 1/sigma
        log_a += std::log(sc) - std::log(sp);
        double zp = (proposed.mean[h] - prior_mean[h]) / ps;
        double zc = (current.mean[h] - prior_mean[h]) / ps;
        log_a += 0.5 * (zc * zc - zp * zp);
    }
    return std::exp(log_a);
}

bool accept_with_ratio(double ratio, Rng& rng) {
    if (ratio >= 1.0) return true;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    return u01(rng) < ratio;
}

bool metropolis_accept(const UtilizationPosterior& proposed, const UtilizationPosterior& current,
                       const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_std, Rng& rng) {
    return accept_with_ratio(acceptance_ratio(proposed, current, prior_mean, prior_std), rng);
}

Eigen::VectorXd deterministic_mean_walk(const FiniteStateController& fsc, const UtilizationModel& util,
                                        const ConstraintSpec& spec) {
    const int n = fsc.num_nodes();
    const int O = fsc.num_observations();
    const int H = util.num_resources();
    Eigen::MatrixXd hop = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < O; ++o) hop(i, fsc.nodes[i].successor[o]) += 1.0 / O;
    Eigen::VectorXd occupancy = Eigen::VectorXd::Constant(n, 1.0 / n);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(H);
    for (int t = 0; t < spec.epochs_per_horizon(); ++t) {
        for (int i = 0; i < n; ++i)
            for (int h = 0; h < H; ++h) mean[h] += occupancy[i] * util.mean(h, fsc.nodes[i].action);
        occupancy = hop.transpose() * occupancy;
    }
    return mean;
}

ConstraintEvalResult constraint_eval(const FiniteStateController& fsc, const ConstraintSpec& spec,
                                     const UtilizationModel& util, const ConstraintEvalOptions& opts) {
    if (fsc.values.empty() || fsc.values[0].size() == 0)
        throw ModelFormatError("constraint_eval requires an evaluated controller");
    spec.validate();
    const int H = util.num_resources();

    Eigen::VectorXd prior_mean = deterministic_mean_walk(fsc, util, spec);
    Eigen::VectorXd prior_std(H);
    for (int h = 0; h < H; ++h) prior_std[h] = std::max(0.5 * prior_mean[h], 1e-6);

    std::vector<UtilizationPosterior> restarts;
    long total_accepts = 0, total_proposals = 0, total_steps = 0;
    bool converged = false;

    auto restart_converged = [&](std::size_t m_count) {
        if (static_cast<int>(m_count) < std::max(opts.min_restarts, opts.lag + 3)) return false;
        // Lagged autocovariance of restart posterior means, standardized by
        // the pooled posterior std so epsilon_cov is scale-free.
        const int M = static_cast<int>(m_count);
        const int l = opts.lag;
        for (int h = 0; h < H; ++h) {
            double pooled_std = 0.0;
            double overall = 0.0;
            for (int m = 0; m < M; ++m) {
                overall += restarts[m].mean[h];
                pooled_std += restarts[m].std[h];
            }
            overall /= M;
            pooled_std = std::max(pooled_std / M, 1e-9);
            double cov = 0.0;
            for (int m = 0; m + l < M; ++m)
                cov += (restarts[m].mean[h] - overall) * (restarts[m + l].mean[h] - overall);
            cov /= (M - l) * pooled_std * pooled_std;
            if (std::abs(cov) >= opts.epsilon_cov) return false;
        }
        return true;
    };

    int next = 0;
    while (static_cast<int>(restarts.size()) < opts.max_restarts && !converged) {
        int wave = std::max(1, opts.parallel_restarts);
        wave = std::min(wave, opts.max_restarts - static_cast<int>(restarts.size()));
        std::vector<std::future<RestartOutcome>> futs;
        futs.reserve(wave);
        for (int w = 0; w < wave; ++w) {
            std::uint64_t seed = derive_seed(opts.seed, 0xc4a1ULL, static_cast<std::uint64_t>(next + w));
            futs.push_back(std::async(std::launch::async, [&, seed] {
                return run_chain(fsc, spec, util, prior_mean, prior_std, opts, seed);
            }));
        }
        for (auto& f : futs) {
            RestartOutcome out = f.get();
            total_accepts += out.accepts;
            total_proposals += out.proposals;
            total_steps += out.posterior.chain_length;
            restarts.push_back(std::move(out.posterior));
            if (!converged && restart_converged(restarts.size())) converged = true;
        }
        next += wave;
    }

    // Equal-weight moment pooling across restarts.
    const int M = static_cast<int>(restarts.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(H);
    for (const auto& r : restarts) {
        mean += r.mean;
        second += r.std.cwiseProduct(r.std) + r.mean.cwiseProduct(r.mean);
    }
    mean /= M;
    second /= M;

    ConstraintEvalResult result;
    result.converged = converged;
    result.posterior.mean = mean;
    result.posterior.std = (second - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    result.posterior.n_restarts = M;
    result.posterior.chain_length = static_cast<int>(total_steps / std::max(1, M));
    result.posterior.accept_rate =
        total_proposals > 0 ? static_cast<double>(total_accepts) / total_proposals : 1.0;
    result.satisfaction = Eigen::VectorXd::Zero(H);
    for (int h = 0; h < H; ++h) {
        double s = result.posterior.std[h];
        double c = spec.rows[h].limit;
        if (s < 1e-9)
            result.satisfaction[h] = c >= result.posterior.mean[h] ? 1.0 : 0.0;
        else
            result.satisfaction[h] = normal_cdf((c - result.posterior.mean[h]) / s);
    }
    return result;
}

}  // namespace capomdp
