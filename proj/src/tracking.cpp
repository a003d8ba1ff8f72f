#include "capomdp/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <future>

namespace capomdp {

double wrap_angle(double theta) {
    theta = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (theta <= 0.0) theta += 2.0 * M_PI;
    return theta - M_PI;
}

GroundTruth bicycle_predict(const GroundTruth& state, double v, double alpha, double dt, double wheelbase) {
    GroundTruth next = state;
    next.v = v;
    next.alpha = alpha;
    if (std::abs(alpha) < 1e-6) {
        next.x += v * dt * std::cos(state.theta);
        next.y += v * dt * std::sin(state.theta);
    } else {
        double radius = wheelbase / std::tan(alpha);
        double beta = v * dt / radius;
        next.x += radius * (std::sin(state.theta + beta) - std::sin(state.theta));
        next.y += radius * (std::cos(state.theta) - std::cos(state.theta + beta));
        next.theta = state.theta + beta;
    }
    next.theta = wrap_angle(next.theta);
    return next;
}

std::pair<double, double> measure(double x, double y, double theta, double px, double py) {
    double dx = x - px;
    double dy = y - py;
    double range = std::hypot(dx, dy);
    if (range < 1e-12) throw CoincidentPositions("drone and asset coincide");
    double bearing = wrap_angle(std::atan2(dy, dx) - theta);
    return {range, bearing};
}

double angular_mean(const std::vector<double>& angles, const std::vector<double>& weights) {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        s += weights[i] * std::sin(angles[i]);
        c += weights[i] * std::cos(angles[i]);
    }
    if (std::hypot(s, c) < 1e-12) throw DegenerateMean("angular resultant vanished");
    return std::atan2(s, c);
}

void UkfEstimate::validate() const {
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ModelFormatError("UKF covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(covariance);
    if (es.eigenvalues().minCoeff() < -1e-9) throw ModelFormatError("UKF covariance is not PSD");
}

namespace {

constexpr int kN = 3;

struct SigmaPoints {
    Eigen::Matrix<double, kN, 2 * kN + 1> points;
    Eigen::Matrix<double, 2 * kN + 1, 1> wm;
    Eigen::Matrix<double, 2 * kN + 1, 1> wc;
};

Eigen::Matrix3d symmetrize(const Eigen::Matrix3d& p) { return 0.5 * (p + p.transpose()); }

// Clamp negative eigenvalues; the last resort before declaring the filter lost.
bool repair_psd(Eigen::Matrix3d& p) {
    p = symmetrize(p);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(p);
    if (es.info() != Eigen::Success) return false;
    Eigen::Vector3d ev = es.eigenvalues().cwiseMax(1e-12);
    p = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    p = symmetrize(p);
    return p.allFinite();
}

SigmaPoints make_sigma_points(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov,
                              const UkfParams& params, bool& ok) {
    SigmaPoints sp;
    const double a2 = params.spread * params.spread;
    const double lambda = a2 * (kN + params.prior_weight) - kN;
    const double scale = kN + lambda;

    Eigen::Matrix3d p = symmetrize(cov);
    Eigen::LLT<Eigen::Matrix3d> llt((scale * p).eval());
    if (llt.info() != Eigen::Success) {
        Eigen::Matrix3d fixed = p;
        ok = repair_psd(fixed);
        llt.compute((scale * fixed).eval());
        if (!ok || llt.info() != Eigen::Success) {
            ok = false;
            return sp;
        }
    }
    ok = true;
    Eigen::Matrix3d root = llt.matrixL();

    sp.points.col(0) = mean;
    for (int i = 0; i < kN; ++i) {
        sp.points.col(1 + i) = mean + root.col(i);
        sp.points.col(1 + kN + i) = mean - root.col(i);
    }
    sp.wm.setConstant(1.0 / (2.0 * scale));
    sp.wc.setConstant(1.0 / (2.0 * scale));
    sp.wm(0) = lambda / scale;
    sp.wc(0) = lambda / scale + (1.0 - a2 + params.secondary);
    return sp;
}

double weighted_angle(const Eigen::Matrix<double, 2 * kN + 1, 1>& w,
                      const Eigen::Matrix<double, Eigen::Dynamic, 1>& angles, double fallback) {
    std::vector<double> av(angles.data(), angles.data() + angles.size());
    std::vector<double> wv(w.data(), w.data() + w.size());
    try {
        return angular_mean(av, wv);
    } catch (const DegenerateMean&) {
        return fallback;
    }
}

}  // namespace

UkfEstimate ukf_step(const UkfEstimate& est, double v, double alpha, double dt, double wheelbase,
                     const std::vector<RangeBearingMeasurement>& measurements) {
    UkfEstimate out = est;
    out.reset_flag = false;

    bool ok = true;
    SigmaPoints sp = make_sigma_points(est.mean, est.covariance, est.params, ok);
    if (!ok) {
        out.covariance = Eigen::Matrix3d::Identity() * 100.0;
        out.covariance(2, 2) = 1.0;
        out.reset_flag = true;
        sp = make_sigma_points(out.mean, out.covariance, est.params, ok);
    }

    // --- predict ---
    Eigen::Matrix<double, kN, 2 * kN + 1> prop;
    for (int i = 0; i < 2 * kN + 1; ++i) {
        GroundTruth g{sp.points(0, i), sp.points(1, i), sp.points(2, i), v, alpha};
        GroundTruth n = bicycle_predict(g, v, alpha, dt, wheelbase);
        prop.col(i) << n.x, n.y, n.theta;
    }
    Eigen::Vector3d pred_mean;
    pred_mean[0] = prop.row(0) * sp.wm;
    pred_mean[1] = prop.row(1) * sp.wm;
    pred_mean[2] = weighted_angle(sp.wm, prop.row(2).transpose(), prop(2, 0));

    Eigen::Matrix3d pred_cov = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 2 * kN + 1; ++i) {
        Eigen::Vector3d d = prop.col(i) - pred_mean;
        d[2] = wrap_angle(d[2]);
        pred_cov += sp.wc(i) * d * d.transpose();
    }
    pred_cov += est.process_noise;
    pred_cov = symmetrize(pred_cov);

    out.mean = pred_mean;
    out.mean[2] = wrap_angle(out.mean[2]);
    out.covariance = pred_cov;

    // --- update ---
    if (measurements.empty()) {
        // missing measurement: the prediction stands in for the observation,
        // so the state is carried forward and uncertainty keeps the process
        // noise it just gained
        if (!repair_psd(out.covariance)) {
            out.covariance = Eigen::Matrix3d::Identity() * 100.0;
            out.covariance(2, 2) = 1.0;
            out.reset_flag = true;
        }
        return out;
    }

    const int m = static_cast<int>(measurements.size());
    const int zdim = 2 * m;

    Eigen::MatrixXd gamma(zdim, 2 * kN + 1);
    for (int i = 0; i < 2 * kN + 1; ++i) {
        for (int j = 0; j < m; ++j) {
            auto [r, b] = measure(prop(0, i), prop(1, i), prop(2, i), measurements[j].px, measurements[j].py);
            gamma(2 * j, i) = r;
            gamma(2 * j + 1, i) = b;
        }
    }

    Eigen::VectorXd zhat(zdim);
    for (int j = 0; j < m; ++j) {
        zhat[2 * j] = gamma.row(2 * j) * sp.wm;
        zhat[2 * j + 1] = weighted_angle(sp.wm, gamma.row(2 * j + 1).transpose(), gamma(2 * j + 1, 0));
    }

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(zdim, zdim);
    Eigen::MatrixXd pxz = Eigen::MatrixXd::Zero(kN, zdim);
    for (int i = 0; i < 2 * kN + 1; ++i) {
        Eigen::VectorXd dz = gamma.col(i) - zhat;
        for (int j = 0; j < m; ++j) dz[2 * j + 1] = wrap_angle(dz[2 * j + 1]);
        Eigen::Vector3d dx = prop.col(i) - pred_mean;
        dx[2] = wrap_angle(dx[2]);
        S += sp.wc(i) * dz * dz.transpose();
        pxz += sp.wc(i) * dx * dz.transpose();
    }
    // Missing observation: a single drone cannot triangulate, so the bearing
    // noise is inflated to mimic the unobservable tangential direction.
    for (int j = 0; j < m; ++j) {
        double bearing_var = measurements[j].bearing_var;
        if (m == 1) bearing_var *= est.params.single_measurement_bearing_inflation;
        S(2 * j, 2 * j) += measurements[j].range_var;
        S(2 * j + 1, 2 * j + 1) += bearing_var;
    }

    Eigen::VectorXd z(zdim);
    for (int j = 0; j < m; ++j) {
        z[2 * j] = measurements[j].range;
        z[2 * j + 1] = measurements[j].bearing;
    }
    Eigen::VectorXd innovation = z - zhat;
    for (int j = 0; j < m; ++j) innovation[2 * j + 1] = wrap_angle(innovation[2 * j + 1]);

    Eigen::MatrixXd K = S.ldlt().solve(pxz.transpose()).transpose();
    out.mean = pred_mean + K * innovation;
    out.mean[2] = wrap_angle(out.mean[2]);
    out.covariance = symmetrize(pred_cov - K * S * K.transpose());

    if (!out.covariance.allFinite() || !repair_psd(out.covariance)) {
        out.mean = pred_mean;
        out.covariance = Eigen::Matrix3d::Identity() * 100.0;
        out.covariance(2, 2) = 1.0;
        out.reset_flag = true;
    }
    return out;
}

Eigen::VectorXd ukf_predicted_measurement(const UkfEstimate& est, double v, double alpha, double dt,
                                          double wheelbase,
                                          const std::vector<Eigen::Vector2d>& drone_positions) {
    bool ok = true;
    SigmaPoints sp = make_sigma_points(est.mean, est.covariance, est.params, ok);
    Eigen::Matrix<double, kN, 2 * kN + 1> prop;
    for (int i = 0; i < 2 * kN + 1; ++i) {
        GroundTruth g{sp.points(0, i), sp.points(1, i), sp.points(2, i), v, alpha};
        GroundTruth n = bicycle_predict(g, v, alpha, dt, wheelbase);
        prop.col(i) << n.x, n.y, n.theta;
    }
    const int m = static_cast<int>(drone_positions.size());
    Eigen::VectorXd zhat(2 * m);
    Eigen::MatrixXd gamma(2 * m, 2 * kN + 1);
    for (int i = 0; i < 2 * kN + 1; ++i)
        for (int j = 0; j < m; ++j) {
            auto [r, b] =
                measure(prop(0, i), prop(1, i), prop(2, i), drone_positions[j].x(), drone_positions[j].y());
            gamma(2 * j, i) = r;
            gamma(2 * j + 1, i) = b;
        }
    for (int j = 0; j < m; ++j) {
        zhat[2 * j] = gamma.row(2 * j) * sp.wm;
        zhat[2 * j + 1] = weighted_angle(sp.wm, gamma.row(2 * j + 1).transpose(), gamma(2 * j + 1, 0));
    }
    return zhat;
}

namespace {

double run_lambda_trial(const LambdaCalibrationConfig& cfg, double lambda, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> unit;
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    GroundTruth truth{0.0, -15.0, 0.0, 2.0, 0.12};
    UkfEstimate est;
    est.mean << truth.x + 2.0, truth.y - 2.0, truth.theta;
    est.covariance = Eigen::Matrix3d::Identity() * 25.0;
    est.covariance(2, 2) = 0.25;
    est.process_noise = cfg.process_noise;

    for (int t = 0; t < cfg.steps; ++t) {
        truth = bicycle_predict(truth, truth.v, truth.alpha, cfg.dt, cfg.wheelbase);
        std::vector<RangeBearingMeasurement> ms;
        if (u01(rng) < lambda) {
            for (const auto& d : cfg.drones) {
                auto [r, b] = measure(truth.x, truth.y, truth.theta, d.x(), d.y());
                RangeBearingMeasurement meas;
                meas.range = std::max(0.0, r + std::sqrt(cfg.range_var) * unit(rng));
                meas.bearing = wrap_angle(b + std::sqrt(cfg.bearing_var) * unit(rng));
                meas.range_var = cfg.range_var;
                meas.bearing_var = cfg.bearing_var;
                meas.px = d.x();
                meas.py = d.y();
                ms.push_back(meas);
            }
        }
        est = ukf_step(est, truth.v, truth.alpha, cfg.dt, cfg.wheelbase, ms);
    }
    return est.covariance.norm();
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double idx = q * (v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = idx - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

std::vector<double> lambda_trial_norms(const LambdaCalibrationConfig& cfg, double lambda) {
    std::vector<double> norms(cfg.trials);
    int batch = std::max(1, cfg.parallel);
    for (int t0 = 0; t0 < cfg.trials; t0 += batch) {
        std::vector<std::future<double>> futs;
        for (int t = t0; t < std::min(cfg.trials, t0 + batch); ++t) {
            std::uint64_t seed = derive_seed(cfg.seed, 0x7a0ULL, static_cast<std::uint64_t>(
                                                                     t * 10007 + std::llround(lambda * 1000)));
            futs.push_back(std::async(std::launch::async,
                                      [&cfg, lambda, seed] { return run_lambda_trial(cfg, lambda, seed); }));
        }
        for (std::size_t i = 0; i < futs.size(); ++i) norms[t0 + i] = futs[i].get();
    }
    return norms;
}

LambdaCalibrationReport calibrate_lambda(const LambdaCalibrationConfig& cfg) {
    LambdaCalibrationReport report;
    for (double lam = 0.0; lam <= 1.0 + 1e-12; lam += cfg.grid_step) report.grid.push_back(std::min(lam, 1.0));

    for (double lam : report.grid) {
        std::vector<double> norms = lambda_trial_norms(cfg, lam);
        report.median_norm.push_back(percentile(norms, 0.5));
        report.p95_norm.push_back(percentile(norms, 0.95));
    }

    report.steady_state = report.median_norm.back();  // grid ends at lambda = 1
    report.threshold = cfg.divergence_factor * report.steady_state;

    int lower_idx = -1;
    for (std::size_t i = 0; i < report.grid.size(); ++i)
        if (report.median_norm[i] > report.threshold) lower_idx = static_cast<int>(i);
    if (lower_idx < 0) throw NoTransitionFound("no grid point diverges; threshold too high or noise too low");

    int upper_idx = -1;
    for (std::size_t i = lower_idx + 1; i < report.grid.size(); ++i)
        if (report.p95_norm[i] <= report.threshold) {
            upper_idx = static_cast<int>(i);
            break;
        }
    if (upper_idx < 0) throw NoTransitionFound("filter never settles below the divergence threshold");

    report.bounds.lower = std::clamp(report.grid[lower_idx], cfg.grid_step / 2.0, 1.0 - cfg.grid_step / 2.0);
    report.bounds.upper = std::clamp(report.grid[upper_idx], report.bounds.lower, 1.0 - cfg.grid_step / 2.0);
    return report;
}

}  // namespace capomdp
