#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "capomdp/common.hpp"

namespace capomdp {

double wrap_angle(double theta);  // into (-pi, pi]

/// Ground vehicle pose plus its control input.
struct GroundTruth {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // wrapped after every update
    double v = 0.0;      // m/s
    double alpha = 0.0;  // steering angle, rad
};

/// Bicycle model with a static rear wheel: straight-line form below the
/// steering deadband, arc form otherwise.
GroundTruth bicycle_predict(const GroundTruth& state, double v, double alpha, double dt, double wheelbase);

struct RangeBearingMeasurement {
    double range = 0.0;
    double bearing = 0.0;
    double range_var = 1.0;
    double bearing_var = 0.01;
    double px = 0.0;  // sensing drone position
    double py = 0.0;
    bool line_of_sight = true;
};

/// range and bearing of the asset seen from the drone; bearing is relative
/// to the asset heading (atan2(y-py, x-px) - theta, wrapped).
/// Throws CoincidentPositions when drone and asset coincide.
std::pair<double, double> measure(double x, double y, double theta, double px, double py);

/// Weighted circular mean via atan2 of the weighted resultant. Throws
/// DegenerateMean when the resultant norm vanishes.
double angular_mean(const std::vector<double>& angles, const std::vector<double>& weights);

struct UkfParams {
    double spread = 1e-3;        // sigma-point spread (alpha)
    double secondary = 2.0;      // distribution parameter (beta)
    double prior_weight = 0.0;   // kappa
    double single_measurement_bearing_inflation = 25.0;
};

struct UkfEstimate {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();          // x, y, theta
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d process_noise = Eigen::Matrix3d::Identity() * 1e-3;
    UkfParams params;
    bool reset_flag = false;  // set when the covariance had to be rebuilt

    void validate() const;
};

/// One predict(+update) cycle. With an empty measurement list the prediction
/// is carried forward (covariance grows by process noise); with a single
/// measurement the bearing noise is inflated to stand in for the missing
/// triangulation geometry; otherwise a standard UKF update over the stacked
/// measurement vector.
UkfEstimate ukf_step(const UkfEstimate& est, double v, double alpha, double dt, double wheelbase,
                     const std::vector<RangeBearingMeasurement>& measurements);

/// The sigma-weighted predicted measurement (range, bearing per drone) the
/// next ukf_step would compare against; feeding it back yields a zero
/// innovation.
Eigen::VectorXd ukf_predicted_measurement(const UkfEstimate& est, double v, double alpha, double dt,
                                          double wheelbase,
                                          const std::vector<Eigen::Vector2d>& drone_positions);

struct LambdaBounds {
    double lower = 0.0;
    double upper = 0.0;
    double sigmoid_k = 12.0;
    double center() const { return 0.5 * (lower + upper); }
};

struct LambdaCalibrationConfig {
    double grid_step = 0.05;
    int trials = 30;
    int steps = 500;
    double divergence_factor = 100.0;  // threshold = factor * full-observation steady state
    double dt = 0.1;
    double wheelbase = 1.0;
    std::uint64_t seed = 0;
    int parallel = 4;
    // fixed observation points
    std::vector<Eigen::Vector2d> drones = {Eigen::Vector2d(-30.0, 0.0), Eigen::Vector2d(30.0, 0.0)};
    double range_var = 1.0;
    double bearing_var = 0.01;
    Eigen::Matrix3d process_noise = (Eigen::Matrix3d() << 0.02, 0, 0, 0, 0.02, 0, 0, 0, 0.005).finished();
};

struct LambdaCalibrationReport {
    LambdaBounds bounds;
    std::vector<double> grid;
    std::vector<double> median_norm;
    std::vector<double> p95_norm;
    double threshold = 0.0;
    double steady_state = 0.0;
};

/// Sweeps Bernoulli arrival probabilities on a fixed-observation-point
/// scenario and brackets the divergence transition of the filter covariance.
/// Throws NoTransitionFound when the grid never diverges or never settles.
LambdaCalibrationReport calibrate_lambda(const LambdaCalibrationConfig& cfg);

/// Final covariance norms of `cfg.trials` runs at one arrival probability;
/// the building block of the sweep, exposed for bracket re-checks.
std::vector<double> lambda_trial_norms(const LambdaCalibrationConfig& cfg, double lambda);

}  // namespace capomdp
