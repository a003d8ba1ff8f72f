#include "capomdp/adaptation.hpp"

#include <cmath>

namespace capomdp {

namespace {
double xlogx(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }
}

EdgePosterior::EdgePosterior(int n_actions, int n_observations, double pseudo_count)
    : pseudo_(Eigen::MatrixXd::Constant(n_actions, n_observations, pseudo_count)),
      counts_(Eigen::MatrixXd::Zero(n_actions, n_observations)) {
    if (pseudo_count <= 0.0) throw ModelFormatError("Dirichlet pseudo-counts must be positive");
}

EdgePosterior::EdgePosterior(Eigen::MatrixXd pseudo)
    : pseudo_(std::move(pseudo)), counts_(Eigen::MatrixXd::Zero(pseudo_.rows(), pseudo_.cols())) {
    if (pseudo_.minCoeff() <= 0.0) throw ModelFormatError("Dirichlet pseudo-counts must be positive");
}

void EdgePosterior::observe(int action, int observation) { counts_(action, observation) += 1.0; }

double EdgePosterior::probability(int action, int observation) const {
    double num = counts_(action, observation) + pseudo_(action, observation);
    double den = (counts_.row(action) + pseudo_.row(action)).sum();
    return num / den;
}

Eigen::VectorXd EdgePosterior::row(int action) const {
    Eigen::VectorXd r = (counts_.row(action) + pseudo_.row(action)).transpose();
    return r / r.sum();
}

Eigen::VectorXd EdgePosterior::prior_row(int action) const {
    Eigen::VectorXd r = pseudo_.row(action).transpose();
    return r / r.sum();
}

Eigen::MatrixXd EdgePosterior::matrix() const {
    Eigen::MatrixXd m(num_actions(), num_observations());
    for (int a = 0; a < num_actions(); ++a) m.row(a) = row(a).transpose();
    return m;
}

EdgePosterior update_edge(EdgePosterior posterior, int action, int observation) {
    if (action < 0 || action >= posterior.num_actions() || observation < 0 ||
        observation >= posterior.num_observations())
        throw ModelFormatError("update_edge index out of range");
    posterior.observe(action, observation);
    return posterior;
}

UtilizationEstimator::UtilizationEstimator(int n_resources, int n_actions)
    : prior_mean_(Eigen::MatrixXd::Zero(n_resources, n_actions)),
      prior_std_(Eigen::MatrixXd::Ones(n_resources, n_actions)),
      sum_(Eigen::MatrixXd::Zero(n_resources, n_actions)),
      counts_(Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_resources, n_actions)) {}

void UtilizationEstimator::set_prior(int resource, int action, double mean, double stddev) {
    if (!(stddev > 0.0)) throw ModelFormatError("utilization prior std must be positive");
    prior_mean_(resource, action) = mean;
    prior_std_(resource, action) = stddev;
}

void UtilizationEstimator::observe(int resource, int action, double measured) {
    if (measured < 0.0) throw NegativeMeasurement("measured utilization must be nonnegative");
    sum_(resource, action) += measured;
    counts_(resource, action) += 1;
}

// Known observation variance = prior variance, so precisions add one prior
// unit per observation: mean = (mu0 + sum x) / (1 + n).
double UtilizationEstimator::posterior_mean(int resource, int action) const {
    long n = counts_(resource, action);
    return (prior_mean_(resource, action) + sum_(resource, action)) / (1.0 + n);
}

double UtilizationEstimator::posterior_std(int resource, int action) const {
    long n = counts_(resource, action);
    return prior_std_(resource, action) / std::sqrt(1.0 + n);
}

UtilizationEstimator update_utilization(UtilizationEstimator est, int resource, int action, double measured) {
    est.observe(resource, action, measured);
    return est;
}

double variation_of_information(const Eigen::MatrixXd& joint) {
    double total = joint.sum();
    if (std::abs(total - 1.0) > 1e-9 || joint.minCoeff() < -1e-15)
        throw InvalidDistribution("joint distribution must be nonnegative and sum to 1, got sum " +
                                  std::to_string(total));
    double h_joint = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) h_joint -= xlogx(joint(i, j));
    double h_x = 0.0, h_y = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) h_x -= xlogx(joint.row(i).sum());
    for (Eigen::Index j = 0; j < joint.cols(); ++j) h_y -= xlogx(joint.col(j).sum());
    // H(X|Y) + H(Y|X) = 2 H(X,Y) - H(X) - H(Y)
    return std::max(0.0, 2.0 * h_joint - h_x - h_y);
}

Eigen::MatrixXd overlap_coupling(const Eigen::VectorXd& prior, const Eigen::VectorXd& learned) {
    const int n = static_cast<int>(prior.size());
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(n, n);
    double diag_mass = 0.0;
    for (int k = 0; k < n; ++k) {
        joint(k, k) = std::min(prior[k], learned[k]);
        diag_mass += joint(k, k);
    }
    double residual = 1.0 - diag_mass;
    if (n > 1 && residual > 0.0) {
        double per_cell = residual / (static_cast<double>(n) * n - n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) joint(i, j) = per_cell;
    } else if (n == 1) {
        joint(0, 0) = 1.0;
    }
    return joint;
}

double distribution_drift_bits(const Eigen::VectorXd& prior, const Eigen::VectorXd& learned) {
    return variation_of_information(overlap_coupling(prior, learned));
}

double gaussian_drift_bits(double prior_mean, double prior_std, double learned_mean, double learned_std,
                           int bins) {
    const double lo = prior_mean - 4.0 * prior_std;
    const double hi = prior_mean + 4.0 * prior_std;
    const double width = (hi - lo) / bins;
    auto discretize = [&](double m, double s) {
        Eigen::VectorXd p(bins);
        auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - m) / (s * std::sqrt(2.0))); };
        for (int i = 0; i < bins; ++i) {
            double a = lo + i * width;
            double b = i + 1 == bins ? hi : a + width;
            p[i] = cdf(b) - cdf(a);
        }
        double total = p.sum();
        if (total <= 0.0) {
            // everything out of window; give the nearest edge bin full mass
            p.setZero();
            p[m < lo ? 0 : bins - 1] = 1.0;
            return p;
        }
        return Eigen::VectorXd(p / total);
    };
    return distribution_drift_bits(discretize(prior_mean, std::max(prior_std, 1e-12)),
                                   discretize(learned_mean, std::max(learned_std, 1e-12)));
}

RecomputeTrigger should_recompute(const EdgePosterior& edges, const UtilizationEstimator& util,
                                  double threshold) {
    RecomputeTrigger trig;
    for (int a = 0; a < edges.num_actions(); ++a)
        trig.voi_edges = std::max(trig.voi_edges, distribution_drift_bits(edges.prior_row(a), edges.row(a)));
    for (int h = 0; h < util.num_resources(); ++h)
        for (int a = 0; a < util.num_actions(); ++a) {
            if (util.observation_count(h, a) == 0) continue;
            trig.voi_utilization = std::max(
                trig.voi_utilization,
                gaussian_drift_bits(util.prior_mean(h, a), util.prior_std(h, a), util.posterior_mean(h, a),
                                    util.posterior_std(h, a)));
        }
    trig.recompute = trig.voi_edges > threshold || trig.voi_utilization > threshold;
    return trig;
}

}  // namespace capomdp
