#include "fairrep/bounds.hpp"

#include <cmath>

#include "fairrep/rng.hpp"
#include "fairrep/solver.hpp"

namespace fairrep {

namespace {

void check_inputs(const BoundInputs& in) {
    if (!(in.lambda > 0.0) || in.m < 1.0 || in.T < 1.0 || in.r < 1.0 ||
        !(in.delta > 0.0 && in.delta < 1.0) || in.C_hat_norm < 0.0 || in.Sigma_hat_norm < 0.0)
        throw InputError(errc::invalid_inputs, "bound inputs out of range");
}

} // namespace

Eigen::MatrixXd empirical_total_covariance(const TaskCollection& collection) {
    collection.validate();
    const int d = collection.dim();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
    double n = 0.0;
    for (const auto& task : collection.tasks) {
        C += task.features.transpose() * task.features;
        n += static_cast<double>(task.rows());
    }
    return C / n;
}

Eigen::MatrixXd mean_gap_covariance(const TaskCollection& collection) {
    const Eigen::MatrixXd gaps = collect_gaps(collection);
    return gaps * gaps.transpose() / static_cast<double>(gaps.cols());
}

double spectral_norm(const Eigen::MatrixXd& psd, double tol, int max_iters, std::uint64_t seed) {
    if (psd.rows() != psd.cols())
        throw InputError(errc::dimension_mismatch, "matrix must be square");
    if (psd.size() == 0 || psd.isZero(0.0)) return 0.0;

    auto rng = make_rng(seed, 3);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd x(psd.rows());
    for (int i = 0; i < x.size(); ++i) x[i] = normal(rng);
    x.normalize();

    double estimate = x.dot(psd * x);
    for (int iter = 0; iter < max_iters; ++iter) {
        Eigen::VectorXd next = psd * x;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        x = next / norm;
        const double refreshed = x.dot(psd * x);
        if (std::abs(refreshed - estimate) <= tol * std::abs(refreshed)) return refreshed;
        estimate = refreshed;
    }
    throw NumericalError(errc::no_convergence, "power iteration did not stabilize");
}

RiskBoundReport risk_gap_bound(const BoundInputs& in) {
    check_inputs(in);
    RiskBoundReport report;
    report.representation_term = (4.0 / in.lambda) * std::sqrt(in.C_hat_norm / in.m);
    report.task_term =
        (24.0 / (in.lambda * in.m)) * std::sqrt(std::log(8.0 * in.m * in.T / in.delta) / in.T);
    report.covariance_term =
        (14.0 / in.lambda) * std::sqrt(std::log(in.m * in.T) * in.C_hat_norm / in.T);
    report.confidence_term = std::sqrt(2.0 * std::log(4.0 / in.delta) / in.T);
    report.total = report.representation_term + report.task_term + report.covariance_term +
                   report.confidence_term;
    return report;
}

FairnessBoundReport fairness_gap_bound(const BoundInputs& in) {
    check_inputs(in);
    const double L = std::log(8.0 * in.r * in.r / in.delta);
    FairnessBoundReport report;
    report.fast_term = 96.0 * L / in.T;
    report.slow_term = 6.0 * std::sqrt(in.Sigma_hat_norm * L / in.T);
    report.total = report.fast_term + report.slow_term;
    return report;
}

ConcentrationHelpers concentration_helpers(double sum_norm, double effective_dim, double delta) {
    if (sum_norm < 0.0 || effective_dim < 1.0 || !(delta > 0.0 && delta < 1.0))
        throw InputError(errc::invalid_inputs, "concentration inputs out of range");
    const double k2 = effective_dim * effective_dim;
    ConcentrationHelpers out;
    out.upper_mean_norm = std::sqrt(sum_norm) + 6.0 * std::sqrt(std::log(4.0 * k2 / delta));
    const double L = std::log(8.0 * k2 / delta);
    out.deviation_bound = 3.0 * std::sqrt(sum_norm * L) + 24.0 * L;
    return out;
}

} // namespace fairrep
