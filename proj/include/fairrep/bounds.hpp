#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fairrep/dataset.hpp"

namespace fairrep {

struct BoundInputs {
    double lambda = 1.0;
    double m = 0;      // per-task sample count
    double T = 0;      // number of tasks
    double r = 0;      // min(d, T), effective dimension in the fairness bound
    double delta = 0.05;
    double C_hat_norm = 0.0;     // ||C_hat||_inf, spectral norm
    double Sigma_hat_norm = 0.0; // ||Sigma_hat||_inf
};

struct RiskBoundReport {
    double representation_term = 0.0; // (4/lambda) sqrt(||C_hat|| / m)
    double task_term = 0.0;           // (24/(lambda m)) sqrt(ln(8mT/delta) / T)
    double covariance_term = 0.0;     // (14/lambda) sqrt(ln(mT) ||C_hat|| / T)
    double confidence_term = 0.0;     // sqrt(2 ln(4/delta) / T)
    double total = 0.0;
};

struct FairnessBoundReport {
    double fast_term = 0.0; // 96 ln(8 r^2/delta) / T
    double slow_term = 0.0; // 6 sqrt(||Sigma_hat|| ln(8 r^2/delta) / T)
    double total = 0.0;
};

// (1 / sum_t m_t) sum_t sum_i x x^T over every row of every task.
Eigen::MatrixXd empirical_total_covariance(const TaskCollection& collection);

// (1/T) sum_t c_t c_t^T.
Eigen::MatrixXd mean_gap_covariance(const TaskCollection& collection);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double spectral_norm(const Eigen::MatrixXd& psd, double tol = 1e-9, int max_iters = 10000,
                     std::uint64_t seed = 0);

RiskBoundReport risk_gap_bound(const BoundInputs& in);
FairnessBoundReport fairness_gap_bound(const BoundInputs& in);

// Concentration helpers for sums of rank-one operators with norms <= 1:
//   upper_mean_norm bounds sqrt(n ||mean||) via sqrt(||sum||) + 6 sqrt(ln(4 k^2/delta)),
//   deviation_bound bounds ||sum - E sum|| via 3 sqrt(||sum|| L) + 24 L with
//   L = ln(8 k^2/delta).
struct ConcentrationHelpers {
    double upper_mean_norm = 0.0;
    double deviation_bound = 0.0;
};

ConcentrationHelpers concentration_helpers(double sum_norm, double effective_dim, double delta);

} // namespace fairrep
