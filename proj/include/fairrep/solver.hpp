#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairrep/dataset.hpp"

namespace fairrep {

// How the representation handles the group mean-gap directions.
//   none:    unconstrained baseline
//   hard:    A^T c_t = 0 enforced exactly via a null-space change of variables
//   soft:    smallest quadratic penalty whose solution satisfies
//            (1/T) sum_t ||A^T c_t||^2 <= epsilon
//   penalty: fixed penalty weight gamma on that same average
struct ConstraintMode {
    enum class Kind { none, hard, soft, penalty };
    Kind kind = Kind::none;
    double epsilon = 0.0; // soft
    double gamma = 0.0;   // penalty

    static ConstraintMode none() { return {}; }
    static ConstraintMode hard() { return {Kind::hard, 0.0, 0.0}; }
    static ConstraintMode soft(double epsilon) { return {Kind::soft, epsilon, 0.0}; }
    static ConstraintMode penalty(double gamma) { return {Kind::penalty, 0.0, gamma}; }
    std::string label() const;
};

struct SolverConfig {
    double lambda = 1.0;
    int r = 1;
    ConstraintMode mode;
    int max_outer_iters = 500;
    double rel_tol = 1e-7;
    std::uint64_t seed = 0;
};

struct FitResult {
    Eigen::MatrixXd A; // d x r
    Eigen::MatrixXd B; // r x T
    std::vector<double> objective_trace; // after init, then after every half step
    bool converged = false;
    std::vector<double> constraint_residuals; // ||A^T c_t|| per task
    double max_constraint_residual = 0.0;
    SolverConfig config;
};

// (1/(T m_t)) sum_t ||y_t - X_t A b_t||^2 + (lambda/2)(||A||_F^2 + ||B||_F^2)
double objective(const TaskCollection& collection, const Eigen::MatrixXd& A,
                 const Eigen::MatrixXd& B, double lambda);

// objective plus the penalty term in penalty mode; this is the quantity the
// alternating steps decrease and the trace records.
double mode_objective(const TaskCollection& collection, const Eigen::MatrixXd& A,
                      const Eigen::MatrixXd& B, double lambda, const ConstraintMode& mode);

// Exact minimizers of the two blocks. a_step additionally reports the penalty
// weight it ended up using (soft mode picks one by bisection; 0 otherwise).
Eigen::MatrixXd b_step(const TaskCollection& collection, const Eigen::MatrixXd& A, double lambda);
Eigen::MatrixXd a_step(const TaskCollection& collection, const Eigen::MatrixXd& B, double lambda,
                       const ConstraintMode& mode, double* gamma_used = nullptr);

FitResult fit(const TaskCollection& collection, const SolverConfig& config);

// Single-task ridge; constrain_gap additionally forces w^T c = 0.
Eigen::VectorXd fit_stl(const TaskDataset& task, double lambda, bool constrain_gap);

// Per-task output constraint <A b_t, c_t> = 0 instead of the shared A^T c_t = 0.
FitResult fit_m1_output_constrained(const TaskCollection& collection, const SolverConfig& config);

// Rescale so ||A||_F = 1 (the bound statements assume this normalization).
Eigen::MatrixXd renormalize(const Eigen::MatrixXd& A);

// Orthonormal basis of the orthogonal complement of the given columns' span.
// Singular values below 1e-10 times the largest are treated as zero.
Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& directions, int ambient_dim);

Eigen::MatrixXd collect_gaps(const TaskCollection& collection); // d x T, columns c_t

} // namespace fairrep
