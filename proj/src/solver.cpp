#include "fairrep/solver.hpp"

#include <algorithm>
#include <cmath>

#include "fairrep/metrics.hpp"
#include "fairrep/rng.hpp"

namespace fairrep {

namespace {

constexpr double kRankCutoff = 1e-10;
constexpr double kSoftGammaMax = 1e8;
constexpr int kSoftBisectionIters = 60;

struct TaskBlocks {
    Eigen::MatrixXd XtX; // d x d
    Eigen::VectorXd Xty; // d
    double weight;       // 2 / (T m_t)
};

std::vector<TaskBlocks> task_blocks(const TaskCollection& collection) {
    const double T = static_cast<double>(collection.tasks.size());
    std::vector<TaskBlocks> blocks;
    blocks.reserve(collection.tasks.size());
    for (const auto& task : collection.tasks) {
        TaskBlocks b;
        b.XtX = task.features.transpose() * task.features;
        b.Xty = task.features.transpose() * task.outputs;
        b.weight = 2.0 / (T * static_cast<double>(task.rows()));
        blocks.push_back(std::move(b));
    }
    return blocks;
}

void check_shapes(const TaskCollection& collection, const Eigen::MatrixXd& A,
                  const Eigen::MatrixXd& B) {
    collection.validate();
    if (A.rows() != collection.dim() || B.rows() != A.cols() ||
        B.cols() != static_cast<int>(collection.tasks.size()))
        throw InputError(errc::dimension_mismatch, "A/B shapes do not match the collection");
}

// (1/T) sum_t ||A^T c_t||^2 = tr(A^T Sigma_hat A).
double mean_sq_gap_residual(const Eigen::MatrixXd& Sigma_hat, const Eigen::MatrixXd& A) {
    return (A.transpose() * Sigma_hat * A).trace();
}

Eigen::MatrixXd gap_covariance(const Eigen::MatrixXd& gaps) {
    if (gaps.cols() == 0) return Eigen::MatrixXd::Zero(gaps.rows(), gaps.rows());
    return gaps * gaps.transpose() / static_cast<double>(gaps.cols());
}

// Minimizes sum_t w_t/2 ||y_t - X_t N Atil b_t||^2-style quadratic in
// vec(Atil): H = sum_t w_t (b_t b_t^T) kron (N^T X^T X N) + lambda I + gamma P.
struct AStepSystem {
    Eigen::MatrixXd H0;
    Eigen::MatrixXd penalty; // 2 (I_r kron N^T Sigma_hat N); empty when unused
    Eigen::VectorXd g;
    int q = 0;
    int r = 0;

    Eigen::MatrixXd solve(double gamma) const {
        Eigen::MatrixXd H = H0;
        if (gamma != 0.0) H += gamma * penalty;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError(errc::singular_system, "representation update system failed");
        Eigen::VectorXd a = ldlt.solve(g);
        return Eigen::Map<const Eigen::MatrixXd>(a.data(), q, r);
    }
};

AStepSystem build_a_step(const std::vector<TaskBlocks>& blocks, const Eigen::MatrixXd& B,
                         double lambda, const Eigen::MatrixXd& N,
                         const Eigen::MatrixXd* Sigma_hat) {
    AStepSystem sys;
    sys.q = static_cast<int>(N.cols());
    sys.r = static_cast<int>(B.rows());
    const int n = sys.q * sys.r;
    sys.H0 = lambda * Eigen::MatrixXd::Identity(n, n);
    sys.g = Eigen::VectorXd::Zero(n);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const Eigen::MatrixXd M = N.transpose() * blocks[t].XtX * N;
        const Eigen::VectorXd h = N.transpose() * blocks[t].Xty;
        const Eigen::VectorXd b = B.col(static_cast<int>(t));
        const double w = blocks[t].weight;
        for (int j = 0; j < sys.r; ++j) {
            sys.g.segment(j * sys.q, sys.q) += (w * b[j]) * h;
            for (int i = 0; i < sys.r; ++i)
                sys.H0.block(i * sys.q, j * sys.q, sys.q, sys.q) += (w * b[i] * b[j]) * M;
        }
    }
    if (Sigma_hat) {
        const Eigen::MatrixXd S = 2.0 * (N.transpose() * (*Sigma_hat) * N);
        sys.penalty = Eigen::MatrixXd::Zero(n, n);
        for (int j = 0; j < sys.r; ++j) sys.penalty.block(j * sys.q, j * sys.q, sys.q, sys.q) = S;
    }
    return sys;
}

Eigen::MatrixXd random_orthonormal(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd G(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) G(i, j) = normal(rng);
    const int k = std::min(rows, cols);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G.leftCols(k));
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, k);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    out.leftCols(k) = Q;
    return out;
}

void check_config(const SolverConfig& config) {
    if (!(config.lambda > 0.0)) throw InputError(errc::invalid_spec, "lambda must be positive");
    if (config.r < 1) throw InputError(errc::invalid_spec, "r must be at least 1");
    if (!(config.rel_tol > 0.0)) throw InputError(errc::invalid_spec, "rel_tol must be positive");
    if (config.max_outer_iters < 1)
        throw InputError(errc::invalid_spec, "max_outer_iters must be at least 1");
    if (config.mode.epsilon < 0.0 || config.mode.gamma < 0.0)
        throw InputError(errc::invalid_spec, "constraint parameters must be nonnegative");
}

} // namespace

std::string ConstraintMode::label() const {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::hard: return "hard";
        case Kind::soft: {
            char buffer[48];
            std::snprintf(buffer, sizeof(buffer), "soft(%g)", epsilon);
            return buffer;
        }
        case Kind::penalty: {
            char buffer[48];
            std::snprintf(buffer, sizeof(buffer), "penalty(%g)", gamma);
            return buffer;
        }
    }
    return "none";
}

double objective(const TaskCollection& collection, const Eigen::MatrixXd& A,
                 const Eigen::MatrixXd& B, double lambda) {
    check_shapes(collection, A, B);
    const double T = static_cast<double>(collection.tasks.size());
    double loss = 0.0;
    for (std::size_t t = 0; t < collection.tasks.size(); ++t) {
        const auto& task = collection.tasks[t];
        const Eigen::VectorXd residual = task.outputs - task.features * (A * B.col(static_cast<int>(t)));
        loss += residual.squaredNorm() / (T * static_cast<double>(task.rows()));
    }
    return loss + 0.5 * lambda * (A.squaredNorm() + B.squaredNorm());
}

double mode_objective(const TaskCollection& collection, const Eigen::MatrixXd& A,
                      const Eigen::MatrixXd& B, double lambda, const ConstraintMode& mode) {
    double value = objective(collection, A, B, lambda);
    if (mode.kind == ConstraintMode::Kind::penalty && mode.gamma != 0.0) {
        const Eigen::MatrixXd gaps = collect_gaps(collection);
        value += mode.gamma * mean_sq_gap_residual(gap_covariance(gaps), A);
    }
    return value;
}

Eigen::MatrixXd collect_gaps(const TaskCollection& collection) {
    collection.validate();
    Eigen::MatrixXd gaps(collection.dim(), collection.tasks.size());
    for (std::size_t t = 0; t < collection.tasks.size(); ++t)
        gaps.col(static_cast<int>(t)) = group_mean_gap(collection.tasks[t]).c;
    return gaps;
}

Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& directions, int ambient_dim) {
    if (directions.size() == 0 || directions.isZero(0.0))
        return Eigen::MatrixXd::Identity(ambient_dim, ambient_dim);
    if (directions.rows() != ambient_dim)
        throw InputError(errc::dimension_mismatch, "constraint directions do not match dimension");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(directions, Eigen::ComputeFullU);
    const auto& sigma = svd.singularValues();
    const double cutoff = kRankCutoff * sigma[0];
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > cutoff) ++rank;
    return svd.matrixU().rightCols(ambient_dim - rank);
}

Eigen::MatrixXd b_step(const TaskCollection& collection, const Eigen::MatrixXd& A, double lambda) {
    collection.validate();
    if (A.rows() != collection.dim())
        throw InputError(errc::dimension_mismatch, "A does not match the collection");
    const double T = static_cast<double>(collection.tasks.size());
    const int r = static_cast<int>(A.cols());
    Eigen::MatrixXd B(r, collection.tasks.size());
    for (std::size_t t = 0; t < collection.tasks.size(); ++t) {
        const auto& task = collection.tasks[t];
        const Eigen::MatrixXd XA = task.features * A;
        const double ridge = 0.5 * lambda * T * static_cast<double>(task.rows());
        const Eigen::MatrixXd M =
            XA.transpose() * XA + ridge * Eigen::MatrixXd::Identity(r, r);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError(errc::singular_system,
                                 "head update failed for task '" + task.task_id + "'");
        B.col(static_cast<int>(t)) = ldlt.solve(XA.transpose() * task.outputs);
    }
    return B;
}

Eigen::MatrixXd a_step(const TaskCollection& collection, const Eigen::MatrixXd& B, double lambda,
                       const ConstraintMode& mode, double* gamma_used) {
    collection.validate();
    if (B.cols() != static_cast<int>(collection.tasks.size()))
        throw InputError(errc::dimension_mismatch, "B does not match the collection");
    if (gamma_used) *gamma_used = 0.0;
    const int d = collection.dim();
    const auto blocks = task_blocks(collection);

    switch (mode.kind) {
        case ConstraintMode::Kind::none: {
            const auto sys =
                build_a_step(blocks, B, lambda, Eigen::MatrixXd::Identity(d, d), nullptr);
            return sys.solve(0.0);
        }
        case ConstraintMode::Kind::hard: {
            const Eigen::MatrixXd N = null_space_basis(collect_gaps(collection), d);
            if (N.cols() == 0)
                throw NumericalError(errc::full_span_constraint,
                                     "group mean gaps span the whole feature space");
            const auto sys = build_a_step(blocks, B, lambda, N, nullptr);
            return N * sys.solve(0.0);
        }
        case ConstraintMode::Kind::penalty: {
            const Eigen::MatrixXd Sigma_hat = gap_covariance(collect_gaps(collection));
            const auto sys = build_a_step(blocks, B, lambda, Eigen::MatrixXd::Identity(d, d),
                                          &Sigma_hat);
            if (gamma_used) *gamma_used = mode.gamma;
            return sys.solve(mode.gamma);
        }
        case ConstraintMode::Kind::soft: {
            const Eigen::MatrixXd Sigma_hat = gap_covariance(collect_gaps(collection));
            const auto sys = build_a_step(blocks, B, lambda, Eigen::MatrixXd::Identity(d, d),
                                          &Sigma_hat);
            Eigen::MatrixXd A = sys.solve(0.0);
            if (mean_sq_gap_residual(Sigma_hat, A) <= mode.epsilon) return A;

            double hi = kSoftGammaMax;
            Eigen::MatrixXd A_hi = sys.solve(hi);
            if (mean_sq_gap_residual(Sigma_hat, A_hi) > mode.epsilon)
                throw NumericalError(errc::no_convergence,
                                     "penalty search cannot reach the relaxed constraint");
            double lo = 0.0;
            for (int iter = 0; iter < kSoftBisectionIters; ++iter) {
                const double mid = 0.5 * (lo + hi);
                const Eigen::MatrixXd A_mid = sys.solve(mid);
                if (mean_sq_gap_residual(Sigma_hat, A_mid) <= mode.epsilon) {
                    hi = mid;
                    A_hi = A_mid;
                } else {
                    lo = mid;
                }
            }
            if (gamma_used) *gamma_used = hi;
            return A_hi;
        }
    }
    throw InputError(errc::invalid_spec, "unknown constraint mode");
}

FitResult fit(const TaskCollection& collection, const SolverConfig& config) {
    collection.validate();
    check_config(config);
    const int d = collection.dim();
    const Eigen::MatrixXd gaps = collect_gaps(collection);
    const Eigen::MatrixXd Sigma_hat = gap_covariance(gaps);

    auto rng = make_rng(config.seed, 7);
    Eigen::MatrixXd A;
    const bool hard = config.mode.kind == ConstraintMode::Kind::hard;
    const bool soft = config.mode.kind == ConstraintMode::Kind::soft;
    if (hard || soft) {
        const Eigen::MatrixXd N = null_space_basis(gaps, d);
        if (N.cols() == 0) {
            if (hard)
                throw NumericalError(errc::full_span_constraint,
                                     "group mean gaps span the whole feature space");
            // Feasible start for the relaxed constraint: shrink a random
            // orthonormal A until it satisfies the residual budget.
            A = random_orthonormal(d, config.r, rng);
            const double residual = mean_sq_gap_residual(Sigma_hat, A);
            if (residual > config.mode.epsilon)
                A *= (1.0 - 1e-12) * std::sqrt(config.mode.epsilon / residual);
        } else {
            A = N * random_orthonormal(static_cast<int>(N.cols()), config.r, rng);
        }
    } else {
        A = random_orthonormal(d, config.r, rng);
    }

    Eigen::MatrixXd B = b_step(collection, A, config.lambda);

    FitResult result;
    result.config = config;
    result.objective_trace.push_back(
        mode_objective(collection, A, B, config.lambda, config.mode));

    double previous_outer = result.objective_trace.front();
    for (int iter = 0; iter < config.max_outer_iters; ++iter) {
        Eigen::MatrixXd A_next = a_step(collection, B, config.lambda, config.mode);
        if (soft) {
            // The penalized minimizer can trade data fit for slack the
            // incumbent did not need; keep whichever feasible iterate scores
            // better on the objective the trace reports.
            const double candidate =
                mode_objective(collection, A_next, B, config.lambda, config.mode);
            const double incumbent =
                mode_objective(collection, A, B, config.lambda, config.mode);
            if (incumbent < candidate &&
                mean_sq_gap_residual(Sigma_hat, A) <= config.mode.epsilon)
                A_next = A;
        }
        A = A_next;
        result.objective_trace.push_back(
            mode_objective(collection, A, B, config.lambda, config.mode));

        B = b_step(collection, A, config.lambda);
        const double after_outer =
            mode_objective(collection, A, B, config.lambda, config.mode);
        result.objective_trace.push_back(after_outer);

        const double decrease = previous_outer - after_outer;
        if (decrease >= 0.0 && decrease <= config.rel_tol * std::max(std::abs(previous_outer), 1e-12)) {
            result.converged = true;
            previous_outer = after_outer;
            break;
        }
        previous_outer = after_outer;
    }

    result.A = std::move(A);
    result.B = std::move(B);
    for (int t = 0; t < gaps.cols(); ++t) {
        const double residual = (result.A.transpose() * gaps.col(t)).norm();
        result.constraint_residuals.push_back(residual);
        result.max_constraint_residual = std::max(result.max_constraint_residual, residual);
    }
    return result;
}

Eigen::VectorXd fit_stl(const TaskDataset& task, double lambda, bool constrain_gap) {
    task.validate();
    if (!(lambda > 0.0)) throw InputError(errc::invalid_spec, "lambda must be positive");
    const int d = task.dim();
    const double ridge = lambda * static_cast<double>(task.rows());
    const Eigen::MatrixXd XtX = task.features.transpose() * task.features;
    const Eigen::VectorXd Xty = task.features.transpose() * task.outputs;
    if (!constrain_gap) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX + ridge * Eigen::MatrixXd::Identity(d, d));
        if (ldlt.info() != Eigen::Success)
            throw NumericalError(errc::singular_system, "ridge system failed");
        return ldlt.solve(Xty);
    }
    const Eigen::VectorXd c = group_mean_gap(task).c;
    const Eigen::MatrixXd N = null_space_basis(c, d);
    if (N.cols() == 0) return Eigen::VectorXd::Zero(d);
    const Eigen::MatrixXd M = N.transpose() * XtX * N +
                              ridge * Eigen::MatrixXd::Identity(N.cols(), N.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError(errc::singular_system, "constrained ridge system failed");
    return N * ldlt.solve(N.transpose() * Xty);
}

FitResult fit_m1_output_constrained(const TaskCollection& collection, const SolverConfig& config) {
    collection.validate();
    check_config(config);
    const int d = collection.dim();
    const int r = config.r;
    const int T = static_cast<int>(collection.tasks.size());
    const Eigen::MatrixXd gaps = collect_gaps(collection);
    const auto blocks = task_blocks(collection);
    const double T_real = static_cast<double>(T);

    // Head update under <A b_t, c_t> = 0: solve each task's ridge system on
    // the null space of A^T c_t.
    auto constrained_b_step = [&](const Eigen::MatrixXd& A) {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(r, T);
        for (int t = 0; t < T; ++t) {
            const auto& task = collection.tasks[static_cast<std::size_t>(t)];
            const Eigen::VectorXd v = A.transpose() * gaps.col(t);
            const Eigen::MatrixXd N = null_space_basis(v, r);
            if (N.cols() == 0) continue; // only b_t = 0 satisfies the constraint
            const Eigen::MatrixXd XA = task.features * A * N;
            const double ridge = 0.5 * config.lambda * T_real * static_cast<double>(task.rows());
            const Eigen::MatrixXd M =
                XA.transpose() * XA + ridge * Eigen::MatrixXd::Identity(N.cols(), N.cols());
            Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
            if (ldlt.info() != Eigen::Success)
                throw NumericalError(errc::singular_system,
                                     "head update failed for task '" + task.task_id + "'");
            B.col(t) = N * ldlt.solve(XA.transpose() * task.outputs);
        }
        return B;
    };

    // Representation update under the same per-task output constraints, which
    // are linear in vec(A) with normal vectors b_t kron c_t.
    auto constrained_a_step = [&](const Eigen::MatrixXd& B) {
        Eigen::MatrixXd K(d * r, T);
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < r; ++j)
                K.block(j * d, t, d, 1) = B(j, t) * gaps.col(t);
        const Eigen::MatrixXd N = null_space_basis(K, d * r);
        if (N.cols() == 0) return Eigen::MatrixXd::Zero(d, r).eval();

        const int n = d * r;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        for (int t = 0; t < T; ++t) {
            const Eigen::VectorXd b = B.col(t);
            const double w = blocks[static_cast<std::size_t>(t)].weight;
            for (int j = 0; j < r; ++j) {
                g.segment(j * d, d) += (w * b[j]) * blocks[static_cast<std::size_t>(t)].Xty;
                for (int i = 0; i < r; ++i)
                    H.block(i * d, j * d, d, d) +=
                        (w * b[i] * b[j]) * blocks[static_cast<std::size_t>(t)].XtX;
            }
        }
        const Eigen::MatrixXd M = N.transpose() * H * N +
                                  config.lambda * Eigen::MatrixXd::Identity(N.cols(), N.cols());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError(errc::singular_system, "representation update system failed");
        const Eigen::VectorXd a = N * ldlt.solve(N.transpose() * g);
        return Eigen::Map<const Eigen::MatrixXd>(a.data(), d, r).eval();
    };

    auto rng = make_rng(config.seed, 7);
    Eigen::MatrixXd A = random_orthonormal(d, r, rng);
    Eigen::MatrixXd B = constrained_b_step(A);

    FitResult result;
    result.config = config;
    result.objective_trace.push_back(objective(collection, A, B, config.lambda));

    double previous_outer = result.objective_trace.front();
    for (int iter = 0; iter < config.max_outer_iters; ++iter) {
        A = constrained_a_step(B);
        result.objective_trace.push_back(objective(collection, A, B, config.lambda));
        B = constrained_b_step(A);
        const double after_outer = objective(collection, A, B, config.lambda);
        result.objective_trace.push_back(after_outer);
        const double decrease = previous_outer - after_outer;
        if (decrease >= 0.0 && decrease <= config.rel_tol * std::max(std::abs(previous_outer), 1e-12)) {
            result.converged = true;
            previous_outer = after_outer;
            break;
        }
        previous_outer = after_outer;
    }

    result.A = std::move(A);
    result.B = std::move(B);
    for (int t = 0; t < T; ++t) {
        const double residual = (result.A.transpose() * gaps.col(t)).norm();
        result.constraint_residuals.push_back(residual);
        result.max_constraint_residual = std::max(result.max_constraint_residual, residual);
    }
    return result;
}

Eigen::MatrixXd renormalize(const Eigen::MatrixXd& A) {
    const double norm = A.norm();
    if (norm == 0.0) throw NumericalError(errc::zero_matrix, "cannot renormalize a zero matrix");
    return A / norm;
}

} // namespace fairrep
