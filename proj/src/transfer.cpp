#include "fairrep/transfer.hpp"

#include "fairrep/metrics.hpp"
#include "fairrep/solver.hpp"

namespace fairrep {

namespace {

TransferModel solve_head(const Eigen::MatrixXd& A, const TaskDataset& task, double lambda,
                         const Eigen::MatrixXd& head_basis) {
    const Eigen::MatrixXd XAN = task.features * A * head_basis;
    const double ridge = lambda * static_cast<double>(task.rows());
    const Eigen::MatrixXd M = XAN.transpose() * XAN +
                              ridge * Eigen::MatrixXd::Identity(head_basis.cols(), head_basis.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError(errc::singular_system, "novel task head system failed");
    TransferModel model;
    model.A = A;
    model.b = head_basis * ldlt.solve(XAN.transpose() * task.outputs);
    model.w = A * model.b;
    return model;
}

} // namespace

TransferModel fit_new_task(const Eigen::MatrixXd& A, const TaskDataset& task, double lambda) {
    task.validate();
    if (A.rows() != task.dim())
        throw InputError(errc::dimension_mismatch, "representation does not match the task");
    if (!(lambda > 0.0)) throw InputError(errc::invalid_spec, "lambda must be positive");
    const int r = static_cast<int>(A.cols());
    return solve_head(A, task, lambda, Eigen::MatrixXd::Identity(r, r));
}

TransferModel fit_new_task_output_constrained(const Eigen::MatrixXd& A, const TaskDataset& task,
                                              double lambda) {
    task.validate();
    if (A.rows() != task.dim())
        throw InputError(errc::dimension_mismatch, "representation does not match the task");
    if (!(lambda > 0.0)) throw InputError(errc::invalid_spec, "lambda must be positive");
    const int r = static_cast<int>(A.cols());
    const Eigen::VectorXd v = A.transpose() * group_mean_gap(task).c;
    const Eigen::MatrixXd N = null_space_basis(v, r);
    if (N.cols() == 0) {
        TransferModel model;
        model.A = A;
        model.b = Eigen::VectorXd::Zero(r);
        model.w = Eigen::VectorXd::Zero(A.rows());
        return model;
    }
    return solve_head(A, task, lambda, N);
}

Eigen::VectorXd predict(const TransferModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.w.size())
        throw InputError(errc::dimension_mismatch, "feature dimension does not match the model");
    return features * model.w;
}

TransferEval evaluate_transfer(const Eigen::MatrixXd& A, const TaskDataset& novel_task,
                               double lambda, double train_fraction, std::uint64_t seed,
                               const std::vector<double>& output_levels,
                               std::pair<double, double> output_range, bool constrain_output) {
    auto [train, test] = split_novel_task(novel_task, train_fraction, seed);
    TransferModel model = constrain_output ? fit_new_task_output_constrained(A, train, lambda)
                                           : fit_new_task(A, train, lambda);
    const Eigen::VectorXd predictions = predict(model, test.features);
    TransferEval eval;
    eval.err = err_metric(predictions, test.outputs, output_range.first, output_range.second);
    eval.fair = ddp(predictions, test.sensitive, output_levels);
    eval.model = std::move(model);
    return eval;
}

} // namespace fairrep
