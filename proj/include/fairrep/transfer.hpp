#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "fairrep/dataset.hpp"

namespace fairrep {

struct TransferModel {
    Eigen::MatrixXd A; // frozen representation
    Eigen::VectorXd b; // new task head
    Eigen::VectorXd w; // A * b, for prediction in feature space
};

// Ridge on the frozen representation's coordinates: only b is learned.
TransferModel fit_new_task(const Eigen::MatrixXd& A, const TaskDataset& task, double lambda);

// Same, but the head is constrained so <A b, c> = 0 for the task's train gap.
TransferModel fit_new_task_output_constrained(const Eigen::MatrixXd& A, const TaskDataset& task,
                                              double lambda);

Eigen::VectorXd predict(const TransferModel& model, const Eigen::MatrixXd& features);

struct TransferEval {
    double err = 0.0;
    double fair = 0.0; // ddp on the held-out rows
    TransferModel model;
};

// Splits the novel task (stratified, seeded), fits the head on the train part,
// scores ERR and ddp on the held-out part. Pass constrain_output for the
// per-task output-constrained variant.
TransferEval evaluate_transfer(const Eigen::MatrixXd& A, const TaskDataset& novel_task,
                               double lambda, double train_fraction, std::uint64_t seed,
                               const std::vector<double>& output_levels,
                               std::pair<double, double> output_range,
                               bool constrain_output = false);

} // namespace fairrep
