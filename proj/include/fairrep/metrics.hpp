#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fairrep/dataset.hpp"

namespace fairrep {

// c(z_t): group-1 feature mean minus group-2 feature mean for one task.
struct GroupMeanGap {
    std::string task_id;
    Eigen::VectorXd c;
};

GroupMeanGap group_mean_gap(const TaskDataset& task);
std::vector<GroupMeanGap> group_mean_gaps(const TaskCollection& collection);

struct FairnessReport {
    std::vector<double> per_task_residual; // ||A^T c_t||
    double mean_sq_residual = 0.0;         // (1/T) sum ||A^T c_t||^2
    double max_residual = 0.0;
};

FairnessReport representation_residuals(const Eigen::MatrixXd& A,
                                        const std::vector<GroupMeanGap>& gaps);

// Mean absolute difference of the two groups' per-level prediction rates.
// Predictions are snapped to the nearest level first (ties toward the lower
// level); frequencies are raw counts, no smoothing.
double ddp(const Eigen::VectorXd& predictions, const Eigen::VectorXi& sensitive,
           const std::vector<double>& levels);

// 100 * mean |prediction - target| / (hi - lo).
double err_metric(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                  double lo, double hi);

// Distinct output values when there are at most 32 of them, otherwise an
// 11-point equally spaced grid over the observed range. Sorted ascending.
std::vector<double> infer_output_space(const TaskCollection& collection);

double snap_to_level(double value, const std::vector<double>& levels);

} // namespace fairrep
