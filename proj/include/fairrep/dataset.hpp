#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairrep/errors.hpp"

namespace fairrep {

enum class ColumnKind { numeric, categorical, sensitive, output };

struct ColumnSpec {
    std::string name;
    ColumnKind kind;
};

// Describes the raw CSV layout: one spec per column, which column keys the
// tasks, and which sensitive value maps to group 1.
struct Schema {
    std::vector<ColumnSpec> columns;
    std::string task_column;
    std::string sensitive_positive;
};

// One task's data. Group labels are 1/2; both must occur.
struct TaskDataset {
    std::string task_id;
    Eigen::MatrixXd features; // m x d
    Eigen::VectorXd outputs;  // m
    Eigen::VectorXi sensitive; // m, values in {1,2}

    int rows() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
    void validate() const;
};

struct FeatureColumn {
    enum class Source { numeric, onehot, sensitive_onehot };
    std::string name;
    Source source = Source::numeric;
};

struct TaskCollection {
    std::string name;
    std::vector<TaskDataset> tasks;
    std::vector<FeatureColumn> feature_columns; // length d, shared by all tasks
    bool sensitive_encoded = false;             // append_sensitive_onehot applied

    int dim() const { return tasks.empty() ? 0 : tasks.front().dim(); }
    int num_tasks() const { return static_cast<int>(tasks.size()); }
    int total_rows() const;
    void validate() const;
};

// Per-column affine transform fit on the pooled rows (population variance).
struct StandardizationParams {
    struct Entry {
        std::string name;
        double mean = 0.0;
        double scale = 1.0;
    };
    std::vector<Entry> features;       // kept columns, in output order
    std::vector<std::string> dropped;  // constant columns removed
    bool output_standardized = false;
    Entry output;
};

struct SyntheticEnvSpec {
    int d = 0;
    int r_true = 0;
    int T = 0;
    int m = 0;
    Eigen::VectorXd gap_direction; // unit vector in R^d
    double gap_scale = 0.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticTruth {
    Eigen::MatrixXd A_star; // d x r_true, orthonormal columns, A*^T v = 0
    Eigen::MatrixXd B_star; // r_true x T
};

struct FoldIndices {
    std::vector<int> train;
    std::vector<int> validation;
};

TaskCollection load_csv(const std::string& path, const Schema& schema);
// Tasks failing validation (too few rows, missing group) are skipped instead
// of aborting the load; their ids are appended to dropped_tasks.
TaskCollection load_csv(const std::string& path, const Schema& schema, bool drop_invalid_tasks,
                        std::vector<std::string>* dropped_tasks);

std::pair<TaskCollection, StandardizationParams> standardize(const TaskCollection& collection);

// Applies previously fit parameters (held-out data re-uses the training transform).
TaskCollection apply_standardization(const TaskCollection& collection,
                                     const StandardizationParams& params);
TaskCollection invert_standardization(const TaskCollection& collection,
                                      const StandardizationParams& params);

TaskCollection append_sensitive_onehot(const TaskCollection& collection);

// Stratified by the sensitive attribute; both parts keep both groups.
std::pair<TaskDataset, TaskDataset> split_novel_task(const TaskDataset& task,
                                                     double train_fraction,
                                                     std::uint64_t seed);

std::vector<FoldIndices> kfold(const TaskDataset& task, int k, std::uint64_t seed);

std::pair<TaskCollection, SyntheticTruth> generate_synthetic(const SyntheticEnvSpec& spec);

TaskDataset take_rows(const TaskDataset& task, const std::vector<int>& rows);

// Drops tasks whose smaller sensitive group has fewer than min_per_group rows
// (stratified splitting needs at least 2 on each side).
TaskCollection drop_small_groups(const TaskCollection& collection, int min_per_group,
                                 std::vector<std::string>* dropped_tasks);

} // namespace fairrep
