#pragma once

#include <Eigen/Dense>
#include <string>

#include "fairrep/bounds.hpp"
#include "fairrep/dataset.hpp"
#include "fairrep/solver.hpp"

namespace fairrep {

// Text container: first line "rows cols", then one row per line, %.17g entries
// (round-trips doubles exactly).
void save_matrix(const Eigen::MatrixXd& matrix, const std::string& path);
Eigen::MatrixXd load_matrix(const std::string& path);

// prefix.A.mat, prefix.B.mat, prefix.fit.json (config echo, trace, residuals).
void save_fit_result(const FitResult& result, const std::string& prefix);
FitResult load_fit_result(const std::string& prefix);

void save_collection(const TaskCollection& collection, const std::string& path);
TaskCollection load_collection(const std::string& path);

void save_standardization(const StandardizationParams& params, const std::string& path);
StandardizationParams load_standardization(const std::string& path);

Schema load_schema(const std::string& path);

void save_bound_report(const BoundInputs& inputs, const RiskBoundReport& risk,
                       const FairnessBoundReport& fairness, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace fairrep
