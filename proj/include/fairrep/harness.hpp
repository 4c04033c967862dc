#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairrep/dataset.hpp"
#include "fairrep/solver.hpp"

namespace fairrep {

enum class Method { stl_uncons, stl_cons, mtl_uncons, mtl_cons, m1 };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct GridSpec {
    std::vector<double> lambdas;
    std::vector<int> ranks;
    int folds = 10;
    double shortlist_fraction = 0.90;

    // lambda = 10^{-6.0 .. +4.0} in steps of 0.2; r = ceil(2^j d), j = -4..10,
    // clipped to [1, d] and deduplicated.
    static GridSpec defaults(int d);
    void validate() const;
};

struct Selection {
    int lambda_index = -1;
    int rank_index = -1;
    double lambda = 0.0;
    int r = 0;
    double cv_error = 0.0;
    double cv_fairness = 0.0;
};

// The selection rule alone, on precomputed tables indexed [lambda][rank]:
// shortlist every cell with error <= best_error / shortlist_fraction, then take
// the smallest fairness; ties fall back to smallest error, then grid order.
// Cells with NaN error are treated as failed and skipped.
Selection two_step_pick(const std::vector<std::vector<double>>& error,
                        const std::vector<std::vector<double>>& fairness,
                        double shortlist_fraction);

struct HarnessOptions {
    double train_fraction = 0.7;
    double soft_epsilon = 1e-6; // fallback when hard constraints eat the whole space
    int solver_max_outer_iters = 500;
    double solver_rel_tol = 1e-7;
};

// Cross-validated (lambda, r) choice for one method on one training collection.
// STL methods ignore the rank grid (single column). Combinations whose fit
// fails are skipped; AllCombinationsFailed if none survive.
Selection two_step_select(const TaskCollection& train, Method method, const GridSpec& grid,
                          const std::vector<double>& levels, std::uint64_t seed,
                          const HarnessOptions& options);

struct ArmResult {
    std::string method;
    std::string protocol; // "same-task" or "new-task"
    bool sensitive_in_features = false;
    int repetitions = 0;
    double err_mean = 0.0;
    double err_std = 0.0; // 0 when repetitions == 1
    double fair_mean = 0.0;
    double fair_std = 0.0;
    std::vector<double> err_values;
    std::vector<double> fair_values;
    std::vector<double> chosen_lambdas;
    std::vector<int> chosen_ranks;
    std::vector<std::string> modes_used; // solver mode per repetition
};

struct ExperimentReport {
    std::string dataset;
    std::uint64_t master_seed = 0;
    int repetitions = 0;
    GridSpec grid;
    std::vector<std::string> notes;
    std::vector<ArmResult> arms;
};

// One repetition, exposed so tests can inspect the fitted model and the
// selection alongside the scores.
struct RepetitionDetail {
    Selection selection;
    double head_lambda = 0.0; // new-task protocol: the re-validated novel-task lambda
    std::string mode_label;
    double err = 0.0;
    double fair = 0.0;
    Eigen::MatrixXd A;                        // identity for the STL methods
    std::vector<Eigen::VectorXd> task_weights; // per task; one entry for new-task
    int held_out_task = -1;
};

RepetitionDetail run_same_task_rep(const TaskCollection& collection, Method method,
                                   const GridSpec& grid, std::uint64_t rep_seed,
                                   const HarnessOptions& options);
RepetitionDetail run_new_task_rep(const TaskCollection& collection, Method method,
                                  const GridSpec& grid, int held_out_task,
                                  std::uint64_t rep_seed, const HarnessOptions& options);

ArmResult run_same_task(const TaskCollection& collection, Method method, const GridSpec& grid,
                        int repetitions, std::uint64_t seed, const HarnessOptions& options);

ArmResult run_new_task(const TaskCollection& collection, Method method, const GridSpec& grid,
                       int repetitions, std::uint64_t seed, const HarnessOptions& options);

struct ProtocolConfig {
    GridSpec grid;         // empty grids are replaced by defaults(d)
    int repetitions = 30;
    std::uint64_t seed = 0;
    HarnessOptions options;
    std::vector<Method> methods = {Method::stl_uncons, Method::stl_cons, Method::mtl_uncons,
                                   Method::mtl_cons};
    bool same_task = true;
    bool new_task = true;
    bool sensitive_in_arms = true;  // duplicate every arm with sensitive one-hots appended
    bool sensitive_out_arms = true;
    std::string dataset_name = "dataset";
};

ExperimentReport run_protocol(const TaskCollection& collection, const ProtocolConfig& config);

// JSON text; emit_report also writes a rendered table next to it (path + ".txt").
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
void emit_report(const ExperimentReport& report, const std::string& path);
ExperimentReport parse_report(const std::string& path);
std::string render_report_table(const ExperimentReport& report);

} // namespace fairrep
