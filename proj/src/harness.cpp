#include "fairrep/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairrep/io.hpp"
#include "fairrep/metrics.hpp"
#include "fairrep/rng.hpp"
#include "fairrep/transfer.hpp"

namespace fairrep {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::pair<double, double> range_from_levels(const std::vector<double>& levels) {
    const double lo = levels.front();
    const double hi = levels.back();
    if (hi > lo) return {lo, hi};
    return {lo - 0.5, lo + 0.5};
}

GridSpec normalized_grid(const GridSpec& grid, int d, Method method, bool* clipped = nullptr) {
    grid.validate();
    GridSpec g = grid;
    if (method == Method::stl_uncons || method == Method::stl_cons) {
        g.ranks = {1};
        return g;
    }
    std::vector<int> ranks;
    for (int r : g.ranks) {
        const int c = std::clamp(r, 1, d);
        if (clipped && c != r) *clipped = true;
        if (std::find(ranks.begin(), ranks.end(), c) == ranks.end()) ranks.push_back(c);
    }
    std::sort(ranks.begin(), ranks.end());
    g.ranks = ranks;
    return g;
}

struct Pooled {
    std::vector<double> preds;
    std::vector<double> targets;
    std::vector<int> sens;

    void add(const Eigen::VectorXd& p, const TaskDataset& rows) {
        for (int i = 0; i < rows.rows(); ++i) {
            preds.push_back(p[i]);
            targets.push_back(rows.outputs[i]);
            sens.push_back(rows.sensitive[i]);
        }
    }
    std::pair<double, double> score(const std::vector<double>& levels,
                                    std::pair<double, double> range) const {
        const auto n = static_cast<Eigen::Index>(preds.size());
        Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(preds.data(), n);
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
        Eigen::VectorXi s = Eigen::Map<const Eigen::VectorXi>(sens.data(), n);
        return {err_metric(p, y, range.first, range.second), ddp(p, s, levels)};
    }
};

struct FittedModels {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    std::vector<Eigen::VectorXd> w; // per task, in collection order
    std::string mode_label;
};

FittedModels fit_method(const TaskCollection& train, Method method, double lambda, int r,
                        const HarnessOptions& options, std::uint64_t seed) {
    FittedModels out;
    if (method == Method::stl_uncons || method == Method::stl_cons) {
        const bool constrained = method == Method::stl_cons;
        for (const auto& task : train.tasks)
            out.w.push_back(fit_stl(task, lambda, constrained));
        out.mode_label = constrained ? "constrained" : "none";
        return out;
    }

    SolverConfig config;
    config.lambda = lambda;
    config.r = r;
    config.max_outer_iters = options.solver_max_outer_iters;
    config.rel_tol = options.solver_rel_tol;
    config.seed = seed;

    FitResult result;
    if (method == Method::m1) {
        config.mode = ConstraintMode::none();
        result = fit_m1_output_constrained(train, config);
        out.mode_label = "output-constrained";
    } else if (method == Method::mtl_uncons) {
        config.mode = ConstraintMode::none();
        result = fit(train, config);
        out.mode_label = "none";
    } else {
        config.mode = ConstraintMode::hard();
        try {
            result = fit(train, config);
            out.mode_label = "hard";
        } catch (const NumericalError& e) {
            if (e.code() != errc::full_span_constraint) throw;
            config.mode = ConstraintMode::soft(options.soft_epsilon);
            result = fit(train, config);
            out.mode_label = config.mode.label();
        }
    }
    for (int t = 0; t < result.B.cols(); ++t) out.w.push_back(result.A * result.B.col(t));
    out.A = std::move(result.A);
    out.B = std::move(result.B);
    return out;
}

struct FoldData {
    TaskCollection train;
    std::vector<TaskDataset> val; // aligned with train.tasks
};

// Per-task k-fold plans stitched into whole-collection folds. Tasks whose
// training side would lose a sensitive group sit out that fold; folds whose
// pooled validation rows lack a group are dropped entirely (the drop depends
// only on the split, never on the hyperparameters under comparison).
std::vector<FoldData> build_folds(const TaskCollection& collection, int k, std::uint64_t seed) {
    std::vector<std::vector<FoldIndices>> plans;
    for (std::size_t ti = 0; ti < collection.tasks.size(); ++ti) {
        const auto& task = collection.tasks[ti];
        const int k_task = std::min(k, task.rows());
        plans.push_back(kfold(task, k_task, mix_seed(seed, 100 + ti)));
    }
    std::vector<FoldData> folds;
    for (int f = 0; f < k; ++f) {
        FoldData fold;
        fold.train.name = collection.name;
        fold.train.feature_columns = collection.feature_columns;
        fold.train.sensitive_encoded = collection.sensitive_encoded;
        bool val_group1 = false, val_group2 = false;
        for (std::size_t ti = 0; ti < collection.tasks.size(); ++ti) {
            const auto& plan = plans[ti][static_cast<std::size_t>(f) % plans[ti].size()];
            TaskDataset cv_train = take_rows(collection.tasks[ti], plan.train);
            try {
                cv_train.validate();
            } catch (const Error&) {
                continue;
            }
            TaskDataset cv_val = take_rows(collection.tasks[ti], plan.validation);
            for (int i = 0; i < cv_val.rows(); ++i)
                (cv_val.sensitive[i] == 1 ? val_group1 : val_group2) = true;
            fold.train.tasks.push_back(std::move(cv_train));
            fold.val.push_back(std::move(cv_val));
        }
        if (!fold.train.tasks.empty() && val_group1 && val_group2) folds.push_back(std::move(fold));
    }
    return folds;
}

double sample_std(const std::vector<double>& values, double mean) {
    if (values.size() < 2) return 0.0;
    double sum_sq = 0.0;
    for (double v : values) sum_sq += (v - mean) * (v - mean);
    return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

ArmResult aggregate(const std::string& method, const std::string& protocol, bool sensitive_in,
                    const std::vector<RepetitionDetail>& details) {
    ArmResult arm;
    arm.method = method;
    arm.protocol = protocol;
    arm.sensitive_in_features = sensitive_in;
    arm.repetitions = static_cast<int>(details.size());
    for (const auto& d : details) {
        arm.err_values.push_back(d.err);
        arm.fair_values.push_back(d.fair);
        arm.chosen_lambdas.push_back(d.head_lambda != 0.0 ? d.head_lambda : d.selection.lambda);
        arm.chosen_ranks.push_back(d.selection.r);
        arm.modes_used.push_back(d.mode_label);
    }
    if (!details.empty()) {
        arm.err_mean = std::accumulate(arm.err_values.begin(), arm.err_values.end(), 0.0) /
                       static_cast<double>(details.size());
        arm.fair_mean = std::accumulate(arm.fair_values.begin(), arm.fair_values.end(), 0.0) /
                        static_cast<double>(details.size());
        arm.err_std = sample_std(arm.err_values, arm.err_mean);
        arm.fair_std = sample_std(arm.fair_values, arm.fair_mean);
    }
    return arm;
}

} // namespace

std::string method_name(Method method) {
    switch (method) {
        case Method::stl_uncons: return "STL-UnCons";
        case Method::stl_cons: return "STL-Cons";
        case Method::mtl_uncons: return "MTL-UnCons";
        case Method::mtl_cons: return "MTL-Cons";
        case Method::m1: return "M1";
    }
    return "STL-UnCons";
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::stl_uncons, Method::stl_cons, Method::mtl_uncons, Method::mtl_cons,
                     Method::m1})
        if (method_name(m) == name) return m;
    throw InputError(errc::invalid_spec, "unknown method '" + name + "'");
}

GridSpec GridSpec::defaults(int d) {
    GridSpec g;
    for (int i = 0; i <= 50; ++i) g.lambdas.push_back(std::pow(10.0, -6.0 + 0.2 * i));
    for (int j = -4; j <= 10; ++j) {
        const double raw = std::ldexp(static_cast<double>(d), j);
        const int r = std::clamp(static_cast<int>(std::ceil(raw)), 1, d);
        if (std::find(g.ranks.begin(), g.ranks.end(), r) == g.ranks.end()) g.ranks.push_back(r);
    }
    return g;
}

void GridSpec::validate() const {
    if (lambdas.empty() || ranks.empty())
        throw InputError(errc::invalid_spec, "hyperparameter grids must be nonempty");
    if (folds < 2) throw InputError(errc::invalid_spec, "folds must be at least 2");
    if (!(shortlist_fraction > 0.0 && shortlist_fraction <= 1.0))
        throw InputError(errc::invalid_spec, "shortlist fraction must lie in (0, 1]");
    for (double l : lambdas)
        if (!(l > 0.0)) throw InputError(errc::invalid_spec, "lambda grid must be positive");
    for (int r : ranks)
        if (r < 1) throw InputError(errc::invalid_spec, "rank grid must be positive");
}

Selection two_step_pick(const std::vector<std::vector<double>>& error,
                        const std::vector<std::vector<double>>& fairness,
                        double shortlist_fraction) {
    if (error.empty() || error.size() != fairness.size())
        throw InputError(errc::invalid_spec, "score tables are empty or mismatched");
    double best_error = kNaN;
    for (std::size_t i = 0; i < error.size(); ++i) {
        if (error[i].size() != fairness[i].size())
            throw InputError(errc::invalid_spec, "score tables are mismatched");
        for (double e : error[i])
            if (!std::isnan(e) && (std::isnan(best_error) || e < best_error)) best_error = e;
    }
    if (std::isnan(best_error))
        throw NumericalError(errc::all_combinations_failed,
                             "every hyperparameter combination failed");
    const double threshold = best_error / shortlist_fraction;

    Selection pick;
    for (std::size_t i = 0; i < error.size(); ++i) {
        for (std::size_t j = 0; j < error[i].size(); ++j) {
            const double e = error[i][j];
            if (std::isnan(e) || e > threshold) continue;
            const double f = fairness[i][j];
            const bool better =
                pick.lambda_index < 0 || f < pick.cv_fairness ||
                (f == pick.cv_fairness && e < pick.cv_error);
            if (better) {
                pick.lambda_index = static_cast<int>(i);
                pick.rank_index = static_cast<int>(j);
                pick.cv_error = e;
                pick.cv_fairness = f;
            }
        }
    }
    return pick;
}

Selection two_step_select(const TaskCollection& train, Method method, const GridSpec& grid,
                          const std::vector<double>& levels, std::uint64_t seed,
                          const HarnessOptions& options) {
    train.validate();
    const GridSpec g = normalized_grid(grid, train.dim(), method);
    const auto folds = build_folds(train, g.folds, seed);
    if (folds.empty())
        throw NumericalError(errc::all_combinations_failed, "no usable cross-validation folds");
    const auto range = range_from_levels(levels);

    const std::size_t n_lambda = g.lambdas.size();
    const std::size_t n_rank = g.ranks.size();
    std::vector<std::vector<double>> error(n_lambda, std::vector<double>(n_rank, kNaN));
    std::vector<std::vector<double>> fairness(n_lambda, std::vector<double>(n_rank, kNaN));

    for (std::size_t i = 0; i < n_lambda; ++i) {
        for (std::size_t j = 0; j < n_rank; ++j) {
            const std::size_t combo = i * n_rank + j;
            double err_sum = 0.0, fair_sum = 0.0;
            bool ok = true;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                try {
                    const FittedModels models =
                        fit_method(folds[f].train, method, g.lambdas[i], g.ranks[j], options,
                                   mix_seed(seed, 500 + combo * folds.size() + f));
                    Pooled pooled;
                    for (std::size_t ti = 0; ti < folds[f].val.size(); ++ti)
                        pooled.add(folds[f].val[ti].features * models.w[ti], folds[f].val[ti]);
                    const auto [e, fr] = pooled.score(levels, range);
                    err_sum += e;
                    fair_sum += fr;
                } catch (const Error&) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                error[i][j] = err_sum / static_cast<double>(folds.size());
                fairness[i][j] = fair_sum / static_cast<double>(folds.size());
            }
        }
    }

    Selection pick = two_step_pick(error, fairness, g.shortlist_fraction);
    pick.lambda = g.lambdas[static_cast<std::size_t>(pick.lambda_index)];
    pick.r = (method == Method::stl_uncons || method == Method::stl_cons)
                 ? 0
                 : g.ranks[static_cast<std::size_t>(pick.rank_index)];
    return pick;
}

RepetitionDetail run_same_task_rep(const TaskCollection& collection, Method method,
                                   const GridSpec& grid, std::uint64_t rep_seed,
                                   const HarnessOptions& options) {
    collection.validate();
    TaskCollection train;
    train.name = collection.name;
    train.feature_columns = collection.feature_columns;
    train.sensitive_encoded = collection.sensitive_encoded;
    std::vector<TaskDataset> tests;
    for (std::size_t ti = 0; ti < collection.tasks.size(); ++ti) {
        auto [tr, te] = split_novel_task(collection.tasks[ti], options.train_fraction,
                                         mix_seed(rep_seed, 10 + ti));
        train.tasks.push_back(std::move(tr));
        tests.push_back(std::move(te));
    }

    const std::vector<double> levels = infer_output_space(train);
    const auto range = range_from_levels(levels);
    RepetitionDetail detail;
    detail.selection =
        two_step_select(train, method, grid, levels, mix_seed(rep_seed, 2), options);
    const FittedModels models = fit_method(train, method, detail.selection.lambda,
                                           std::max(detail.selection.r, 1), options,
                                           mix_seed(rep_seed, 3));
    detail.mode_label = models.mode_label;
    detail.A = models.A;
    detail.task_weights = models.w;

    Pooled pooled;
    for (std::size_t ti = 0; ti < tests.size(); ++ti)
        pooled.add(tests[ti].features * models.w[ti], tests[ti]);
    std::tie(detail.err, detail.fair) = pooled.score(levels, range);
    return detail;
}

namespace {

double select_head_lambda(const Eigen::MatrixXd& A, const TaskDataset& train,
                          const GridSpec& grid, const std::vector<double>& levels,
                          std::pair<double, double> range, bool constrain_output,
                          std::uint64_t seed) {
    const int k = std::min(grid.folds, train.rows());
    if (k < 2) return grid.lambdas.front();
    const auto plan = kfold(train, k, seed);

    struct HeadFold {
        TaskDataset cv_train, cv_val;
    };
    std::vector<HeadFold> usable;
    for (const auto& fold : plan) {
        HeadFold hf{take_rows(train, fold.train), take_rows(train, fold.validation)};
        try {
            hf.cv_train.validate();
        } catch (const Error&) {
            continue;
        }
        bool g1 = false, g2 = false;
        for (int i = 0; i < hf.cv_val.rows(); ++i)
            (hf.cv_val.sensitive[i] == 1 ? g1 : g2) = true;
        if (g1 && g2) usable.push_back(std::move(hf));
    }
    if (usable.empty()) return grid.lambdas.front();

    std::vector<std::vector<double>> error(grid.lambdas.size(), std::vector<double>(1, kNaN));
    std::vector<std::vector<double>> fairness(grid.lambdas.size(), std::vector<double>(1, kNaN));
    for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
        double err_sum = 0.0, fair_sum = 0.0;
        bool ok = true;
        for (const auto& hf : usable) {
            try {
                const TransferModel model =
                    constrain_output
                        ? fit_new_task_output_constrained(A, hf.cv_train, grid.lambdas[i])
                        : fit_new_task(A, hf.cv_train, grid.lambdas[i]);
                const Eigen::VectorXd preds = predict(model, hf.cv_val.features);
                err_sum += err_metric(preds, hf.cv_val.outputs, range.first, range.second);
                fair_sum += ddp(preds, hf.cv_val.sensitive, levels);
            } catch (const Error&) {
                ok = false;
                break;
            }
        }
        if (ok) {
            error[i][0] = err_sum / static_cast<double>(usable.size());
            fairness[i][0] = fair_sum / static_cast<double>(usable.size());
        }
    }
    const Selection pick = two_step_pick(error, fairness, grid.shortlist_fraction);
    return grid.lambdas[static_cast<std::size_t>(pick.lambda_index)];
}

} // namespace

RepetitionDetail run_new_task_rep(const TaskCollection& collection, Method method,
                                  const GridSpec& grid, int held_out_task,
                                  std::uint64_t rep_seed, const HarnessOptions& options) {
    collection.validate();
    const int T = static_cast<int>(collection.tasks.size());
    if (held_out_task < 0 || held_out_task >= T)
        throw InputError(errc::invalid_spec, "held-out task index out of range");
    const bool stl = method == Method::stl_uncons || method == Method::stl_cons;
    if (!stl && T < 2)
        throw InputError(errc::too_few_rows, "representation transfer needs at least 2 tasks");

    TaskCollection rest;
    rest.name = collection.name;
    rest.feature_columns = collection.feature_columns;
    rest.sensitive_encoded = collection.sensitive_encoded;
    for (int t = 0; t < T; ++t)
        if (t != held_out_task) rest.tasks.push_back(collection.tasks[static_cast<std::size_t>(t)]);
    const TaskDataset& novel = collection.tasks[static_cast<std::size_t>(held_out_task)];

    const std::uint64_t split_seed = mix_seed(rep_seed, 5);
    auto [ntrain, ntest] = split_novel_task(novel, options.train_fraction, split_seed);
    (void)ntest;

    // Output levels come from everything the training side may see: the
    // retained tasks plus the novel task's training split.
    TaskCollection levels_source = rest;
    levels_source.tasks.push_back(ntrain);
    const std::vector<double> levels = infer_output_space(levels_source);
    const auto range = range_from_levels(levels);

    RepetitionDetail detail;
    detail.held_out_task = held_out_task;
    bool constrain_output = false;
    if (stl) {
        detail.A = Eigen::MatrixXd::Identity(collection.dim(), collection.dim());
        detail.mode_label = method == Method::stl_cons ? "constrained" : "none";
        constrain_output = method == Method::stl_cons;
    } else {
        const std::vector<double> rest_levels = infer_output_space(rest);
        detail.selection = two_step_select(rest, method, grid, rest_levels,
                                           mix_seed(rep_seed, 2), options);
        const FittedModels models =
            fit_method(rest, method, detail.selection.lambda, std::max(detail.selection.r, 1),
                       options, mix_seed(rep_seed, 3));
        detail.A = models.A;
        detail.mode_label = models.mode_label;
        constrain_output = method == Method::m1;
    }

    const GridSpec g = normalized_grid(grid, collection.dim(), method);
    detail.head_lambda = select_head_lambda(detail.A, ntrain, g, levels, range, constrain_output,
                                            mix_seed(rep_seed, 6));
    const TransferEval eval = evaluate_transfer(detail.A, novel, detail.head_lambda,
                                                options.train_fraction, split_seed, levels, range,
                                                constrain_output);
    detail.err = eval.err;
    detail.fair = eval.fair;
    detail.task_weights = {eval.model.w};
    return detail;
}

ArmResult run_same_task(const TaskCollection& collection, Method method, const GridSpec& grid,
                        int repetitions, std::uint64_t seed, const HarnessOptions& options) {
    if (repetitions < 1) throw InputError(errc::invalid_spec, "repetitions must be positive");
    std::vector<RepetitionDetail> details;
    for (int rep = 0; rep < repetitions; ++rep)
        details.push_back(
            run_same_task_rep(collection, method, grid, mix_seed(seed, 1 + rep), options));
    return aggregate(method_name(method), "same-task", collection.sensitive_encoded, details);
}

ArmResult run_new_task(const TaskCollection& collection, Method method, const GridSpec& grid,
                       int repetitions, std::uint64_t seed, const HarnessOptions& options) {
    if (repetitions < 1) throw InputError(errc::invalid_spec, "repetitions must be positive");
    collection.validate();
    const int T = static_cast<int>(collection.tasks.size());
    std::vector<int> order(T);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, 4);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<RepetitionDetail> details;
    for (int rep = 0; rep < repetitions; ++rep) {
        const int held = order[static_cast<std::size_t>(rep % T)];
        details.push_back(
            run_new_task_rep(collection, method, grid, held, mix_seed(seed, 1 + rep), options));
    }
    return aggregate(method_name(method), "new-task", collection.sensitive_encoded, details);
}

ExperimentReport run_protocol(const TaskCollection& collection, const ProtocolConfig& config) {
    collection.validate();
    ExperimentReport report;
    report.dataset = config.dataset_name;
    report.master_seed = config.seed;
    report.repetitions = config.repetitions;
    report.grid = config.grid.lambdas.empty() || config.grid.ranks.empty()
                      ? GridSpec::defaults(collection.dim())
                      : config.grid;
    report.notes = {"same-task evaluation: stratified 70/30 split per task, repeated per repetition",
                    "hyperparameters reselected on the training side of every repetition",
                    "new-task protocol: held-out task cycles through a seeded task order",
                    "novel-task head lambda re-validated on the novel training split"};

    bool clipped = false;
    std::vector<std::pair<bool, TaskCollection>> variants;
    if (config.sensitive_out_arms) variants.emplace_back(false, collection);
    if (config.sensitive_in_arms)
        variants.emplace_back(true, collection.sensitive_encoded
                                        ? collection
                                        : append_sensitive_onehot(collection));

    std::size_t arm_index = 0;
    for (const auto& [sensitive_in, data] : variants) {
        for (Method method : config.methods) {
            normalized_grid(report.grid, data.dim(), method, &clipped);
            if (config.same_task) {
                ArmResult arm = run_same_task(data, method, report.grid, config.repetitions,
                                              mix_seed(config.seed, 40 + arm_index), config.options);
                arm.sensitive_in_features = sensitive_in;
                report.arms.push_back(std::move(arm));
                ++arm_index;
            }
            if (config.new_task) {
                ArmResult arm = run_new_task(data, method, report.grid, config.repetitions,
                                             mix_seed(config.seed, 40 + arm_index), config.options);
                arm.sensitive_in_features = sensitive_in;
                report.arms.push_back(std::move(arm));
                ++arm_index;
            }
        }
    }
    if (clipped)
        report.notes.push_back("rank grid entries above the feature dimension were clipped");
    return report;
}

std::string report_to_json(const ExperimentReport& report) {
    ordered_json j;
    j["dataset"] = report.dataset;
    j["master_seed"] = report.master_seed;
    j["repetitions"] = report.repetitions;
    ordered_json grid;
    grid["lambdas"] = report.grid.lambdas;
    grid["ranks"] = report.grid.ranks;
    grid["folds"] = report.grid.folds;
    grid["shortlist_fraction"] = report.grid.shortlist_fraction;
    j["grid"] = std::move(grid);
    j["notes"] = report.notes;
    ordered_json arms = ordered_json::array();
    for (const auto& arm : report.arms) {
        ordered_json a;
        a["method"] = arm.method;
        a["protocol"] = arm.protocol;
        a["sensitive_in_features"] = arm.sensitive_in_features;
        a["repetitions"] = arm.repetitions;
        a["err_mean"] = arm.err_mean;
        a["err_std"] = arm.err_std;
        a["fair_mean"] = arm.fair_mean;
        a["fair_std"] = arm.fair_std;
        a["err_values"] = arm.err_values;
        a["fair_values"] = arm.fair_values;
        a["chosen_lambdas"] = arm.chosen_lambdas;
        a["chosen_ranks"] = arm.chosen_ranks;
        a["modes_used"] = arm.modes_used;
        arms.push_back(std::move(a));
    }
    j["arms"] = std::move(arms);
    return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    ExperimentReport report;
    report.dataset = j.at("dataset").get<std::string>();
    report.master_seed = j.at("master_seed").get<std::uint64_t>();
    report.repetitions = j.at("repetitions").get<int>();
    report.grid.lambdas = j.at("grid").at("lambdas").get<std::vector<double>>();
    report.grid.ranks = j.at("grid").at("ranks").get<std::vector<int>>();
    report.grid.folds = j.at("grid").at("folds").get<int>();
    report.grid.shortlist_fraction = j.at("grid").at("shortlist_fraction").get<double>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& a : j.at("arms")) {
        ArmResult arm;
        arm.method = a.at("method").get<std::string>();
        arm.protocol = a.at("protocol").get<std::string>();
        arm.sensitive_in_features = a.at("sensitive_in_features").get<bool>();
        arm.repetitions = a.at("repetitions").get<int>();
        arm.err_mean = a.at("err_mean").get<double>();
        arm.err_std = a.at("err_std").get<double>();
        arm.fair_mean = a.at("fair_mean").get<double>();
        arm.fair_std = a.at("fair_std").get<double>();
        arm.err_values = a.at("err_values").get<std::vector<double>>();
        arm.fair_values = a.at("fair_values").get<std::vector<double>>();
        arm.chosen_lambdas = a.at("chosen_lambdas").get<std::vector<double>>();
        arm.chosen_ranks = a.at("chosen_ranks").get<std::vector<int>>();
        arm.modes_used = a.at("modes_used").get<std::vector<std::string>>();
        report.arms.push_back(std::move(arm));
    }
    return report;
}

void emit_report(const ExperimentReport& report, const std::string& path) {
    write_text_file(path, report_to_json(report));
    write_text_file(path + ".txt", render_report_table(report));
}

ExperimentReport parse_report(const std::string& path) {
    return report_from_json(read_text_file(path));
}

std::string render_report_table(const ExperimentReport& report) {
    std::ostringstream out;
    out << "dataset: " << report.dataset << "   seed: " << report.master_seed
        << "   repetitions: " << report.repetitions << "\n";
    out << "ERR  = 100 * mean |prediction - target| / output range\n"
           "       (range-normalized mean absolute error, in percent)\n";
    out << "FAIR = difference of demographic parity across snapped output levels\n\n";

    char line[256];
    std::snprintf(line, sizeof(line), "%-11s %-9s %-12s %-19s %-19s %s\n", "method", "protocol",
                  "sensitive", "ERR (mean +/- std)", "FAIR (mean +/- std)", "modes");
    out << line;
    out << std::string(88, '-') << "\n";
    for (const auto& arm : report.arms) {
        std::set<std::string> modes(arm.modes_used.begin(), arm.modes_used.end());
        std::string mode_list;
        for (const auto& m : modes) mode_list += (mode_list.empty() ? "" : ",") + m;
        char err_text[40], fair_text[40];
        std::snprintf(err_text, sizeof(err_text), "%8.3f +/- %6.3f", arm.err_mean, arm.err_std);
        std::snprintf(fair_text, sizeof(fair_text), "%8.4f +/- %6.4f", arm.fair_mean,
                      arm.fair_std);
        std::snprintf(line, sizeof(line), "%-11s %-9s %-12s %-19s %-19s %s\n", arm.method.c_str(),
                      arm.protocol.c_str(), arm.sensitive_in_features ? "in-form" : "not-in-form",
                      err_text, fair_text, mode_list.c_str());
        out << line;
    }
    return out.str();
}

} // namespace fairrep
