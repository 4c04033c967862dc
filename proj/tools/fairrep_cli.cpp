// Command-line front end. Subcommands mirror the pipeline stages: ingest CSV
// data, generate synthetic collections, train, transfer to a novel task, emit
// certificates, search hyperparameters, run the full protocol, render reports.
// Exit codes: 0 success, 2 bad input, 3 numerical failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fairrep/bounds.hpp"
#include "fairrep/dataset.hpp"
#include "fairrep/errors.hpp"
#include "fairrep/harness.hpp"
#include "fairrep/io.hpp"
#include "fairrep/metrics.hpp"
#include "fairrep/solver.hpp"
#include "fairrep/transfer.hpp"

using namespace fairrep;

namespace {

// Relative output paths land under --output-dir (or $FAIRREP_OUT_DIR).
std::string out_path(const std::string& out_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (!p.is_absolute()) p = std::filesystem::path(out_dir) / p;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p.string();
}

ConstraintMode parse_mode(const std::string& name, double epsilon, double gamma) {
    if (name == "none") return ConstraintMode::none();
    if (name == "hard") return ConstraintMode::hard();
    if (name == "soft") {
        if (epsilon <= 0.0)
            throw InputError(errc::invalid_spec, "soft mode needs --epsilon > 0");
        return ConstraintMode::soft(epsilon);
    }
    if (name == "penalty") {
        if (gamma < 0.0)
            throw InputError(errc::invalid_spec, "penalty mode needs --gamma >= 0");
        return ConstraintMode::penalty(gamma);
    }
    throw InputError(errc::invalid_spec, "unknown constraint mode '" + name + "'");
}

std::pair<double, double> output_range(const TaskCollection& collection) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& task : collection.tasks) {
        lo = std::min(lo, task.outputs.minCoeff());
        hi = std::max(hi, task.outputs.maxCoeff());
    }
    return {lo, hi};
}

int task_index(const TaskCollection& collection, int requested) {
    int T = collection.num_tasks();
    if (requested < 0) return T - 1;
    if (requested >= T)
        throw InputError(errc::invalid_spec,
                         "--task " + std::to_string(requested) + " out of range, collection has " +
                             std::to_string(T) + " tasks");
    return requested;
}

struct IngestArgs {
    std::string csv, schema, out = "collection.json", params_out = "standardization.txt";
    bool drop_invalid = false;
    bool no_standardize = false;
    bool sensitive_onehot = false;
    int min_group_rows = 0;
};

void run_ingest(const std::string& out_dir, const IngestArgs& args) {
    Schema schema = load_schema(args.schema);
    std::vector<std::string> dropped;
    TaskCollection collection = load_csv(args.csv, schema, args.drop_invalid, &dropped);
    if (args.min_group_rows > 0)
        collection = drop_small_groups(collection, args.min_group_rows, &dropped);
    if (args.sensitive_onehot) collection = append_sensitive_onehot(collection);

    if (!args.no_standardize) {
        auto [standardized, params] = standardize(collection);
        collection = std::move(standardized);
        std::string params_path = out_path(out_dir, args.params_out);
        save_standardization(params, params_path);
        std::printf("standardization -> %s\n", params_path.c_str());
    }
    std::string path = out_path(out_dir, args.out);
    save_collection(collection, path);
    std::printf("collection -> %s (%d tasks, %d features, %d rows", path.c_str(),
                collection.num_tasks(), collection.dim(), collection.total_rows());
    if (!dropped.empty()) {
        std::printf(", dropped:");
        for (const auto& id : dropped) std::printf(" %s", id.c_str());
    }
    std::printf(")\n");
}

struct SynthArgs {
    std::string spec_file;
    std::string out = "synthetic.json", truth_prefix;
    SyntheticEnvSpec spec{/*d=*/8, /*r_true=*/2, /*T=*/10, /*m=*/100,
                          Eigen::VectorXd(),  /*gap_scale=*/0.5, /*noise_std=*/0.1, /*seed=*/0};
    int gap_axis = 0;
};

void run_synth(const std::string& out_dir, SynthArgs args) {
    if (!args.spec_file.empty()) {
        nlohmann::json j = nlohmann::json::parse(read_text_file(args.spec_file));
        args.spec.d = j.value("d", args.spec.d);
        args.spec.r_true = j.value("r_true", args.spec.r_true);
        args.spec.T = j.value("T", args.spec.T);
        args.spec.m = j.value("m", args.spec.m);
        args.spec.gap_scale = j.value("gap_scale", args.spec.gap_scale);
        args.spec.noise_std = j.value("noise_std", args.spec.noise_std);
        args.spec.seed = j.value("seed", args.spec.seed);
        args.gap_axis = j.value("gap_axis", args.gap_axis);
        if (j.contains("gap_direction")) {
            std::vector<double> v = j["gap_direction"].get<std::vector<double>>();
            args.spec.gap_direction =
                Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
        }
    }
    if (args.spec.gap_direction.size() == 0) {
        if (args.gap_axis < 0 || args.gap_axis >= args.spec.d)
            throw InputError(errc::invalid_spec, "--gap-axis out of range");
        args.spec.gap_direction = Eigen::VectorXd::Unit(args.spec.d, args.gap_axis);
    }
    auto [collection, truth] = generate_synthetic(args.spec);
    std::string path = out_path(out_dir, args.out);
    save_collection(collection, path);
    std::printf("collection -> %s (%d tasks, %d features)\n", path.c_str(),
                collection.num_tasks(), collection.dim());
    if (!args.truth_prefix.empty()) {
        std::string prefix = out_path(out_dir, args.truth_prefix);
        save_matrix(truth.A_star, prefix + ".A_star.mat");
        save_matrix(truth.B_star, prefix + ".B_star.mat");
        std::printf("ground truth -> %s.{A_star,B_star}.mat\n", prefix.c_str());
    }
}

struct TrainArgs {
    std::string collection, out = "model";
    double lambda = 0.01;
    int rank = 2;
    std::string mode = "none";
    double epsilon = 0.0, gamma = 0.0;
    int max_iters = 500;
    double rel_tol = 1e-7;
    std::uint64_t seed = 0;
};

void run_train(const std::string& out_dir, const TrainArgs& args) {
    TaskCollection collection = load_collection(args.collection);
    SolverConfig config;
    config.lambda = args.lambda;
    config.r = args.rank;
    config.mode = parse_mode(args.mode, args.epsilon, args.gamma);
    config.max_outer_iters = args.max_iters;
    config.rel_tol = args.rel_tol;
    config.seed = args.seed;
    FitResult result = fit(collection, config);
    std::string prefix = out_path(out_dir, args.out);
    save_fit_result(result, prefix);
    std::printf("fit -> %s.{A.mat,B.mat,fit.json} (objective %.6g, %zu half-steps, %s, max "
                "||A^T c_t|| = %.3g)\n",
                prefix.c_str(), result.objective_trace.back(),
                result.objective_trace.size() - 1,
                result.converged ? "converged" : "iteration cap hit",
                result.max_constraint_residual);
}

struct TransferArgs {
    std::string fit_prefix, collection, out;
    int task = -1;
    double lambda = -1.0;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool constrain_output = false;
};

void run_transfer(const std::string& out_dir, const TransferArgs& args) {
    FitResult trained = load_fit_result(args.fit_prefix);
    TaskCollection collection = load_collection(args.collection);
    int index = task_index(collection, args.task);
    double lambda = args.lambda > 0 ? args.lambda : trained.config.lambda;
    std::vector<double> levels = infer_output_space(collection);
    TransferEval eval =
        evaluate_transfer(trained.A, collection.tasks[index], lambda, args.train_fraction,
                          args.seed, levels, output_range(collection), args.constrain_output);
    std::printf("task %s: ERR %.4f  FAIR %.4f  (lambda %.3g, %s head)\n",
                collection.tasks[index].task_id.c_str(), eval.err, eval.fair, lambda,
                args.constrain_output ? "output-constrained" : "free");
    if (!args.out.empty()) {
        std::string path = out_path(out_dir, args.out);
        save_matrix(eval.model.w, path);
        std::printf("novel-task weights -> %s\n", path.c_str());
    }
}

struct BoundsArgs {
    std::string fit_prefix, collection, out = "bounds.json";
    double delta = 0.05;
};

void run_bounds(const std::string& out_dir, const BoundsArgs& args) {
    FitResult trained = load_fit_result(args.fit_prefix);
    TaskCollection collection = load_collection(args.collection);
    int m = collection.tasks.front().rows();
    for (const auto& task : collection.tasks) m = std::min(m, task.rows());

    Eigen::MatrixXd Sigma = mean_gap_covariance(collection);
    BoundInputs in;
    in.lambda = trained.config.lambda;
    in.m = m;
    in.T = collection.num_tasks();
    in.r = std::min(collection.dim(), collection.num_tasks());
    in.delta = args.delta;
    in.C_hat_norm = spectral_norm(empirical_total_covariance(collection));
    in.Sigma_hat_norm = spectral_norm(Sigma);

    RiskBoundReport risk = risk_gap_bound(in);
    FairnessBoundReport fairness = fairness_gap_bound(in);
    std::string path = out_path(out_dir, args.out);
    save_bound_report(in, risk, fairness, path);

    Eigen::MatrixXd A = renormalize(trained.A);
    std::printf("risk gap bound %.6g, fairness gap bound %.6g (delta %.3g, smallest task m=%d)\n",
                risk.total, fairness.total, args.delta, m);
    std::printf("fitted representation: avg ||A^T c_t||^2 = %.6g at unit Frobenius norm\n",
                std::max(0.0, (A.transpose() * Sigma * A).trace()));
    std::printf("report -> %s\n", path.c_str());
}

struct GridArgs {
    std::string collection, method = "MTL-Cons", out;
    std::vector<double> lambdas;
    std::vector<int> ranks;
    int folds = 10;
    double shortlist_fraction = 0.90;
    std::uint64_t seed = 0;
    int max_iters = 500;
    double rel_tol = 1e-7;
};

GridSpec build_grid(const std::vector<double>& lambdas, const std::vector<int>& ranks, int folds,
                    double shortlist_fraction, int d) {
    GridSpec grid = GridSpec::defaults(d);
    if (!lambdas.empty()) grid.lambdas = lambdas;
    if (!ranks.empty()) grid.ranks = ranks;
    grid.folds = folds;
    grid.shortlist_fraction = shortlist_fraction;
    grid.validate();
    return grid;
}

void run_gridsearch(const std::string& out_dir, const GridArgs& args) {
    TaskCollection collection = load_collection(args.collection);
    Method method = method_from_name(args.method);
    GridSpec grid = build_grid(args.lambdas, args.ranks, args.folds, args.shortlist_fraction,
                               collection.dim());
    HarnessOptions options;
    options.solver_max_outer_iters = args.max_iters;
    options.solver_rel_tol = args.rel_tol;
    Selection choice = two_step_select(collection, method, grid, infer_output_space(collection),
                                       args.seed, options);
    std::printf("%s: lambda %.6g (index %d), r %d (index %d), CV error %.4f, CV fairness %.4f\n",
                args.method.c_str(), choice.lambda, choice.lambda_index, choice.r,
                choice.rank_index, choice.cv_error, choice.cv_fairness);
    if (!args.out.empty()) {
        nlohmann::json j = {{"method", args.method},
                            {"lambda", choice.lambda},
                            {"lambda_index", choice.lambda_index},
                            {"r", choice.r},
                            {"rank_index", choice.rank_index},
                            {"cv_error", choice.cv_error},
                            {"cv_fairness", choice.cv_fairness}};
        std::string path = out_path(out_dir, args.out);
        write_text_file(path, j.dump(2) + "\n");
        std::printf("selection -> %s\n", path.c_str());
    }
}

struct RunArgs {
    std::string collection, out = "report.json", dataset_name;
    std::vector<std::string> methods;
    std::vector<double> lambdas;
    std::vector<int> ranks;
    int folds = 10;
    double shortlist_fraction = 0.90;
    int repetitions = 30;
    std::uint64_t seed = 0;
    bool no_same_task = false, no_new_task = false;
    bool no_sensitive_in = false, no_sensitive_out = false;
    double train_fraction = 0.7;
    double soft_epsilon = 1e-6;
    int max_iters = 500;
    double rel_tol = 1e-7;
    bool quiet = false;
};

void run_full(const std::string& out_dir, const RunArgs& args) {
    TaskCollection collection = load_collection(args.collection);
    ProtocolConfig config;
    config.grid = build_grid(args.lambdas, args.ranks, args.folds, args.shortlist_fraction,
                             collection.dim());
    config.repetitions = args.repetitions;
    config.seed = args.seed;
    config.options.train_fraction = args.train_fraction;
    config.options.soft_epsilon = args.soft_epsilon;
    config.options.solver_max_outer_iters = args.max_iters;
    config.options.solver_rel_tol = args.rel_tol;
    if (!args.methods.empty()) {
        config.methods.clear();
        for (const auto& name : args.methods) config.methods.push_back(method_from_name(name));
    }
    config.same_task = !args.no_same_task;
    config.new_task = !args.no_new_task;
    config.sensitive_in_arms = !args.no_sensitive_in;
    config.sensitive_out_arms = !args.no_sensitive_out;
    config.dataset_name = args.dataset_name.empty() ? collection.name : args.dataset_name;

    ExperimentReport report = run_protocol(collection, config);
    std::string path = out_path(out_dir, args.out);
    emit_report(report, path);
    if (!args.quiet) std::fputs(render_report_table(report).c_str(), stdout);
    std::printf("report -> %s (+ .txt)\n", path.c_str());
}

struct ReportArgs {
    std::string in, out;
};

void run_report(const std::string& out_dir, const ReportArgs& args) {
    ExperimentReport report = parse_report(args.in);
    std::string table = render_report_table(report);
    std::fputs(table.c_str(), stdout);
    if (!args.out.empty()) {
        std::string path = out_path(out_dir, args.out);
        write_text_file(path, table);
        std::printf("table -> %s\n", path.c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair multitask representation learning"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may appear after the subcommand name
    app.set_config("--config", "", "Read options from a configuration file (INI/TOML)");

    std::string out_dir = ".";
    app.add_option("--output-dir", out_dir, "Directory for relative output paths")
        ->envname("FAIRREP_OUT_DIR")
        ->capture_default_str();

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "CSV + schema -> canonical collection file");
    ingest_cmd->add_option("--csv", ingest.csv, "Input CSV with header row")
        ->required()
        ->check(CLI::ExistingFile);
    ingest_cmd->add_option("--schema", ingest.schema, "Column description file")
        ->required()
        ->check(CLI::ExistingFile);
    ingest_cmd->add_option("--out", ingest.out, "Collection output file")->capture_default_str();
    ingest_cmd->add_option("--params-out", ingest.params_out, "Standardization parameters file")
        ->capture_default_str();
    ingest_cmd->add_flag("--drop-invalid-tasks", ingest.drop_invalid,
                         "Skip tasks that fail validation instead of aborting");
    ingest_cmd->add_option("--min-group-rows", ingest.min_group_rows,
                           "Drop tasks whose smaller sensitive group has fewer rows")
        ->capture_default_str();
    ingest_cmd->add_flag("--no-standardize", ingest.no_standardize,
                         "Keep raw feature and output scales");
    ingest_cmd->add_flag("--sensitive-onehot", ingest.sensitive_onehot,
                         "Append sensitive-group indicator columns to the features");
    ingest_cmd->callback([&] { run_ingest(out_dir, ingest); });

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic collection");
    synth_cmd->add_option("--spec", synth.spec_file, "JSON file with the generator parameters")
        ->check(CLI::ExistingFile);
    synth_cmd->add_option("--d", synth.spec.d, "Feature dimension")->capture_default_str();
    synth_cmd->add_option("--r-true", synth.spec.r_true, "Planted representation rank")
        ->capture_default_str();
    synth_cmd->add_option("--T", synth.spec.T, "Number of tasks")->capture_default_str();
    synth_cmd->add_option("--m", synth.spec.m, "Rows per task")->capture_default_str();
    synth_cmd->add_option("--gap-scale", synth.spec.gap_scale, "Group separation along the gap axis")
        ->capture_default_str();
    synth_cmd->add_option("--noise-std", synth.spec.noise_std, "Output noise level")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.spec.seed, "Generator seed")->capture_default_str();
    synth_cmd->add_option("--gap-axis", synth.gap_axis, "Coordinate axis of the group gap")
        ->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Collection output file")->capture_default_str();
    synth_cmd->add_option("--truth", synth.truth_prefix,
                          "Also save the planted factors under this prefix");
    synth_cmd->callback([&] { run_synth(out_dir, synth); });

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Fit a shared representation");
    train_cmd->add_option("--collection", train.collection, "Collection file")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--lambda", train.lambda, "Ridge weight")->capture_default_str();
    train_cmd->add_option("--rank", train.rank, "Representation rank")->capture_default_str();
    train_cmd->add_option("--mode", train.mode, "Constraint mode")
        ->check(CLI::IsMember({"none", "hard", "soft", "penalty"}))
        ->capture_default_str();
    train_cmd->add_option("--epsilon", train.epsilon, "Average squared-residual budget (soft)");
    train_cmd->add_option("--gamma", train.gamma, "Penalty weight (penalty)");
    train_cmd->add_option("--max-iters", train.max_iters, "Outer iteration cap")
        ->capture_default_str();
    train_cmd->add_option("--rel-tol", train.rel_tol, "Relative convergence tolerance")
        ->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Initialization seed")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output prefix")->capture_default_str();
    train_cmd->callback([&] { run_train(out_dir, train); });

    TransferArgs transfer;
    auto* transfer_cmd =
        app.add_subcommand("transfer", "Fit and score a novel-task head on a frozen representation");
    transfer_cmd->add_option("--fit", transfer.fit_prefix, "Trained model prefix")->required();
    transfer_cmd->add_option("--collection", transfer.collection, "Collection with the novel task")
        ->required()
        ->check(CLI::ExistingFile);
    transfer_cmd->add_option("--task", transfer.task, "Novel task index (default: last)");
    transfer_cmd->add_option("--lambda", transfer.lambda,
                             "Head ridge weight (default: the trained model's)");
    transfer_cmd->add_option("--train-fraction", transfer.train_fraction,
                             "Stratified train share of the novel task")
        ->capture_default_str();
    transfer_cmd->add_option("--seed", transfer.seed, "Split seed")->capture_default_str();
    transfer_cmd->add_flag("--constrain-output", transfer.constrain_output,
                           "Force the head's predictions to have zero group gap");
    transfer_cmd->add_option("--out", transfer.out, "Save the novel-task weight vector here");
    transfer_cmd->callback([&] { run_transfer(out_dir, transfer); });

    BoundsArgs bounds;
    auto* bounds_cmd =
        app.add_subcommand("bounds", "Evaluate the risk and fairness certificates");
    bounds_cmd->add_option("--fit", bounds.fit_prefix, "Trained model prefix")->required();
    bounds_cmd->add_option("--collection", bounds.collection, "Training collection file")
        ->required()
        ->check(CLI::ExistingFile);
    bounds_cmd->add_option("--delta", bounds.delta, "Confidence level")->capture_default_str();
    bounds_cmd->add_option("--out", bounds.out, "Report output file")->capture_default_str();
    bounds_cmd->callback([&] { run_bounds(out_dir, bounds); });

    GridArgs grid;
    auto* grid_cmd = app.add_subcommand("gridsearch", "Two-step hyperparameter selection");
    grid_cmd->add_option("--collection", grid.collection, "Collection file")
        ->required()
        ->check(CLI::ExistingFile);
    grid_cmd->add_option("--method", grid.method, "Method name")->capture_default_str();
    grid_cmd->add_option("--lambdas", grid.lambdas, "Ridge grid (default: the full ladder)");
    grid_cmd->add_option("--ranks", grid.ranks, "Rank grid (default: powers of two times d)");
    grid_cmd->add_option("--folds", grid.folds, "Cross-validation folds")->capture_default_str();
    grid_cmd->add_option("--shortlist-fraction", grid.shortlist_fraction,
                         "Error shortlist threshold")
        ->capture_default_str();
    grid_cmd->add_option("--seed", grid.seed, "Fold seed")->capture_default_str();
    grid_cmd->add_option("--max-iters", grid.max_iters, "Solver iteration cap")
        ->capture_default_str();
    grid_cmd->add_option("--rel-tol", grid.rel_tol, "Solver convergence tolerance")
        ->capture_default_str();
    grid_cmd->add_option("--out", grid.out, "Write the selection as JSON");
    grid_cmd->callback([&] { run_gridsearch(out_dir, grid); });

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Full protocol: select, fit, evaluate, report");
    run_cmd->add_option("--collection", run.collection, "Collection file")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--methods", run.methods,
                        "Methods to run (default: STL-UnCons STL-Cons MTL-UnCons MTL-Cons)");
    run_cmd->add_option("--lambdas", run.lambdas, "Ridge grid override");
    run_cmd->add_option("--ranks", run.ranks, "Rank grid override");
    run_cmd->add_option("--folds", run.folds, "Cross-validation folds")->capture_default_str();
    run_cmd->add_option("--shortlist-fraction", run.shortlist_fraction,
                        "Error shortlist threshold")
        ->capture_default_str();
    run_cmd->add_option("--reps", run.repetitions, "Repetitions per arm")->capture_default_str();
    run_cmd->add_option("--seed", run.seed, "Master seed")->capture_default_str();
    run_cmd->add_flag("--no-same-task", run.no_same_task, "Skip the same-task protocol");
    run_cmd->add_flag("--no-new-task", run.no_new_task, "Skip the novel-task protocol");
    run_cmd->add_flag("--no-sensitive-in", run.no_sensitive_in,
                      "Skip the arms with sensitive indicators in the features");
    run_cmd->add_flag("--no-sensitive-out", run.no_sensitive_out,
                      "Skip the arms without sensitive indicators");
    run_cmd->add_option("--train-fraction", run.train_fraction, "Per-task train share")
        ->capture_default_str();
    run_cmd->add_option("--soft-epsilon", run.soft_epsilon,
                        "Relaxed budget used when hard constraints are infeasible")
        ->capture_default_str();
    run_cmd->add_option("--max-iters", run.max_iters, "Solver iteration cap")
        ->capture_default_str();
    run_cmd->add_option("--rel-tol", run.rel_tol, "Solver convergence tolerance")
        ->capture_default_str();
    run_cmd->add_option("--dataset-name", run.dataset_name, "Name recorded in the report");
    run_cmd->add_option("--out", run.out, "Report output file")->capture_default_str();
    run_cmd->add_flag("--quiet", run.quiet, "Do not print the rendered table");
    run_cmd->callback([&] { run_full(out_dir, run); });

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Render a report file as a table");
    report_cmd->add_option("--in", report.in, "Report JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    report_cmd->add_option("--out", report.out, "Also write the table here");
    report_cmd->callback([&] { run_report(out_dir, report); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
