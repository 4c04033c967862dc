// Python bindings for the main operations: synthetic data, CSV ingestion,
// training, transfer, metrics, certificates, and the experiment protocol.
// Reports cross the boundary as JSON text; callers decode to dicts.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairrep/bounds.hpp"
#include "fairrep/dataset.hpp"
#include "fairrep/errors.hpp"
#include "fairrep/harness.hpp"
#include "fairrep/io.hpp"
#include "fairrep/metrics.hpp"
#include "fairrep/solver.hpp"
#include "fairrep/transfer.hpp"

namespace py = pybind11;
using namespace fairrep;

namespace {

ConstraintMode make_mode(const std::string& mode, double epsilon, double gamma) {
    if (mode == "none") return ConstraintMode::none();
    if (mode == "hard") return ConstraintMode::hard();
    if (mode == "soft") {
        if (epsilon <= 0.0) throw InputError(errc::invalid_spec, "soft mode needs epsilon > 0");
        return ConstraintMode::soft(epsilon);
    }
    if (mode == "penalty") {
        if (gamma < 0.0) throw InputError(errc::invalid_spec, "penalty mode needs gamma >= 0");
        return ConstraintMode::penalty(gamma);
    }
    throw InputError(errc::invalid_spec, "unknown constraint mode '" + mode + "'");
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> methods;
    for (const auto& name : names) methods.push_back(method_from_name(name));
    return methods;
}

} // namespace

PYBIND11_MODULE(_fairrep, m) {
    m.doc() = "Fair multitask representation learning";

    py::register_exception<InputError>(m, "InputError");
    py::register_exception<NumericalError>(m, "NumericalError");

    py::class_<TaskDataset>(m, "TaskDataset")
        .def(py::init<>())
        .def_readwrite("task_id", &TaskDataset::task_id)
        .def_readwrite("features", &TaskDataset::features)
        .def_readwrite("outputs", &TaskDataset::outputs)
        .def_readwrite("sensitive", &TaskDataset::sensitive)
        .def("rows", &TaskDataset::rows)
        .def("dim", &TaskDataset::dim)
        .def("__repr__", [](const TaskDataset& t) {
            return "TaskDataset('" + t.task_id + "', " + std::to_string(t.rows()) + "x" +
                   std::to_string(t.dim()) + ")";
        });

    py::class_<TaskCollection>(m, "TaskCollection")
        .def(py::init<>())
        .def_readwrite("name", &TaskCollection::name)
        // Access copies the task list; reassign `tasks` to mutate in place.
        .def_readwrite("tasks", &TaskCollection::tasks)
        .def("dim", &TaskCollection::dim)
        .def("num_tasks", &TaskCollection::num_tasks)
        .def("total_rows", &TaskCollection::total_rows)
        .def("__repr__", [](const TaskCollection& c) {
            return "TaskCollection('" + c.name + "', " + std::to_string(c.num_tasks()) +
                   " tasks, d=" + std::to_string(c.dim()) + ")";
        });

    py::class_<StandardizationParams>(m, "StandardizationParams")
        .def("__repr__", [](const StandardizationParams& p) {
            return "StandardizationParams(" + std::to_string(p.features.size()) + " columns)";
        });

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("A", &FitResult::A)
        .def_readonly("B", &FitResult::B)
        .def_readonly("objective_trace", &FitResult::objective_trace)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("constraint_residuals", &FitResult::constraint_residuals)
        .def_readonly("max_constraint_residual", &FitResult::max_constraint_residual)
        .def_property_readonly("lam", [](const FitResult& r) { return r.config.lambda; })
        .def_property_readonly("r", [](const FitResult& r) { return r.config.r; })
        .def_property_readonly("mode", [](const FitResult& r) { return r.config.mode.label(); });

    // Data ----------------------------------------------------------------

    m.def(
        "generate_synthetic",
        [](int d, int r_true, int T, int m, double gap_scale, double noise_std,
           std::uint64_t seed, int gap_axis) {
            SyntheticEnvSpec spec;
            spec.d = d;
            spec.r_true = r_true;
            spec.T = T;
            spec.m = m;
            if (gap_axis < 0 || gap_axis >= d)
                throw InputError(errc::invalid_spec, "gap_axis out of range");
            spec.gap_direction = Eigen::VectorXd::Unit(d, gap_axis);
            spec.gap_scale = gap_scale;
            spec.noise_std = noise_std;
            spec.seed = seed;
            auto [collection, truth] = generate_synthetic(spec);
            return py::make_tuple(collection, truth.A_star, truth.B_star);
        },
        py::arg("d"), py::arg("r_true"), py::arg("T"), py::arg("m"),
        py::arg("gap_scale") = 0.5, py::arg("noise_std") = 0.1, py::arg("seed") = 0,
        py::arg("gap_axis") = 0,
        "Sphere-input synthetic collection; returns (collection, A_star, B_star).");

    m.def(
        "load_csv",
        [](const std::string& csv, const std::string& schema_path, bool drop_invalid_tasks,
           int min_group_rows) {
            Schema schema = load_schema(schema_path);
            std::vector<std::string> dropped;
            TaskCollection collection = load_csv(csv, schema, drop_invalid_tasks, &dropped);
            if (min_group_rows > 0)
                collection = drop_small_groups(collection, min_group_rows, &dropped);
            return py::make_tuple(collection, dropped);
        },
        py::arg("csv"), py::arg("schema"), py::arg("drop_invalid_tasks") = false,
        py::arg("min_group_rows") = 0,
        "Read CSV + schema file; returns (collection, dropped_task_ids).");

    m.def("standardize", [](const TaskCollection& collection) {
        auto [standardized, params] = standardize(collection);
        return py::make_tuple(standardized, params);
    });
    m.def("apply_standardization", &apply_standardization);
    m.def("append_sensitive_onehot", &append_sensitive_onehot);
    m.def("save_collection", &save_collection, py::arg("collection"), py::arg("path"));
    m.def("load_collection", &load_collection, py::arg("path"));
    m.def("save_standardization", &save_standardization, py::arg("params"), py::arg("path"));
    m.def("load_standardization", &load_standardization, py::arg("path"));

    // Training ------------------------------------------------------------

    m.def(
        "fit",
        [](const TaskCollection& collection, double lam, int r, const std::string& mode,
           double epsilon, double gamma, int max_iters, double rel_tol, std::uint64_t seed) {
            SolverConfig config;
            config.lambda = lam;
            config.r = r;
            config.mode = make_mode(mode, epsilon, gamma);
            config.max_outer_iters = max_iters;
            config.rel_tol = rel_tol;
            config.seed = seed;
            return fit(collection, config);
        },
        py::arg("collection"), py::arg("lam"), py::arg("r"), py::arg("mode") = "none",
        py::arg("epsilon") = 0.0, py::arg("gamma") = 0.0, py::arg("max_iters") = 500,
        py::arg("rel_tol") = 1e-7, py::arg("seed") = 0,
        "Alternating minimization for the shared representation; mode is one of "
        "none/hard/soft/penalty.");

    m.def(
        "fit_output_constrained",
        [](const TaskCollection& collection, double lam, int r, int max_iters, double rel_tol,
           std::uint64_t seed) {
            SolverConfig config;
            config.lambda = lam;
            config.r = r;
            config.max_outer_iters = max_iters;
            config.rel_tol = rel_tol;
            config.seed = seed;
            return fit_m1_output_constrained(collection, config);
        },
        py::arg("collection"), py::arg("lam"), py::arg("r"), py::arg("max_iters") = 500,
        py::arg("rel_tol") = 1e-7, py::arg("seed") = 0,
        "Variant constraining each task's predictions instead of the shared representation.");

    m.def("fit_stl", &fit_stl, py::arg("task"), py::arg("lam"),
          py::arg("constrain_gap") = false, "Single-task ridge weights.");
    m.def("renormalize", &renormalize, "Rescale to unit Frobenius norm.");

    // Transfer ------------------------------------------------------------

    m.def(
        "fit_new_task",
        [](const Eigen::MatrixXd& A, const TaskDataset& task, double lam, bool constrain_output) {
            TransferModel model = constrain_output ? fit_new_task_output_constrained(A, task, lam)
                                                   : fit_new_task(A, task, lam);
            return py::make_tuple(model.b, model.w);
        },
        py::arg("A"), py::arg("task"), py::arg("lam"), py::arg("constrain_output") = false,
        "Head on a frozen representation; returns (b, w).");

    m.def(
        "evaluate_transfer",
        [](const Eigen::MatrixXd& A, const TaskDataset& task, double lam, double train_fraction,
           std::uint64_t seed, const std::vector<double>& levels,
           std::pair<double, double> range, bool constrain_output) {
            TransferEval eval =
                evaluate_transfer(A, task, lam, train_fraction, seed, levels, range,
                                  constrain_output);
            py::dict out;
            out["err"] = eval.err;
            out["fair"] = eval.fair;
            out["b"] = eval.model.b;
            out["w"] = eval.model.w;
            return out;
        },
        py::arg("A"), py::arg("task"), py::arg("lam"), py::arg("train_fraction") = 0.7,
        py::arg("seed") = 0, py::arg("levels") = std::vector<double>(),
        py::arg("range") = std::pair<double, double>(-1.0, 1.0),
        py::arg("constrain_output") = false,
        "Split the novel task, fit the head, score ERR and ddp on the held-out rows.");

    // Metrics -------------------------------------------------------------

    m.def("group_mean_gap",
          [](const TaskDataset& task) { return group_mean_gap(task).c; },
          "Group-1 minus group-2 feature means.");
    m.def(
        "representation_residuals",
        [](const Eigen::MatrixXd& A, const TaskCollection& collection) {
            FairnessReport report = representation_residuals(A, group_mean_gaps(collection));
            py::dict out;
            out["per_task"] = report.per_task_residual;
            out["mean_sq"] = report.mean_sq_residual;
            out["max"] = report.max_residual;
            return out;
        },
        py::arg("A"), py::arg("collection"), "||A^T c_t|| per task plus aggregates.");
    m.def("ddp", &ddp, py::arg("predictions"), py::arg("sensitive"), py::arg("levels"),
          "Demographic parity difference over snapped output levels.");
    m.def("err_metric", &err_metric, py::arg("predictions"), py::arg("targets"), py::arg("lo"),
          py::arg("hi"), "Range-normalized mean absolute error in percent.");
    m.def("infer_output_space", &infer_output_space);

    // Certificates --------------------------------------------------------

    m.def("empirical_total_covariance", &empirical_total_covariance);
    m.def("mean_gap_covariance", &mean_gap_covariance);
    m.def("spectral_norm", &spectral_norm, py::arg("psd"), py::arg("tol") = 1e-9,
          py::arg("max_iters") = 10000, py::arg("seed") = 0);

    m.def(
        "risk_gap_bound",
        [](double lam, double m_, double T, double delta, double C_hat_norm) {
            BoundInputs in;
            in.lambda = lam;
            in.m = m_;
            in.T = T;
            in.r = 1; // unused by the risk terms, must still validate
            in.delta = delta;
            in.C_hat_norm = C_hat_norm;
            RiskBoundReport report = risk_gap_bound(in);
            py::dict out;
            out["representation_term"] = report.representation_term;
            out["task_term"] = report.task_term;
            out["covariance_term"] = report.covariance_term;
            out["confidence_term"] = report.confidence_term;
            out["total"] = report.total;
            return out;
        },
        py::arg("lam"), py::arg("m"), py::arg("T"), py::arg("delta") = 0.05,
        py::arg("C_hat_norm") = 0.0, "Transfer risk certificate terms.");

    m.def(
        "fairness_gap_bound",
        [](double T, double r, double delta, double Sigma_hat_norm) {
            BoundInputs in;
            in.m = 1; // unused by the fairness terms, must still validate
            in.T = T;
            in.r = r;
            in.delta = delta;
            in.Sigma_hat_norm = Sigma_hat_norm;
            FairnessBoundReport report = fairness_gap_bound(in);
            py::dict out;
            out["fast_term"] = report.fast_term;
            out["slow_term"] = report.slow_term;
            out["total"] = report.total;
            return out;
        },
        py::arg("T"), py::arg("r"), py::arg("delta") = 0.05, py::arg("Sigma_hat_norm") = 0.0,
        "Fairness deviation certificate terms.");

    // Protocol ------------------------------------------------------------

    m.def(
        "grid_defaults",
        [](int d) {
            GridSpec grid = GridSpec::defaults(d);
            return py::make_tuple(grid.lambdas, grid.ranks);
        },
        py::arg("d"), "Default (lambda, rank) grids for feature dimension d.");

    m.def(
        "run_protocol_json",
        [](const TaskCollection& collection, const std::vector<std::string>& methods,
           const std::vector<double>& lambdas, const std::vector<int>& ranks, int folds,
           int repetitions, std::uint64_t seed, bool same_task, bool new_task,
           bool sensitive_in, bool sensitive_out, const std::string& dataset_name,
           int max_iters, double rel_tol) {
            ProtocolConfig config;
            config.grid.lambdas = lambdas;
            config.grid.ranks = ranks;
            config.grid.folds = folds;
            config.repetitions = repetitions;
            config.seed = seed;
            config.options.solver_max_outer_iters = max_iters;
            config.options.solver_rel_tol = rel_tol;
            if (!methods.empty()) config.methods = parse_methods(methods);
            config.same_task = same_task;
            config.new_task = new_task;
            config.sensitive_in_arms = sensitive_in;
            config.sensitive_out_arms = sensitive_out;
            config.dataset_name = dataset_name.empty() ? collection.name : dataset_name;
            return report_to_json(run_protocol(collection, config));
        },
        py::arg("collection"), py::arg("methods") = std::vector<std::string>(),
        py::arg("lambdas") = std::vector<double>(), py::arg("ranks") = std::vector<int>(),
        py::arg("folds") = 10, py::arg("repetitions") = 30, py::arg("seed") = 0,
        py::arg("same_task") = true, py::arg("new_task") = true,
        py::arg("sensitive_in") = true, py::arg("sensitive_out") = true,
        py::arg("dataset_name") = "", py::arg("max_iters") = 500, py::arg("rel_tol") = 1e-7,
        "Full experiment protocol; returns the report as JSON text.");

    m.def(
        "render_report_table",
        [](const std::string& json) { return render_report_table(report_from_json(json)); },
        py::arg("report_json"), "Human-readable table for a report JSON string.");
}
