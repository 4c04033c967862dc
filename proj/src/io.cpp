#include "fairrep/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fairrep {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

ConstraintMode mode_from_json(const ordered_json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return ConstraintMode::none();
    if (kind == "hard") return ConstraintMode::hard();
    if (kind == "soft") return ConstraintMode::soft(j.at("epsilon").get<double>());
    if (kind == "penalty") return ConstraintMode::penalty(j.at("gamma").get<double>());
    throw InputError(errc::invalid_spec, "unknown constraint mode '" + kind + "'");
}

ordered_json mode_to_json(const ConstraintMode& mode) {
    ordered_json j;
    switch (mode.kind) {
        case ConstraintMode::Kind::none: j["kind"] = "none"; break;
        case ConstraintMode::Kind::hard: j["kind"] = "hard"; break;
        case ConstraintMode::Kind::soft:
            j["kind"] = "soft";
            j["epsilon"] = mode.epsilon;
            break;
        case ConstraintMode::Kind::penalty:
            j["kind"] = "penalty";
            j["gamma"] = mode.gamma;
            break;
    }
    return j;
}

} // namespace

void save_matrix(const Eigen::MatrixXd& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError(errc::io_error, "cannot write '" + path + "'");
    out << matrix.rows() << " " << matrix.cols() << "\n";
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j) out << " ";
            out << format_double(matrix(i, j));
        }
        out << "\n";
    }
    if (!out) throw InputError(errc::io_error, "write failed for '" + path + "'");
}

Eigen::MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(errc::io_error, "cannot open '" + path + "'");
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0)
        throw InputError(errc::io_error, "bad matrix header in '" + path + "'");
    Eigen::MatrixXd matrix(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            if (!(in >> matrix(i, j)))
                throw InputError(errc::io_error, "truncated matrix in '" + path + "'");
    return matrix;
}

void save_fit_result(const FitResult& result, const std::string& prefix) {
    save_matrix(result.A, prefix + ".A.mat");
    save_matrix(result.B, prefix + ".B.mat");
    ordered_json j;
    j["lambda"] = result.config.lambda;
    j["r"] = result.config.r;
    j["mode"] = mode_to_json(result.config.mode);
    j["max_outer_iters"] = result.config.max_outer_iters;
    j["rel_tol"] = result.config.rel_tol;
    j["seed"] = result.config.seed;
    j["converged"] = result.converged;
    j["objective_trace"] = result.objective_trace;
    j["constraint_residuals"] = result.constraint_residuals;
    j["max_constraint_residual"] = result.max_constraint_residual;
    write_text_file(prefix + ".fit.json", j.dump(2) + "\n");
}

FitResult load_fit_result(const std::string& prefix) {
    FitResult result;
    result.A = load_matrix(prefix + ".A.mat");
    result.B = load_matrix(prefix + ".B.mat");
    ordered_json j = ordered_json::parse(read_text_file(prefix + ".fit.json"));
    result.config.lambda = j.at("lambda").get<double>();
    result.config.r = j.at("r").get<int>();
    result.config.mode = mode_from_json(j.at("mode"));
    result.config.max_outer_iters = j.at("max_outer_iters").get<int>();
    result.config.rel_tol = j.at("rel_tol").get<double>();
    result.config.seed = j.at("seed").get<std::uint64_t>();
    result.converged = j.at("converged").get<bool>();
    result.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    result.constraint_residuals = j.at("constraint_residuals").get<std::vector<double>>();
    result.max_constraint_residual = j.at("max_constraint_residual").get<double>();
    return result;
}

void save_collection(const TaskCollection& collection, const std::string& path) {
    ordered_json j;
    j["name"] = collection.name;
    j["sensitive_encoded"] = collection.sensitive_encoded;
    ordered_json columns = ordered_json::array();
    for (const auto& column : collection.feature_columns) {
        ordered_json c;
        c["name"] = column.name;
        switch (column.source) {
            case FeatureColumn::Source::numeric: c["source"] = "numeric"; break;
            case FeatureColumn::Source::onehot: c["source"] = "onehot"; break;
            case FeatureColumn::Source::sensitive_onehot: c["source"] = "sensitive_onehot"; break;
        }
        columns.push_back(std::move(c));
    }
    j["feature_columns"] = std::move(columns);
    ordered_json tasks = ordered_json::array();
    for (const auto& task : collection.tasks) {
        ordered_json t;
        t["task_id"] = task.task_id;
        ordered_json rows = ordered_json::array();
        for (int i = 0; i < task.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (int k = 0; k < task.dim(); ++k) row.push_back(task.features(i, k));
            rows.push_back(std::move(row));
        }
        t["features"] = std::move(rows);
        t["outputs"] = std::vector<double>(task.outputs.data(), task.outputs.data() + task.rows());
        t["sensitive"] =
            std::vector<int>(task.sensitive.data(), task.sensitive.data() + task.rows());
        tasks.push_back(std::move(t));
    }
    j["tasks"] = std::move(tasks);
    write_text_file(path, j.dump() + "\n");
}

TaskCollection load_collection(const std::string& path) {
    ordered_json j = ordered_json::parse(read_text_file(path));
    TaskCollection collection;
    collection.name = j.at("name").get<std::string>();
    collection.sensitive_encoded = j.at("sensitive_encoded").get<bool>();
    for (const auto& c : j.at("feature_columns")) {
        FeatureColumn column;
        column.name = c.at("name").get<std::string>();
        const std::string source = c.at("source").get<std::string>();
        if (source == "numeric") column.source = FeatureColumn::Source::numeric;
        else if (source == "onehot") column.source = FeatureColumn::Source::onehot;
        else if (source == "sensitive_onehot")
            column.source = FeatureColumn::Source::sensitive_onehot;
        else throw InputError(errc::invalid_spec, "unknown column source '" + source + "'");
        collection.feature_columns.push_back(std::move(column));
    }
    for (const auto& t : j.at("tasks")) {
        TaskDataset task;
        task.task_id = t.at("task_id").get<std::string>();
        const auto& rows = t.at("features");
        const int m = static_cast<int>(rows.size());
        const int d = m > 0 ? static_cast<int>(rows[0].size())
                            : static_cast<int>(collection.feature_columns.size());
        task.features.resize(m, d);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < d; ++k) task.features(i, k) = rows[i][k].get<double>();
        const auto outputs = t.at("outputs").get<std::vector<double>>();
        const auto sensitive = t.at("sensitive").get<std::vector<int>>();
        task.outputs = Eigen::Map<const Eigen::VectorXd>(outputs.data(), m);
        task.sensitive = Eigen::Map<const Eigen::VectorXi>(sensitive.data(), m);
        collection.tasks.push_back(std::move(task));
    }
    collection.validate();
    return collection;
}

void save_standardization(const StandardizationParams& params, const std::string& path) {
    std::ostringstream out;
    out << "# per-column affine transform, population variance convention\n";
    out << "output\t" << (params.output_standardized ? 1 : 0) << "\t" << params.output.name
        << "\t" << format_double(params.output.mean) << "\t" << format_double(params.output.scale)
        << "\n";
    out << "columns\t" << params.features.size() << "\n";
    for (const auto& e : params.features)
        out << e.name << "\t" << format_double(e.mean) << "\t" << format_double(e.scale) << "\n";
    out << "dropped\t" << params.dropped.size() << "\n";
    for (const auto& name : params.dropped) out << name << "\n";
    write_text_file(path, out.str());
}

StandardizationParams load_standardization(const std::string& path) {
    std::istringstream in(read_text_file(path));
    StandardizationParams params;
    std::string line;
    auto next_line = [&]() {
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#') return true;
        return false;
    };
    auto fields = [&](int expected) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            parts.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (static_cast<int>(parts.size()) != expected)
            throw InputError(errc::io_error, "bad line in '" + path + "': " + line);
        return parts;
    };
    if (!next_line()) throw InputError(errc::io_error, "truncated '" + path + "'");
    auto output = fields(5);
    params.output_standardized = output[1] == "1";
    params.output = {output[2], std::stod(output[3]), std::stod(output[4])};
    if (!next_line()) throw InputError(errc::io_error, "truncated '" + path + "'");
    const int n = std::stoi(fields(2)[1]);
    for (int i = 0; i < n; ++i) {
        if (!next_line()) throw InputError(errc::io_error, "truncated '" + path + "'");
        auto parts = fields(3);
        params.features.push_back({parts[0], std::stod(parts[1]), std::stod(parts[2])});
    }
    if (!next_line()) throw InputError(errc::io_error, "truncated '" + path + "'");
    const int dropped = std::stoi(fields(2)[1]);
    for (int i = 0; i < dropped; ++i) {
        if (!next_line()) throw InputError(errc::io_error, "truncated '" + path + "'");
        params.dropped.push_back(line);
    }
    return params;
}

Schema load_schema(const std::string& path) {
    std::istringstream in(read_text_file(path));
    Schema schema;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream tokens(line);
        std::vector<std::string> parts;
        std::string token;
        while (tokens >> token) parts.push_back(token);
        if (parts.empty() || parts[0][0] == '#') continue;
        const auto fail = [&](const std::string& reason) {
            throw InputError(errc::invalid_spec, path + ":" + std::to_string(line_number) + ": " +
                                                     reason);
        };
        if (parts[0] == "task_column") {
            if (parts.size() != 2) fail("task_column takes one name");
            schema.task_column = parts[1];
        } else if (parts[0] == "sensitive_positive") {
            if (parts.size() != 2) fail("sensitive_positive takes one value");
            schema.sensitive_positive = parts[1];
        } else if (parts[0] == "column") {
            // column <name...> <kind>; the name may contain spaces.
            if (parts.size() < 3) fail("column takes a name and a kind");
            std::string name = parts[1];
            for (std::size_t i = 2; i + 1 < parts.size(); ++i) name += " " + parts[i];
            const std::string& kind = parts.back();
            ColumnKind parsed;
            if (kind == "numeric") parsed = ColumnKind::numeric;
            else if (kind == "categorical") parsed = ColumnKind::categorical;
            else if (kind == "sensitive") parsed = ColumnKind::sensitive;
            else if (kind == "output") parsed = ColumnKind::output;
            else { fail("unknown column kind '" + kind + "'"); return schema; }
            schema.columns.push_back({name, parsed});
        } else {
            fail("unknown directive '" + parts[0] + "'");
        }
    }
    if (schema.task_column.empty())
        throw InputError(errc::invalid_spec, path + ": no task_column directive");
    return schema;
}

void save_bound_report(const BoundInputs& inputs, const RiskBoundReport& risk,
                       const FairnessBoundReport& fairness, const std::string& path) {
    ordered_json j;
    ordered_json in;
    in["lambda"] = inputs.lambda;
    in["m"] = inputs.m;
    in["T"] = inputs.T;
    in["r"] = inputs.r;
    in["delta"] = inputs.delta;
    in["total_covariance_norm"] = inputs.C_hat_norm;
    in["gap_covariance_norm"] = inputs.Sigma_hat_norm;
    j["inputs"] = std::move(in);
    ordered_json rj;
    rj["representation_term"] = risk.representation_term;
    rj["task_term"] = risk.task_term;
    rj["covariance_term"] = risk.covariance_term;
    rj["confidence_term"] = risk.confidence_term;
    rj["total"] = risk.total;
    j["risk_gap_bound"] = std::move(rj);
    ordered_json fj;
    fj["fast_term"] = fairness.fast_term;
    fj["slow_term"] = fairness.slow_term;
    fj["total"] = fairness.total;
    j["fairness_gap_bound"] = std::move(fj);
    write_text_file(path, j.dump(2) + "\n");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(errc::io_error, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(errc::io_error, "cannot write '" + path + "'");
    out << content;
    if (!out) throw InputError(errc::io_error, "write failed for '" + path + "'");
}

} // namespace fairrep
