#include "fairrep/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fairrep/rng.hpp"

namespace fairrep {

namespace {

constexpr double kConstantVarianceFloor = 1e-24;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += ch;
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_number(const std::string& text, const std::string& column, std::size_t row) {
    const char* begin = text.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(value)) {
        throw InputError(errc::invalid_spec, "column '" + column + "' row " +
                                                 std::to_string(row) + ": not a number: '" +
                                                 text + "'");
    }
    return value;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<int> shuffled_group(const std::vector<int>& indices, std::mt19937_64& rng) {
    std::vector<int> out = indices;
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

} // namespace

void TaskDataset::validate() const {
    const int m = rows();
    if (m < 2) throw InputError(errc::too_few_rows, "task '" + task_id + "' has " +
                                                        std::to_string(m) + " rows");
    if (outputs.size() != m || sensitive.size() != m)
        throw InputError(errc::dimension_mismatch,
                         "task '" + task_id + "' rows disagree across fields");
    bool seen1 = false, seen2 = false;
    for (int i = 0; i < m; ++i) {
        if (sensitive[i] == 1) seen1 = true;
        else if (sensitive[i] == 2) seen2 = true;
        else
            throw InputError(errc::invalid_spec, "task '" + task_id + "' sensitive label " +
                                                     std::to_string(sensitive[i]));
    }
    if (!seen1 || !seen2)
        throw InputError(errc::group_missing, "task '" + task_id + "' lacks a sensitive group");
}

int TaskCollection::total_rows() const {
    int n = 0;
    for (const auto& task : tasks) n += task.rows();
    return n;
}

void TaskCollection::validate() const {
    if (tasks.empty()) throw InputError(errc::empty_task, "collection has no tasks");
    const int d = tasks.front().dim();
    std::set<std::string> ids;
    for (const auto& task : tasks) {
        task.validate();
        if (task.dim() != d)
            throw InputError(errc::dimension_mismatch,
                             "task '" + task.task_id + "' feature dimension differs");
        if (!ids.insert(task.task_id).second)
            throw InputError(errc::invalid_spec, "duplicate task id '" + task.task_id + "'");
    }
    if (!feature_columns.empty() && static_cast<int>(feature_columns.size()) != d)
        throw InputError(errc::dimension_mismatch, "feature column list does not match d");
}

TaskCollection load_csv(const std::string& path, const Schema& schema) {
    std::vector<std::string> dropped;
    TaskCollection out = load_csv(path, schema, false, &dropped);
    return out;
}

TaskCollection load_csv(const std::string& path, const Schema& schema, bool drop_invalid_tasks,
                        std::vector<std::string>* dropped_tasks) {
    std::ifstream in(path);
    if (!in) throw InputError(errc::io_error, "cannot open '" + path + "'");

    std::string header_line;
    if (!std::getline(in, header_line))
        throw InputError(errc::io_error, "'" + path + "' is empty");
    if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();

    std::vector<std::string> header = split_csv_line(header_line);
    std::map<std::string, int> column_index;
    for (std::size_t i = 0; i < header.size(); ++i) column_index[trim(header[i])] = static_cast<int>(i);

    auto require_column = [&](const std::string& name) {
        auto it = column_index.find(name);
        if (it == column_index.end())
            throw InputError(errc::missing_column, "column '" + name + "' not in header");
        return it->second;
    };

    const int task_col = require_column(schema.task_column);
    int sensitive_col = -1, output_col = -1;
    std::vector<std::pair<ColumnSpec, int>> feature_specs;
    for (const auto& spec : schema.columns) {
        if (spec.name == schema.task_column)
            throw InputError(errc::invalid_spec, "task column listed among data columns");
        const int idx = require_column(spec.name);
        switch (spec.kind) {
            case ColumnKind::sensitive:
                if (sensitive_col >= 0)
                    throw InputError(errc::invalid_spec, "two sensitive columns");
                sensitive_col = idx;
                break;
            case ColumnKind::output:
                if (output_col >= 0) throw InputError(errc::invalid_spec, "two output columns");
                output_col = idx;
                break;
            default:
                feature_specs.emplace_back(spec, idx);
        }
    }
    if (sensitive_col < 0) throw InputError(errc::invalid_spec, "no sensitive column in schema");
    if (output_col < 0) throw InputError(errc::invalid_spec, "no output column in schema");

    struct RawRow {
        std::vector<std::string> fields;
        std::size_t line_number;
    };
    std::vector<std::string> task_order;
    std::map<std::string, std::vector<RawRow>> rows_by_task;

    std::string line;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw InputError(errc::invalid_spec, "row " + std::to_string(line_number) + " has " +
                                                     std::to_string(fields.size()) +
                                                     " fields, header has " +
                                                     std::to_string(header.size()));
        std::string key = trim(fields[task_col]);
        if (rows_by_task.find(key) == rows_by_task.end()) task_order.push_back(key);
        rows_by_task[key].push_back({std::move(fields), line_number});
    }
    if (task_order.empty()) throw InputError(errc::empty_task, "'" + path + "' has no data rows");

    // Sensitive levels and categorical levels are pooled over the whole file
    // so every task shares one encoding.
    std::set<std::string> sensitive_values;
    std::map<std::string, std::set<std::string>> categorical_levels;
    for (const auto& [key, rows] : rows_by_task) {
        for (const auto& row : rows) {
            sensitive_values.insert(trim(row.fields[sensitive_col]));
            for (const auto& [spec, idx] : feature_specs)
                if (spec.kind == ColumnKind::categorical)
                    categorical_levels[spec.name].insert(trim(row.fields[idx]));
        }
    }
    if (sensitive_values.size() != 2)
        throw InputError(errc::non_binary_sensitive,
                         "sensitive column has " + std::to_string(sensitive_values.size()) +
                             " distinct values");
    std::string positive = schema.sensitive_positive.empty() ? *sensitive_values.begin()
                                                             : schema.sensitive_positive;
    if (!sensitive_values.count(positive))
        throw InputError(errc::invalid_spec,
                         "sensitive positive label '" + positive + "' never occurs");

    std::vector<FeatureColumn> columns;
    for (const auto& [spec, idx] : feature_specs) {
        if (spec.kind == ColumnKind::numeric) {
            columns.push_back({spec.name, FeatureColumn::Source::numeric});
        } else {
            for (const auto& level : categorical_levels[spec.name])
                columns.push_back({spec.name + "=" + level, FeatureColumn::Source::onehot});
        }
    }
    const int d = static_cast<int>(columns.size());

    TaskCollection collection;
    collection.name = path;
    collection.feature_columns = columns;
    for (const auto& key : task_order) {
        const auto& rows = rows_by_task[key];
        const int m = static_cast<int>(rows.size());
        TaskDataset task;
        task.task_id = key;
        task.features.resize(m, d);
        task.outputs.resize(m);
        task.sensitive.resize(m);
        for (int i = 0; i < m; ++i) {
            const auto& row = rows[i];
            int col = 0;
            for (const auto& [spec, idx] : feature_specs) {
                const std::string value = trim(row.fields[idx]);
                if (spec.kind == ColumnKind::numeric) {
                    task.features(i, col++) = parse_number(value, spec.name, row.line_number);
                } else {
                    for (const auto& level : categorical_levels[spec.name])
                        task.features(i, col++) = (value == level) ? 1.0 : 0.0;
                }
            }
            task.outputs[i] =
                parse_number(trim(row.fields[output_col]), "output", row.line_number);
            task.sensitive[i] = (trim(row.fields[sensitive_col]) == positive) ? 1 : 2;
        }
        if (drop_invalid_tasks) {
            try {
                task.validate();
            } catch (const Error&) {
                if (dropped_tasks) dropped_tasks->push_back(key);
                continue;
            }
        }
        collection.tasks.push_back(std::move(task));
    }
    collection.validate();
    return collection;
}

std::pair<TaskCollection, StandardizationParams> standardize(const TaskCollection& collection) {
    collection.validate();
    const int d = collection.dim();
    const int n = collection.total_rows();

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    double output_mean = 0.0;
    for (const auto& task : collection.tasks) {
        mean += task.features.colwise().sum().transpose();
        output_mean += task.outputs.sum();
    }
    mean /= n;
    output_mean /= n;

    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    double output_var = 0.0;
    for (const auto& task : collection.tasks) {
        var += (task.features.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
        output_var += (task.outputs.array() - output_mean).square().sum();
    }
    var /= n;
    output_var /= n;

    StandardizationParams params;
    std::vector<int> kept;
    const auto& names = collection.feature_columns;
    for (int j = 0; j < d; ++j) {
        const std::string name = names.empty() ? "col" + std::to_string(j) : names[j].name;
        const bool is_sensitive_onehot =
            !names.empty() && names[j].source == FeatureColumn::Source::sensitive_onehot;
        if (is_sensitive_onehot) {
            kept.push_back(j);
            params.features.push_back({name, 0.0, 1.0});
            continue;
        }
        if (var[j] <= kConstantVarianceFloor) {
            params.dropped.push_back(name);
            continue;
        }
        kept.push_back(j);
        params.features.push_back({name, mean[j], std::sqrt(var[j])});
    }
    if (kept.empty()) throw InputError(errc::constant_column, "every feature column is constant");

    params.output_standardized = output_var > kConstantVarianceFloor;
    params.output = {"output", output_mean, params.output_standardized ? std::sqrt(output_var) : 1.0};

    TaskCollection out;
    out.name = collection.name;
    out.sensitive_encoded = collection.sensitive_encoded;
    for (std::size_t j = 0; j < kept.size(); ++j) {
        FeatureColumn column =
            names.empty() ? FeatureColumn{params.features[j].name, FeatureColumn::Source::numeric}
                          : names[kept[j]];
        out.feature_columns.push_back(column);
    }
    for (const auto& task : collection.tasks) {
        TaskDataset t;
        t.task_id = task.task_id;
        t.sensitive = task.sensitive;
        t.features.resize(task.rows(), static_cast<int>(kept.size()));
        for (std::size_t j = 0; j < kept.size(); ++j) {
            const auto& e = params.features[j];
            t.features.col(static_cast<int>(j)) =
                (task.features.col(kept[j]).array() - e.mean) / e.scale;
        }
        t.outputs = params.output_standardized
                        ? ((task.outputs.array() - params.output.mean) / params.output.scale).matrix()
                        : task.outputs;
        out.tasks.push_back(std::move(t));
    }
    return {std::move(out), std::move(params)};
}

namespace {

int find_column(const TaskCollection& collection, const std::string& name) {
    for (std::size_t j = 0; j < collection.feature_columns.size(); ++j)
        if (collection.feature_columns[j].name == name) return static_cast<int>(j);
    throw InputError(errc::missing_column, "feature column '" + name + "' not in collection");
}

} // namespace

TaskCollection apply_standardization(const TaskCollection& collection,
                                     const StandardizationParams& params) {
    collection.validate();
    if (collection.feature_columns.empty())
        throw InputError(errc::invalid_spec, "collection lacks column names; cannot match params");
    std::vector<int> source;
    for (const auto& e : params.features) source.push_back(find_column(collection, e.name));

    TaskCollection out;
    out.name = collection.name;
    out.sensitive_encoded = collection.sensitive_encoded;
    for (std::size_t j = 0; j < source.size(); ++j)
        out.feature_columns.push_back(collection.feature_columns[source[j]]);
    for (const auto& task : collection.tasks) {
        TaskDataset t;
        t.task_id = task.task_id;
        t.sensitive = task.sensitive;
        t.features.resize(task.rows(), static_cast<int>(source.size()));
        for (std::size_t j = 0; j < source.size(); ++j) {
            const auto& e = params.features[j];
            t.features.col(static_cast<int>(j)) =
                (task.features.col(source[j]).array() - e.mean) / e.scale;
        }
        t.outputs = params.output_standardized
                        ? ((task.outputs.array() - params.output.mean) / params.output.scale).matrix()
                        : task.outputs;
        out.tasks.push_back(std::move(t));
    }
    return out;
}

TaskCollection invert_standardization(const TaskCollection& collection,
                                      const StandardizationParams& params) {
    collection.validate();
    if (static_cast<std::size_t>(collection.dim()) != params.features.size())
        throw InputError(errc::dimension_mismatch, "params do not match collection width");
    TaskCollection out = collection;
    for (auto& task : out.tasks) {
        for (std::size_t j = 0; j < params.features.size(); ++j) {
            const auto& e = params.features[j];
            task.features.col(static_cast<int>(j)) =
                (task.features.col(static_cast<int>(j)).array() * e.scale + e.mean).matrix();
        }
        if (params.output_standardized)
            task.outputs =
                (task.outputs.array() * params.output.scale + params.output.mean).matrix();
    }
    return out;
}

TaskCollection append_sensitive_onehot(const TaskCollection& collection) {
    collection.validate();
    if (collection.sensitive_encoded)
        throw InputError(errc::double_encoding, "sensitive one-hot columns already appended");
    TaskCollection out = collection;
    out.sensitive_encoded = true;
    if (!out.feature_columns.empty() || collection.tasks.empty()) {
        out.feature_columns.push_back({"sensitive=1", FeatureColumn::Source::sensitive_onehot});
        out.feature_columns.push_back({"sensitive=2", FeatureColumn::Source::sensitive_onehot});
    }
    for (auto& task : out.tasks) {
        const int m = task.rows();
        const int d = task.dim();
        task.features.conservativeResize(m, d + 2);
        for (int i = 0; i < m; ++i) {
            task.features(i, d) = task.sensitive[i] == 1 ? 1.0 : 0.0;
            task.features(i, d + 1) = task.sensitive[i] == 2 ? 1.0 : 0.0;
        }
    }
    return out;
}

TaskDataset take_rows(const TaskDataset& task, const std::vector<int>& rows) {
    TaskDataset out;
    out.task_id = task.task_id;
    out.features.resize(static_cast<int>(rows.size()), task.dim());
    out.outputs.resize(static_cast<int>(rows.size()));
    out.sensitive.resize(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        if (r < 0 || r >= task.rows())
            throw InputError(errc::invalid_spec, "row index out of range");
        out.features.row(static_cast<int>(i)) = task.features.row(r);
        out.outputs[static_cast<int>(i)] = task.outputs[r];
        out.sensitive[static_cast<int>(i)] = task.sensitive[r];
    }
    return out;
}

TaskCollection drop_small_groups(const TaskCollection& collection, int min_per_group,
                                 std::vector<std::string>* dropped_tasks) {
    TaskCollection out;
    out.name = collection.name;
    out.feature_columns = collection.feature_columns;
    out.sensitive_encoded = collection.sensitive_encoded;
    for (const auto& task : collection.tasks) {
        int n1 = 0, n2 = 0;
        for (int i = 0; i < task.rows(); ++i) (task.sensitive[i] == 1 ? n1 : n2)++;
        if (std::min(n1, n2) < min_per_group) {
            if (dropped_tasks) dropped_tasks->push_back(task.task_id);
            continue;
        }
        out.tasks.push_back(task);
    }
    return out;
}

std::pair<TaskDataset, TaskDataset> split_novel_task(const TaskDataset& task,
                                                     double train_fraction, std::uint64_t seed) {
    task.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InputError(errc::invalid_spec, "train fraction must lie strictly inside (0, 1)");

    std::vector<int> group1, group2;
    for (int i = 0; i < task.rows(); ++i) (task.sensitive[i] == 1 ? group1 : group2).push_back(i);
    if (group1.size() < 2 || group2.size() < 2)
        throw InputError(errc::group_depleted,
                         "task '" + task.task_id + "' cannot keep both groups on both sides");

    // Stratified largest-remainder apportionment, then clamp so each side
    // keeps at least one row of each group.
    const double q1 = train_fraction * static_cast<double>(group1.size());
    const double q2 = train_fraction * static_cast<double>(group2.size());
    const long total = std::llround(train_fraction * static_cast<double>(task.rows()));
    long t1 = static_cast<long>(std::floor(q1));
    long t2 = static_cast<long>(std::floor(q2));
    long seats = total - t1 - t2;
    while (seats > 0) {
        if (q1 - std::floor(q1) >= q2 - std::floor(q2) && t1 < static_cast<long>(group1.size())) ++t1;
        else ++t2;
        --seats;
    }
    auto clamp_group = [](long& take, long size, long& other, long other_size) {
        if (take < 1 && other > 1) { ++take; --other; }
        if (take > size - 1 && other < other_size - 1) { --take; ++other; }
    };
    clamp_group(t1, static_cast<long>(group1.size()), t2, static_cast<long>(group2.size()));
    clamp_group(t2, static_cast<long>(group2.size()), t1, static_cast<long>(group1.size()));
    t1 = std::clamp(t1, 1L, static_cast<long>(group1.size()) - 1);
    t2 = std::clamp(t2, 1L, static_cast<long>(group2.size()) - 1);

    auto rng1 = make_rng(seed, 1);
    auto rng2 = make_rng(seed, 2);
    std::vector<int> s1 = shuffled_group(group1, rng1);
    std::vector<int> s2 = shuffled_group(group2, rng2);

    std::vector<int> train(s1.begin(), s1.begin() + t1);
    train.insert(train.end(), s2.begin(), s2.begin() + t2);
    std::vector<int> test(s1.begin() + t1, s1.end());
    test.insert(test.end(), s2.begin() + t2, s2.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {take_rows(task, train), take_rows(task, test)};
}

std::vector<FoldIndices> kfold(const TaskDataset& task, int k, std::uint64_t seed) {
    const int m = task.rows();
    if (k < 2 || m < k)
        throw InputError(errc::too_few_rows,
                         "k=" + std::to_string(k) + " folds need at least k rows, have " +
                             std::to_string(m));

    std::vector<int> group1, group2;
    for (int i = 0; i < m; ++i) (task.sensitive[i] == 1 ? group1 : group2).push_back(i);
    auto rng1 = make_rng(seed, 1);
    auto rng2 = make_rng(seed, 2);
    std::vector<int> order = shuffled_group(group1, rng1);
    std::vector<int> s2 = shuffled_group(group2, rng2);
    order.insert(order.end(), s2.begin(), s2.end());

    // One cursor across the group-ordered rows keeps fold sizes within 1 of
    // each other while spreading each group over the folds.
    std::vector<std::vector<int>> buckets(k);
    for (std::size_t i = 0; i < order.size(); ++i)
        buckets[i % static_cast<std::size_t>(k)].push_back(order[i]);

    std::vector<FoldIndices> folds(k);
    for (int f = 0; f < k; ++f) {
        folds[f].validation = buckets[f];
        std::sort(folds[f].validation.begin(), folds[f].validation.end());
        for (int g = 0; g < k; ++g)
            if (g != f)
                folds[f].train.insert(folds[f].train.end(), buckets[g].begin(), buckets[g].end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

std::pair<TaskCollection, SyntheticTruth> generate_synthetic(const SyntheticEnvSpec& spec) {
    if (spec.d < 2 || spec.r_true < 1 || spec.r_true > spec.d - 1 || spec.T < 1 || spec.m < 2 ||
        spec.gap_scale < 0.0 || spec.noise_std < 0.0)
        throw InputError(errc::invalid_spec, "synthetic environment parameters out of range");
    if (spec.gap_direction.size() != spec.d || spec.gap_direction.norm() == 0.0)
        throw InputError(errc::invalid_spec, "gap direction must be a nonzero length-d vector");

    const Eigen::VectorXd v = spec.gap_direction / spec.gap_direction.norm();
    auto model_rng = make_rng(spec.seed, 0);
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    // Ground-truth representation lives in the orthogonal complement of v, so
    // A*^T v = 0 holds by construction.
    Eigen::MatrixXd G(spec.d, spec.r_true);
    for (int j = 0; j < spec.r_true; ++j)
        for (int i = 0; i < spec.d; ++i) G(i, j) = unit_normal(model_rng);
    G -= v * (v.transpose() * G);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd A_star =
        qr.householderQ() * Eigen::MatrixXd::Identity(spec.d, spec.r_true);
    A_star -= v * (v.transpose() * A_star);

    Eigen::MatrixXd B_star(spec.r_true, spec.T);
    const double head_scale = 1.0 / std::sqrt(static_cast<double>(spec.r_true));
    for (int t = 0; t < spec.T; ++t)
        for (int j = 0; j < spec.r_true; ++j) B_star(j, t) = head_scale * unit_normal(model_rng);

    int id_width = 2;
    for (int rest = spec.T; rest >= 100; rest /= 10) ++id_width;

    TaskCollection collection;
    collection.name = "synthetic";
    for (int j = 0; j < spec.d; ++j)
        collection.feature_columns.push_back({"x" + std::to_string(j), FeatureColumn::Source::numeric});

    for (int t = 0; t < spec.T; ++t) {
        auto rng = make_rng(spec.seed, 1000 + static_cast<std::uint64_t>(t));
        const int m1 = (spec.m + 1) / 2;
        std::vector<int> labels(spec.m, 2);
        std::fill(labels.begin(), labels.begin() + m1, 1);
        std::shuffle(labels.begin(), labels.end(), rng);

        TaskDataset task;
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "task%0*d", id_width, t);
        task.task_id = buffer;
        task.features.resize(spec.m, spec.d);
        task.outputs.resize(spec.m);
        task.sensitive.resize(spec.m);

        const Eigen::VectorXd w = A_star * B_star.col(t);
        const double coord_scale = 1.0 / std::sqrt(static_cast<double>(spec.d));
        for (int i = 0; i < spec.m; ++i) {
            task.sensitive[i] = labels[i];
            const double sign = labels[i] == 1 ? 1.0 : -1.0;
            Eigen::VectorXd x(spec.d);
            double norm = 0.0;
            do {
                for (int j = 0; j < spec.d; ++j) x[j] = coord_scale * unit_normal(rng);
                x += (sign * spec.gap_scale / 2.0) * v;
                norm = x.norm();
            } while (norm < 1e-12);
            x /= norm;
            task.features.row(i) = x.transpose();
            const double y = w.dot(x) + spec.noise_std * unit_normal(rng);
            task.outputs[i] = std::clamp(y, -1.0, 1.0);
        }
        collection.tasks.push_back(std::move(task));
    }
    return {std::move(collection), SyntheticTruth{std::move(A_star), std::move(B_star)}};
}

} // namespace fairrep
