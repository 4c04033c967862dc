#include "fairrep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fairrep {

GroupMeanGap group_mean_gap(const TaskDataset& task) {
    task.validate();
    const int d = task.dim();
    Eigen::VectorXd sum1 = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(d);
    int n1 = 0, n2 = 0;
    for (int i = 0; i < task.rows(); ++i) {
        if (task.sensitive[i] == 1) {
            sum1 += task.features.row(i).transpose();
            ++n1;
        } else {
            sum2 += task.features.row(i).transpose();
            ++n2;
        }
    }
    return {task.task_id, sum1 / n1 - sum2 / n2};
}

std::vector<GroupMeanGap> group_mean_gaps(const TaskCollection& collection) {
    std::vector<GroupMeanGap> gaps;
    gaps.reserve(collection.tasks.size());
    for (const auto& task : collection.tasks) gaps.push_back(group_mean_gap(task));
    return gaps;
}

FairnessReport representation_residuals(const Eigen::MatrixXd& A,
                                        const std::vector<GroupMeanGap>& gaps) {
    FairnessReport report;
    double sum_sq = 0.0;
    for (const auto& gap : gaps) {
        if (gap.c.size() != A.rows())
            throw InputError(errc::dimension_mismatch,
                             "gap for task '" + gap.task_id + "' does not match A");
        const double residual = (A.transpose() * gap.c).norm();
        report.per_task_residual.push_back(residual);
        report.max_residual = std::max(report.max_residual, residual);
        sum_sq += residual * residual;
    }
    if (!gaps.empty()) report.mean_sq_residual = sum_sq / static_cast<double>(gaps.size());
    return report;
}

double snap_to_level(double value, const std::vector<double>& levels) {
    if (levels.empty()) throw InputError(errc::empty_levels, "no output levels");
    double best = levels.front();
    double best_distance = std::abs(value - best);
    for (double level : levels) {
        const double distance = std::abs(value - level);
        // Strict comparison keeps the first (lower, levels are ascending)
        // level on ties.
        if (distance < best_distance) {
            best = level;
            best_distance = distance;
        }
    }
    return best;
}

double ddp(const Eigen::VectorXd& predictions, const Eigen::VectorXi& sensitive,
           const std::vector<double>& levels) {
    if (levels.empty()) throw InputError(errc::empty_levels, "no output levels");
    if (predictions.size() != sensitive.size())
        throw InputError(errc::dimension_mismatch, "predictions and labels disagree");
    const int L = static_cast<int>(levels.size());
    std::vector<double> count1(L, 0.0), count2(L, 0.0);
    int n1 = 0, n2 = 0;
    for (int i = 0; i < predictions.size(); ++i) {
        const double snapped = snap_to_level(predictions[i], levels);
        int level_index = 0;
        for (int l = 0; l < L; ++l)
            if (levels[l] == snapped) { level_index = l; break; }
        if (sensitive[i] == 1) {
            count1[level_index] += 1.0;
            ++n1;
        } else {
            count2[level_index] += 1.0;
            ++n2;
        }
    }
    if (n1 == 0 || n2 == 0)
        throw InputError(errc::group_missing, "a sensitive group has no predictions");
    double total = 0.0;
    for (int l = 0; l < L; ++l) total += std::abs(count1[l] / n1 - count2[l] / n2);
    return total / L;
}

double err_metric(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets, double lo,
                  double hi) {
    if (predictions.size() != targets.size())
        throw InputError(errc::dimension_mismatch, "predictions and targets disagree");
    if (!(hi > lo)) throw InputError(errc::degenerate_range, "output range is degenerate");
    if (predictions.size() == 0) return 0.0;
    const double mean_abs = (predictions - targets).array().abs().mean();
    return 100.0 * mean_abs / (hi - lo);
}

std::vector<double> infer_output_space(const TaskCollection& collection) {
    collection.validate();
    std::set<double> distinct;
    double lo = collection.tasks.front().outputs[0];
    double hi = lo;
    for (const auto& task : collection.tasks) {
        for (int i = 0; i < task.rows(); ++i) {
            const double y = task.outputs[i];
            lo = std::min(lo, y);
            hi = std::max(hi, y);
            if (distinct.size() <= 32) distinct.insert(y);
        }
    }
    if (distinct.size() <= 32) return {distinct.begin(), distinct.end()};
    if (hi == lo) return {lo};
    std::vector<double> levels(11);
    for (int i = 0; i < 11; ++i) levels[i] = lo + (hi - lo) * i / 10.0;
    return levels;
}

} // namespace fairrep
