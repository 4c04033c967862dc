#include <doctest.h>

#include <random>

#include "fairrep/metrics.hpp"
#include "fairrep/rng.hpp"
#include "test_util.hpp"

using namespace fairrep;

namespace {

TaskDataset from_rows(const Eigen::MatrixXd& features, const Eigen::VectorXi& sensitive) {
    TaskDataset task;
    task.task_id = "t";
    task.features = features;
    task.outputs = Eigen::VectorXd::Zero(features.rows());
    task.sensitive = sensitive;
    return task;
}

} // namespace

TEST_CASE("group_mean_gap computes the mean difference") {
    Eigen::MatrixXd rows(3, 2);
    rows << 1, 0, 3, 2, 0, 0;
    Eigen::VectorXi sens(3);
    sens << 1, 1, 2;
    GroupMeanGap gap = group_mean_gap(from_rows(rows, sens));
    CHECK(gap.c[0] == doctest::Approx(2.0));
    CHECK(gap.c[1] == doctest::Approx(1.0));
}

TEST_CASE("group_mean_gap is zero for identical group means and errors on a missing group") {
    Eigen::MatrixXd rows(4, 2);
    rows << 1, 2, 3, 4, 3, 4, 1, 2;
    Eigen::VectorXi sens(4);
    sens << 1, 1, 2, 2;
    CHECK(group_mean_gap(from_rows(rows, sens)).c.norm() == doctest::Approx(0.0));

    Eigen::VectorXi all_one = Eigen::VectorXi::Constant(4, 1);
    CHECK_THROWS_AS(group_mean_gap(from_rows(rows, all_one)), InputError);
}

TEST_CASE("group_mean_gap is equivariant under affine feature maps") {
    std::mt19937_64 rng = make_rng(41, 0);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd rows(8, 3);
    Eigen::VectorXi sens(8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 3; ++j) rows(i, j) = normal(rng);
        sens[i] = 1 + i % 2;
    }
    Eigen::MatrixXd S(3, 3);
    Eigen::VectorXd u(3);
    for (int i = 0; i < 3; ++i) {
        u[i] = normal(rng);
        for (int j = 0; j < 3; ++j) S(i, j) = normal(rng);
    }
    Eigen::MatrixXd mapped = (rows * S.transpose()).rowwise() + u.transpose();
    Eigen::VectorXd c = group_mean_gap(from_rows(rows, sens)).c;
    Eigen::VectorXd c_mapped = group_mean_gap(from_rows(mapped, sens)).c;
    CHECK((c_mapped - S * c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("representation_residuals matches explicit products") {
    std::mt19937_64 rng = make_rng(42, 0);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd A(4, 2);
    for (int i = 0; i < A.size(); ++i) A(i / 2, i % 2) = normal(rng);
    std::vector<GroupMeanGap> gaps;
    for (int t = 0; t < 3; ++t) {
        GroupMeanGap gap;
        gap.task_id = "t" + std::to_string(t);
        gap.c.resize(4);
        for (int i = 0; i < 4; ++i) gap.c[i] = normal(rng);
        gaps.push_back(gap);
    }

    FairnessReport report = representation_residuals(A, gaps);
    REQUIRE(report.per_task_residual.size() == 3);
    double mean_sq = 0.0, max_res = 0.0;
    for (int t = 0; t < 3; ++t) {
        double expected = 0.0;
        for (int j = 0; j < 2; ++j) {
            double dot = 0.0;
            for (int i = 0; i < 4; ++i) dot += A(i, j) * gaps[t].c[i];
            expected += dot * dot;
        }
        expected = std::sqrt(expected);
        CHECK(report.per_task_residual[t] == doctest::Approx(expected).epsilon(1e-12));
        mean_sq += expected * expected;
        max_res = std::max(max_res, expected);
    }
    CHECK(report.mean_sq_residual == doctest::Approx(mean_sq / 3.0).epsilon(1e-12));
    CHECK(report.max_residual == doctest::Approx(max_res).epsilon(1e-12));
}

TEST_CASE("representation_residuals special cases") {
    // Columns orthogonal to every gap: all residuals vanish.
    Eigen::MatrixXd A(3, 1);
    A << 0, 0, 1;
    GroupMeanGap gap;
    gap.c.resize(3);
    gap.c << 2, 5, 0;
    FairnessReport zero = representation_residuals(A, {gap});
    CHECK(zero.per_task_residual[0] == doctest::Approx(0.0));

    // A = c/||c||: residual equals ||c||.
    Eigen::MatrixXd Ac = gap.c / gap.c.norm();
    FairnessReport proj = representation_residuals(Ac, {gap});
    CHECK(proj.per_task_residual[0] == doctest::Approx(gap.c.norm()));

    GroupMeanGap wrong;
    wrong.c = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(representation_residuals(A, {wrong}), InputError);
}

TEST_CASE("ddp hand example on two levels") {
    Eigen::VectorXd preds(4);
    preds << 1, 1, 1, -1;
    Eigen::VectorXi sens(4);
    sens << 1, 1, 2, 2;
    CHECK(ddp(preds, sens, {-1.0, 1.0}) == doctest::Approx(0.5));
}

TEST_CASE("ddp is zero when group-wise frequencies coincide") {
    Eigen::VectorXd preds(6);
    preds << 0, 1, 1, 0, 1, 1;
    Eigen::VectorXi sens(6);
    sens << 1, 1, 1, 2, 2, 2;
    CHECK(ddp(preds, sens, {0.0, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("ddp snaps to the nearest level with ties toward the lower") {
    Eigen::VectorXd preds(2);
    preds << 0.5, 0.49; // midpoint of {0,1} goes down; 0.49 also down
    Eigen::VectorXi sens(2);
    sens << 1, 2;
    // Both snap to 0, both groups put all mass on level 0.
    CHECK(ddp(preds, sens, {0.0, 1.0}) == doctest::Approx(0.0));
    CHECK(snap_to_level(0.5, {0.0, 1.0}) == doctest::Approx(0.0));
    CHECK(snap_to_level(0.51, {0.0, 1.0}) == doctest::Approx(1.0));
    CHECK(snap_to_level(-3.0, {0.0, 1.0}) == doctest::Approx(0.0));
    CHECK(snap_to_level(7.0, {0.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("ddp is invariant under monotone relabelings that keep assignments") {
    std::mt19937_64 rng = make_rng(17, 0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    Eigen::VectorXd preds(40);
    Eigen::VectorXi sens(40);
    for (int i = 0; i < 40; ++i) {
        preds[i] = uniform(rng);
        sens[i] = 1 + (i % 3 == 0 ? 0 : 1);
    }
    std::vector<double> levels = {-0.5, 0.0, 0.5};
    double base = ddp(preds, sens, levels);

    // Affine relabeling x -> 2x + 1 preserves nearest-level assignments.
    Eigen::VectorXd preds2 = 2.0 * preds.array() + 1.0;
    std::vector<double> levels2 = {0.0, 1.0, 2.0};
    CHECK(ddp(preds2, sens, levels2) == doctest::Approx(base).epsilon(1e-12));

    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    CHECK_THROWS_AS(ddp(preds, sens, {}), InputError);
    Eigen::VectorXi solo = Eigen::VectorXi::Constant(40, 2);
    CHECK_THROWS_AS(ddp(preds, solo, levels), InputError);
}

TEST_CASE("err_metric is range-normalized mean absolute error in percent") {
    Eigen::VectorXd targets(3), preds(3);
    targets << 0, 2, 4;
    preds << 1, 2, 3;
    CHECK(err_metric(preds, targets, 0.0, 4.0) == doctest::Approx(100.0 * (2.0 / 3.0) / 4.0));

    Eigen::VectorXd t2(2), p2(2);
    t2 << 0, 1;
    p2 << 1, 0;
    CHECK(err_metric(p2, t2, 0.0, 1.0) == doctest::Approx(100.0));
    CHECK(err_metric(t2, t2, 0.0, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(err_metric(p2, t2, 1.0, 1.0), InputError);
    Eigen::VectorXd p3(3);
    p3.setZero();
    CHECK_THROWS_AS(err_metric(p3, t2, 0.0, 1.0), InputError);
}

TEST_CASE("infer_output_space keeps small level sets and grids large ones") {
    TaskDataset task;
    task.task_id = "t";
    task.features = Eigen::MatrixXd::Zero(6, 1);
    task.outputs.resize(6);
    task.outputs << 3, 1, 2, 1, 3, 2;
    task.sensitive.resize(6);
    task.sensitive << 1, 2, 1, 2, 1, 2;
    TaskCollection collection;
    collection.tasks = {task};
    collection.feature_columns = {{"x", FeatureColumn::Source::numeric}};

    std::vector<double> levels = infer_output_space(collection);
    REQUIRE(levels.size() == 3);
    CHECK(levels[0] == doctest::Approx(1.0));
    CHECK(levels[1] == doctest::Approx(2.0));
    CHECK(levels[2] == doctest::Approx(3.0));

    TaskCollection wide = collection;
    wide.tasks[0].features = Eigen::MatrixXd::Zero(100, 1);
    wide.tasks[0].outputs = Eigen::VectorXd::LinSpaced(100, -2.0, 2.0);
    wide.tasks[0].sensitive = Eigen::VectorXi::Constant(100, 2);
    for (int i = 0; i < 100; i += 2) wide.tasks[0].sensitive[i] = 1;
    std::vector<double> grid = infer_output_space(wide);
    REQUIRE(grid.size() == 11);
    CHECK(grid.front() == doctest::Approx(-2.0));
    CHECK(grid.back() == doctest::Approx(2.0));
    CHECK(grid[5] == doctest::Approx(0.0));
}

TEST_CASE("end model weights inherit representation fairness") {
    // |<Ab, c>| <= ||b|| * ||A^T c|| for any head b; exact zero when A^T c = 0.
    std::mt19937_64 rng = make_rng(55, 0);
    std::normal_distribution<double> normal;
    auto collection = testutil::random_collection(5, 2, 4, 40, 5, 0.8);
    auto gaps = group_mean_gaps(collection);
    Eigen::MatrixXd A(5, 2);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = normal(rng);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd b(2);
        b << normal(rng), normal(rng);
        Eigen::VectorXd w = A * b;
        for (const auto& gap : gaps) {
            double lhs = std::abs(w.dot(gap.c));
            double rhs = b.norm() * (A.transpose() * gap.c).norm();
            CHECK(lhs <= rhs + 1e-12);
        }
    }
}
