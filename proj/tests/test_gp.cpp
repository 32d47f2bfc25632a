#include <catch2/catch.hpp>

#include <Eigen/Dense>

#include "brne/gp.hpp"

using namespace brne;

TEST_CASE("pedestrian_mean integrates the constant-velocity model") {
    const TimeGrid grid{3, 0.1};
    const auto mean = pedestrian_mean({{0, 0}, {1, 0}, 7}, grid);
    CHECK(mean[0].x == Approx(0.0));
    CHECK(mean[1].x == Approx(0.1));
    CHECK(mean[2].x == Approx(0.2));
    CHECK(mean[2].y == Approx(0.0));

    const auto still = pedestrian_mean({{2, -1}, {0, 0}, 7}, grid);
    for (int t = 0; t < 3; ++t) {
        CHECK(still[t].x == Approx(2.0));
        CHECK(still[t].y == Approx(-1.0));
    }

    const TimeGrid coarse{3, 0.5};
    const auto moving = pedestrian_mean({{1, 1}, {-1, 2}, 7}, coarse);
    CHECK(moving[2].x == Approx(0.0));
    CHECK(moving[2].y == Approx(3.0));
}

TEST_CASE("robot_mean clamps at the goal") {
    const TimeGrid grid{4, 0.5};
    const auto mean = robot_mean({0, 0}, {1, 0}, 1.0, grid);
    CHECK(mean[0].x == Approx(0.0));
    CHECK(mean[1].x == Approx(0.5));
    CHECK(mean[2].x == Approx(1.0));
    CHECK(mean[3].x == Approx(1.0));

    const auto pinned = robot_mean({2, 3}, {2, 3}, 1.0, grid);
    for (int t = 0; t < 4; ++t) {
        CHECK(pinned[t].x == Approx(2.0));
        CHECK(pinned[t].y == Approx(3.0));
    }

    // Horizon covers 2 m of a 10 m segment.
    const TimeGrid two_m{3, 1.0};
    const auto partial = robot_mean({0, 0}, {10, 0}, 1.0, two_m);
    CHECK(partial[2].x == Approx(2.0));
}

TEST_CASE("condition_gp with no anchors reproduces the kernel Gram matrix") {
    const TimeGrid grid{12, 0.25};
    const KernelSpec kernel{0.5, 1.0};
    Trajectory mean;
    mean.points.assign(12, Vec2{0, 0});
    const auto nominal = condition_gp(kernel, mean, {}, grid);
    const Eigen::MatrixXd gram = detail::rbf_gram(kernel, grid);
    const Eigen::MatrixXd reconstructed =
        nominal.cov_factor * nominal.cov_factor.transpose();
    // Equal up to the factorization jitter (at most 1e-4 * variance).
    CHECK((reconstructed - gram).cwiseAbs().maxCoeff() < 1.5e-4 * kernel.variance);
}

TEST_CASE("condition_gp pins sampled trajectories near a tight anchor") {
    const TimeGrid grid{10, 0.2};
    const KernelSpec kernel{0.4, 1.0};
    Trajectory mean;
    for (int t = 0; t < 10; ++t) mean.points.push_back({0.5 * t, 1.0});
    GPConditioning cond;
    cond.anchors.push_back({0, mean[0], 1e-3});
    const auto nominal = condition_gp(kernel, mean, cond, grid);
    const auto samples = sample_trajectories(nominal, 200, 99);
    for (const auto& sample : samples.samples)
        CHECK(distance(sample[0], mean[0]) < 4e-3);  // ~3 sigma plus slack
    CHECK(nominal.marginal_std(0) == Approx(1e-3).epsilon(0.10));
}

TEST_CASE("condition_gp with both ends anchored is near-interpolating") {
    const TimeGrid grid{20, 0.1};
    const KernelSpec kernel{1.0, 50.0};  // lengthscale far beyond the horizon
    Trajectory mean;
    for (int t = 0; t < 20; ++t) mean.points.push_back({0.1 * t, 0.0});
    GPConditioning cond;
    cond.anchors.push_back({0, mean[0], 1e-3});
    cond.anchors.push_back({19, mean[19], 1e-3});
    const auto nominal = condition_gp(kernel, mean, cond, grid);
    for (int t = 0; t < 20; ++t) CHECK(nominal.marginal_std(t) < 0.1);
}

TEST_CASE("condition_gp posterior mean passes through anchor values") {
    const TimeGrid grid{15, 0.2};
    const KernelSpec kernel{0.3, 1.2};
    Trajectory mean;
    for (int t = 0; t < 15; ++t) mean.points.push_back({0.2 * t, 0.0});
    GPConditioning cond;
    cond.anchors.push_back({0, {0.0, 0.5}, 1e-3});  // shifted off the mean
    cond.anchors.push_back({14, {2.8, -0.25}, 1e-3});
    const auto nominal = condition_gp(kernel, mean, cond, grid);
    CHECK(nominal.mean[0].y == Approx(0.5).margin(2e-5));
    CHECK(nominal.mean[14].y == Approx(-0.25).margin(2e-5));
    // Marginal std at each anchor stays within 10% of the requested value.
    CHECK(nominal.marginal_std(0) == Approx(1e-3).epsilon(0.10));
    CHECK(nominal.marginal_std(14) == Approx(1e-3).epsilon(0.10));
}

TEST_CASE("condition_gp validates anchors") {
    const TimeGrid grid{5, 0.1};
    const KernelSpec kernel{};
    Trajectory mean;
    mean.points.assign(5, Vec2{});
    GPConditioning bad_index;
    bad_index.anchors.push_back({7, {0, 0}, 1e-3});
    CHECK_THROWS_AS(condition_gp(kernel, mean, bad_index, grid), Error);
    GPConditioning unsorted;
    unsorted.anchors.push_back({3, {0, 0}, 1e-3});
    unsorted.anchors.push_back({1, {0, 0}, 1e-3});
    CHECK_THROWS_AS(condition_gp(kernel, mean, unsorted, grid), Error);
    GPConditioning zero_std;
    zero_std.anchors.push_back({0, {0, 0}, 0.0});
    CHECK_THROWS_AS(condition_gp(kernel, mean, zero_std, grid), Error);
}

TEST_CASE("posterior covariance is symmetric PSD before jitter") {
    const TimeGrid grid{16, 0.2};
    const KernelSpec kernel{0.6, 1.5};
    Trajectory mean;
    mean.points.assign(16, Vec2{});
    GPConditioning cond;
    cond.anchors.push_back({0, {0, 0}, 1e-3});
    cond.anchors.push_back({15, {0, 0}, 0.2});

    // Rebuild the posterior covariance the same way condition_gp does.
    const Eigen::MatrixXd gram = detail::rbf_gram(kernel, grid);
    Eigen::MatrixXd cross(16, 2), anchor_gram(2, 2);
    const int idx[2] = {0, 15};
    const double stds[2] = {1e-3, 0.2};
    for (int a = 0; a < 2; ++a) {
        cross.col(a) = gram.col(idx[a]);
        for (int b = 0; b < 2; ++b) anchor_gram(a, b) = gram(idx[a], idx[b]);
        anchor_gram(a, a) += stds[a] * stds[a];
    }
    Eigen::MatrixXd cov = gram - cross * anchor_gram.llt().solve(cross.transpose());
    cov = 0.5 * (cov + cov.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(cov);
    CHECK(eigen.eigenvalues().minCoeff() > -1e-8);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("anchor stddev monotonically controls posterior variance") {
    const TimeGrid grid{10, 0.2};
    const KernelSpec kernel{0.5, 1.0};
    Trajectory mean;
    mean.points.assign(10, Vec2{});
    const auto marginal_at_anchor = [&](double stddev) {
        GPConditioning cond;
        cond.anchors.push_back({4, {0, 0}, stddev});
        return condition_gp(kernel, mean, cond, grid).marginal_std(4);
    };
    const double tight = marginal_at_anchor(1e-3);
    const double loose = marginal_at_anchor(0.2);
    CHECK(tight < loose);
    CHECK(tight < 2e-3);
}

TEST_CASE("sample_trajectories matches the nominal mean and variance") {
    const TimeGrid grid{8, 0.25};
    const KernelSpec kernel{0.5, 1.0};
    Trajectory mean;
    for (int t = 0; t < 8; ++t) mean.points.push_back({0.3 * t, -0.1 * t});
    const auto nominal = condition_gp(kernel, mean, {}, grid);
    const int m = 1000;
    const auto strategy = sample_trajectories(nominal, m, 2024);

    for (int t = 0; t < 8; ++t) {
        const double sigma = nominal.marginal_std(t);
        const double se_mean = sigma / std::sqrt(static_cast<double>(m));
        double mx = 0.0, my = 0.0;
        for (const auto& s : strategy.samples) {
            mx += s[t].x / m;
            my += s[t].y / m;
        }
        CHECK(std::abs(mx - nominal.mean[t].x) < 5.0 * se_mean);
        CHECK(std::abs(my - nominal.mean[t].y) < 5.0 * se_mean);

        double vx = 0.0, cross_xy = 0.0;
        for (const auto& s : strategy.samples) {
            vx += (s[t].x - mx) * (s[t].x - mx) / (m - 1);
            cross_xy += (s[t].x - mx) * (s[t].y - my) / (m - 1);
        }
        const double var = sigma * sigma;
        const double se_var = var * std::sqrt(2.0 / (m - 1));
        CHECK(std::abs(vx - var) < 5.0 * se_var);
        // Axes are sampled independently.
        CHECK(std::abs(cross_xy) < 5.0 * var / std::sqrt(static_cast<double>(m)));
    }
}

TEST_CASE("sample_trajectories is deterministic for a fixed seed") {
    const TimeGrid grid{6, 0.2};
    const KernelSpec kernel{0.4, 0.8};
    Trajectory mean;
    mean.points.assign(6, Vec2{1, 1});
    const auto nominal = condition_gp(kernel, mean, {}, grid);
    const auto a = sample_trajectories(nominal, 25, 77);
    const auto b = sample_trajectories(nominal, 25, 77);
    for (int j = 0; j < 25; ++j)
        for (int t = 0; t < 6; ++t) {
            CHECK(a.samples[j][t].x == b.samples[j][t].x);
            CHECK(a.samples[j][t].y == b.samples[j][t].y);
        }
    const auto c = sample_trajectories(nominal, 25, 78);
    CHECK(a.samples[0][0].x != c.samples[0][0].x);
}
