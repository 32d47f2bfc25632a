#include <catch2/catch.hpp>

#include "brne/core.hpp"
#include "brne/rng.hpp"

using namespace brne;

namespace {

Trajectory make_traj(std::initializer_list<Vec2> points) {
    Trajectory t;
    t.points = points;
    return t;
}

SampledMixedStrategy make_strategy(std::vector<Trajectory> samples, std::vector<double> weights) {
    SampledMixedStrategy s;
    s.grid = {static_cast<int>(samples[0].points.size()), 0.1};
    s.samples = std::move(samples);
    s.weights = std::move(weights);
    s.nominal_weights.assign(s.weights.size(), 1.0);
    return s;
}

}  // namespace

TEST_CASE("normalize_weights rescales to mean one") {
    CHECK(normalize_weights({2.0, 2.0, 2.0}) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(normalize_weights({1.0, 3.0}) == std::vector<double>{0.5, 1.5});
    CHECK(normalize_weights({0.0, 0.0, 5.0}) == std::vector<double>{0.0, 0.0, 3.0});
}

TEST_CASE("normalize_weights rejects degenerate input") {
    CHECK_THROWS_AS(normalize_weights({0.0, 0.0}), DegenerateWeightsError);
    CHECK_THROWS_AS(normalize_weights({1.0, std::nan("")}), DegenerateWeightsError);
    CHECK_THROWS_AS(normalize_weights({1.0, -0.5}), DegenerateWeightsError);
    CHECK_THROWS_AS(normalize_weights({}), DegenerateWeightsError);
}

TEST_CASE("normalize_weights is idempotent") {
    Rng rng(42);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> weights(10);
        for (double& w : weights) w = rng.uniform(0.0, 5.0);
        const auto once = normalize_weights(weights);
        const auto twice = normalize_weights(once);
        for (size_t j = 0; j < once.size(); ++j)
            CHECK(twice[j] == Approx(once[j]).margin(1e-12).epsilon(1e-12));
    }
}

TEST_CASE("weighted_mean_trajectory averages symmetric lines to zero") {
    const auto up = make_traj({{0, 1}, {1, 1}, {2, 1}});
    const auto down = make_traj({{0, -1}, {1, -1}, {2, -1}});
    const auto mean = weighted_mean_trajectory(make_strategy({up, down}, {1.0, 1.0}));
    for (int t = 0; t < 3; ++t) {
        CHECK(mean[t].y == Approx(0.0).margin(1e-15));
        CHECK(mean[t].x == Approx(t).margin(1e-15));
    }
}

TEST_CASE("weighted_mean_trajectory identity for a single sample") {
    const auto s = make_traj({{0.5, -0.25}, {1.5, 0.75}});
    const auto mean = weighted_mean_trajectory(make_strategy({s}, {1.0}));
    CHECK(mean[0].x == s[0].x);
    CHECK(mean[1].y == s[1].y);
}

TEST_CASE("weighted_mean_trajectory applies importance weights") {
    const auto a = make_traj({{0, 0}, {0, 0}});
    const auto b = make_traj({{2, 0}, {2, 0}});
    const auto mean = weighted_mean_trajectory(make_strategy({a, b}, {0.5, 1.5}));
    CHECK(mean[0].x == Approx(1.5));
    CHECK(mean[0].y == Approx(0.0));
}

TEST_CASE("weighted_mean_trajectory rejects empty sample sets") {
    SampledMixedStrategy empty;
    CHECK_THROWS_AS(weighted_mean_trajectory(empty), Error);
}

TEST_CASE("weighted mean with uniform weights equals the sample mean") {
    Rng rng(7);
    std::vector<Trajectory> samples;
    for (int j = 0; j < 5; ++j) {
        Trajectory t;
        for (int k = 0; k < 4; ++k) t.points.push_back({rng.normal(), rng.normal()});
        samples.push_back(t);
    }
    const auto mean = weighted_mean_trajectory(
        make_strategy(samples, std::vector<double>(5, 1.0)));
    for (int k = 0; k < 4; ++k) {
        double mx = 0.0, my = 0.0;
        for (const auto& s : samples) {
            mx += s[k].x / 5.0;
            my += s[k].y / 5.0;
        }
        CHECK(mean[k].x == Approx(mx).margin(1e-12));
        CHECK(mean[k].y == Approx(my).margin(1e-12));
    }
}

TEST_CASE("min_pairwise_distance basics") {
    const auto a = make_traj({{0, 0}, {1, 0}, {2, 0}});
    CHECK(min_pairwise_distance(a, a) == 0.0);

    const auto offset = make_traj({{0, 2}, {1, 2}, {2, 2}});
    CHECK(min_pairwise_distance(a, offset) == Approx(2.0));

    // Crossing diagonals that meet exactly at the middle grid step.
    const auto diag_up = make_traj({{0, -1}, {1, 0}, {2, 1}});
    const auto diag_down = make_traj({{0, 1}, {1, 0}, {2, -1}});
    CHECK(min_pairwise_distance(diag_up, diag_down) == 0.0);
}

TEST_CASE("min_pairwise_distance is symmetric and checks grids") {
    Rng rng(3);
    Trajectory a, b;
    for (int k = 0; k < 6; ++k) {
        a.points.push_back({rng.normal(), rng.normal()});
        b.points.push_back({rng.normal(), rng.normal()});
    }
    CHECK(min_pairwise_distance(a, b) == min_pairwise_distance(b, a));

    Trajectory shorter = a;
    shorter.points.pop_back();
    CHECK_THROWS_AS(min_pairwise_distance(a, shorter), GridMismatchError);
}

TEST_CASE("TimeGrid validation") {
    CHECK_THROWS_AS(validate(TimeGrid{1, 0.1}), Error);
    CHECK_THROWS_AS(validate(TimeGrid{5, 0.0}), Error);
    const TimeGrid grid{50, 0.1};
    validate(grid);
    CHECK(grid.total_horizon() == Approx(5.0));
}
