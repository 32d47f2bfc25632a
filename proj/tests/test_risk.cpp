#include <catch2/catch.hpp>

#include "brne/risk.hpp"
#include "brne/rng.hpp"

using namespace brne;

namespace {

Trajectory constant_traj(Vec2 p, int steps) {
    Trajectory t;
    t.points.assign(static_cast<size_t>(steps), p);
    return t;
}

SampledMixedStrategy strategy_of(std::vector<Trajectory> samples, std::vector<double> weights) {
    SampledMixedStrategy s;
    s.grid = {samples[0].size(), 0.1};
    s.samples = std::move(samples);
    s.weights = std::move(weights);
    s.nominal_weights.assign(s.weights.size(), 1.0);
    return s;
}

}  // namespace

TEST_CASE("pairwise_risk is zero at zero scale") {
    RiskParams params;
    params.scale = 0.0;
    const auto a = constant_traj({0, 0}, 5);
    const auto b = constant_traj({0.1, 0}, 5);
    CHECK(pairwise_risk(a, b, params) == 0.0);
}

TEST_CASE("pairwise_risk at the comfort distance is T * scale / 2") {
    RiskParams params;
    params.scale = 2.0;
    params.comfort_distance = 0.6;
    const int steps = 7;
    const auto a = constant_traj({0, 0}, steps);
    const auto b = constant_traj({0.6, 0}, steps);
    CHECK(pairwise_risk(a, b, params) == Approx(steps * params.scale / 2.0).epsilon(1e-12));

    params.aggregation = RiskAggregation::kMaxOverTime;
    CHECK(pairwise_risk(a, b, params) == Approx(params.scale / 2.0).epsilon(1e-12));
}

TEST_CASE("pairwise_risk tail vanishes far beyond the comfort distance") {
    RiskParams params;
    params.scale = 1.0;
    params.comfort_distance = 0.6;
    params.steepness = 6.0;
    const int steps = 10;
    const auto a = constant_traj({0, 0}, steps);
    const auto b = constant_traj({60.0, 0}, steps);  // 100x comfort distance
    CHECK(pairwise_risk(a, b, params) < 1e-6 * params.scale * steps);
}

TEST_CASE("pairwise_risk is symmetric and grid-checked") {
    RiskParams params;
    Rng rng(5);
    Trajectory a, b;
    for (int t = 0; t < 8; ++t) {
        a.points.push_back({rng.normal(), rng.normal()});
        b.points.push_back({rng.normal(), rng.normal()});
    }
    CHECK(pairwise_risk(a, b, params) == pairwise_risk(b, a, params));
    Trajectory shorter = b;
    shorter.points.pop_back();
    CHECK_THROWS_AS(pairwise_risk(a, shorter, params), GridMismatchError);
}

TEST_CASE("pairwise_risk decreases when trajectories separate") {
    RiskParams params;
    const auto a = constant_traj({0, 0}, 6);
    double previous = pairwise_risk(a, constant_traj({0.2, 0}, 6), params);
    for (double offset = 0.4; offset < 3.0; offset += 0.2) {
        const double current = pairwise_risk(a, constant_traj({offset, 0}, 6), params);
        CHECK(current <= previous);
        previous = current;
    }
}

TEST_CASE("expected_risk_profile against a single-sample strategy") {
    RiskParams params;
    params.scale = 1.5;
    const auto q0 = constant_traj({0, 0}, 4);
    const auto q1 = constant_traj({0, 1}, 4);
    const auto other = constant_traj({0.5, 0}, 4);
    const auto query = strategy_of({q0, q1}, {1.0, 1.0});
    const auto single = strategy_of({other}, {1.0});
    const auto profile = expected_risk_profile(query, single, params);
    CHECK(profile[0] == Approx(pairwise_risk(q0, other, params)));
    CHECK(profile[1] == Approx(pairwise_risk(q1, other, params)));
}

TEST_CASE("expected_risk_profile is all zero at zero scale") {
    RiskParams params;
    params.scale = 0.0;
    const auto query = strategy_of({constant_traj({0, 0}, 3), constant_traj({1, 0}, 3)},
                                   {1.0, 1.0});
    for (double value : expected_risk_profile(query, query, params)) CHECK(value == 0.0);
}

TEST_CASE("expected_risk_profile matches a hand-built 2x2 enumeration") {
    RiskParams params;
    params.scale = 1.0;
    params.steepness = 4.0;
    params.comfort_distance = 0.5;
    const auto q0 = constant_traj({0, 0}, 2);
    const auto q1 = constant_traj({0, 0.7}, 2);
    const auto o0 = constant_traj({0.4, 0}, 2);
    const auto o1 = constant_traj({1.0, 0.3}, 2);
    const auto query = strategy_of({q0, q1}, {1.0, 1.0});
    const auto other = strategy_of({o0, o1}, {0.5, 1.5});

    const double r00 = pairwise_risk(q0, o0, params);
    const double r01 = pairwise_risk(q0, o1, params);
    const double r10 = pairwise_risk(q1, o0, params);
    const double r11 = pairwise_risk(q1, o1, params);
    const auto profile = expected_risk_profile(query, other, params);
    CHECK(profile[0] == Approx(0.5 * (0.5 * r00 + 1.5 * r01)).epsilon(1e-12));
    CHECK(profile[1] == Approx(0.5 * (0.5 * r10 + 1.5 * r11)).epsilon(1e-12));

    // joint expectation consistency with the profile
    const double joint = joint_expected_risk(query, other, params);
    CHECK(joint == Approx(0.5 * (profile[0] + profile[1])).epsilon(1e-12));
    CHECK(joint == Approx(joint_expected_risk(other, query, params)).epsilon(1e-12));
}

TEST_CASE("joint_expected_risk reduces to the pairwise case for identical atoms") {
    RiskParams params;
    params.scale = 1.0;
    params.comfort_distance = 0.6;
    const int steps = 5;
    const auto a = strategy_of({constant_traj({0, 0}, steps)}, {1.0});
    const auto b = strategy_of({constant_traj({0.6, 0}, steps)}, {1.0});
    CHECK(joint_expected_risk(a, b, params) == Approx(steps * params.scale / 2.0).epsilon(1e-12));
}

TEST_CASE("joint_expected_risk respects the scale * T bound") {
    Rng rng(11);
    RiskParams params;
    params.scale = 0.8;
    const int steps = 6;
    std::vector<Trajectory> sa, sb;
    for (int j = 0; j < 8; ++j) {
        Trajectory t;
        for (int k = 0; k < steps; ++k) t.points.push_back({rng.normal(), rng.normal()});
        sa.push_back(t);
        t.points.clear();
        for (int k = 0; k < steps; ++k) t.points.push_back({rng.normal(), rng.normal()});
        sb.push_back(t);
    }
    const auto a = strategy_of(sa, std::vector<double>(8, 1.0));
    const auto b = strategy_of(sb, std::vector<double>(8, 1.0));
    const double joint = joint_expected_risk(a, b, params);
    CHECK(joint >= 0.0);
    CHECK(joint <= params.scale * steps);

    RiskParams max_params = params;
    max_params.aggregation = RiskAggregation::kMaxOverTime;
    const double joint_max = joint_expected_risk(a, b, max_params);
    CHECK(joint_max >= 0.0);
    CHECK(joint_max <= max_params.scale);

    // self-profile is finite and non-negative
    for (double value : expected_risk_profile(a, a, params)) {
        CHECK(std::isfinite(value));
        CHECK(value >= 0.0);
    }
}

TEST_CASE("LogisticRiskTable tracks the exact logistic closely") {
    RiskParams params;
    params.scale = 1.7;
    params.steepness = 6.0;
    params.comfort_distance = 0.6;
    const LogisticRiskTable table(params);
    Rng rng(13);
    double worst = 0.0;
    for (int k = 0; k < 20000; ++k) {
        const double d = rng.uniform(0.0, 8.0);
        worst = std::max(worst, std::abs(table(d) - step_risk(d, params)));
    }
    CHECK(worst < 1e-10 * params.scale);
    CHECK(table(100.0) == 0.0);
    CHECK(table(0.0) == Approx(step_risk(0.0, params)).epsilon(1e-12));
}

TEST_CASE("LogisticRiskTable is exactly zero at zero scale") {
    RiskParams params;
    params.scale = 0.0;
    const LogisticRiskTable table(params);
    CHECK(table(0.0) == 0.0);
    CHECK(table(0.5) == 0.0);
}
