#include <catch2/catch.hpp>

#include <cmath>

#include "brne/planner.hpp"

using namespace brne;

namespace {

PlannerConfig small_planner() {
    PlannerConfig config;
    config.horizon_steps = 20;
    config.dt = 0.1;
    config.samples_per_agent = 150;
    config.nominal_speed = 1.2;
    return config;
}

double max_abs_lateral(const Trajectory& t) {
    double worst = 0.0;
    for (const Vec2& p : t.points) worst = std::max(worst, std::abs(p.y));
    return worst;
}

}  // namespace

TEST_CASE("plan_step: no pedestrians returns the straight nominal mean, no solve") {
    const PlannerConfig config = small_planner();
    const KernelSpec kernel{0.5, 1.5};
    const RiskParams risk;
    const SolveConfig solver;
    const AgentObservation robot{{0, 0}, {0, 0}, 0};
    const PlanStepResult result =
        plan_step(robot, {}, {5, 0}, config, kernel, risk, solver, 1);
    CHECK_FALSE(result.solved);
    CHECK_FALSE(result.fallback);
    const Trajectory expected = robot_mean({0, 0}, {5, 0}, config.nominal_speed,
                                           {config.horizon_steps, config.dt});
    for (int t = 0; t < expected.size(); ++t) {
        CHECK(result.plan[t].x == expected[t].x);
        CHECK(result.plan[t].y == expected[t].y);
    }
}

TEST_CASE("plan_step: a head-on pedestrian produces a sidestep") {
    const PlannerConfig config = small_planner();
    const KernelSpec kernel{0.5, 1.5};
    RiskParams risk;
    risk.scale = 2.0;
    SolveConfig solver;
    const AgentObservation robot{{0, 0}, {1.2, 0}, 0};
    const AgentObservation ped{{2.0, 0}, {-1.2, 0}, 1};
    const PlanStepResult result =
        plan_step(robot, {ped}, {5, 0}, config, kernel, risk, solver, 3);
    REQUIRE(result.solved);
    CHECK(result.tracked_agents == 1);
    // the straight nominal has zero lateral deviation; the plan must not
    CHECK(max_abs_lateral(result.plan) > 0.02);
}

TEST_CASE("plan_step: a pedestrian behind and moving away is ignored") {
    const PlannerConfig config = small_planner();
    const KernelSpec kernel{0.5, 1.5};
    RiskParams risk;
    risk.scale = 2.0;
    SolveConfig solver;
    const AgentObservation robot{{0, 0}, {1.2, 0}, 0};
    const AgentObservation ped{{-3.0, 0}, {-1.2, 0}, 1};  // behind, receding
    const PlanStepResult result =
        plan_step(robot, {ped}, {5, 0}, config, kernel, risk, solver, 3);
    REQUIRE(result.solved);
    const Trajectory nominal = robot_mean({0, 0}, {5, 0}, config.nominal_speed,
                                          {config.horizon_steps, config.dt});
    double worst = 0.0;
    for (int t = 0; t < nominal.size(); ++t)
        worst = std::max(worst, distance(result.plan[t], nominal[t]));
    CHECK(worst < 0.05);
}

TEST_CASE("plan_step keeps only the nearest max_tracked_agents pedestrians") {
    PlannerConfig config = small_planner();
    config.max_tracked_agents = 2;
    const KernelSpec kernel{0.5, 1.5};
    const RiskParams risk;
    const SolveConfig solver;
    const AgentObservation robot{{0, 0}, {0, 0}, 0};
    std::vector<AgentObservation> peds;
    for (int k = 0; k < 5; ++k)
        peds.push_back({{1.0 + 0.5 * k, 0.5}, {0, 0}, 10 + k});
    const PlanStepResult result =
        plan_step(robot, peds, {5, 0}, config, kernel, risk, solver, 4);
    CHECK(result.tracked_agents == 2);
    CHECK(result.solve.strategies.size() == 3);  // robot + 2 tracked
}

TEST_CASE("plan_step is deterministic and anchors the first plan point") {
    const PlannerConfig config = small_planner();
    const KernelSpec kernel{0.5, 1.5};
    RiskParams risk;
    risk.scale = 1.0;
    const SolveConfig solver;
    const AgentObservation robot{{0.3, -0.2}, {1.0, 0}, 0};
    const AgentObservation ped{{1.5, 0.2}, {-1.0, 0}, 1};
    const PlanStepResult a = plan_step(robot, {ped}, {4, 0}, config, kernel, risk, solver, 11);
    const PlanStepResult b = plan_step(robot, {ped}, {4, 0}, config, kernel, risk, solver, 11);
    for (int t = 0; t < a.plan.size(); ++t) {
        CHECK(a.plan[t].x == b.plan[t].x);
        CHECK(a.plan[t].y == b.plan[t].y);
    }
    // first point within 3x the robot start anchor std (plus Monte-Carlo slack)
    CHECK(distance(a.plan[0], robot.position) < 4e-3);
}

TEST_CASE("track: aligned straight plan gives full speed and no turn") {
    const PlannerConfig config = small_planner();
    Trajectory plan;
    for (int t = 0; t < 20; ++t) plan.points.push_back({0.12 * t, 0.0});
    const RobotCommand cmd = track(plan, {0, 0}, 0.0, config);
    CHECK(cmd.angular == Approx(0.0).margin(1e-12));
    CHECK(cmd.linear == Approx(config.nominal_speed));
}

TEST_CASE("track: lookahead 90 degrees left saturates positive angular velocity") {
    const PlannerConfig config = small_planner();
    Trajectory plan;
    for (int t = 0; t < 10; ++t) plan.points.push_back({0.0, 0.3 * t});  // straight up
    // robot at origin facing +x; plan runs along +y
    const RobotCommand cmd = track(plan, {0, 0}, 0.0, config);
    CHECK(cmd.angular == Approx(config.max_angular_speed));
}

TEST_CASE("track: at the plan end the command is zero") {
    const PlannerConfig config = small_planner();
    Trajectory plan;
    for (int t = 0; t < 10; ++t) plan.points.push_back({0.1 * t, 0.0});
    const RobotCommand cmd = track(plan, {0.9, 0.0}, 0.0, config);
    CHECK(cmd.linear == 0.0);
    CHECK(cmd.angular == 0.0);
}

TEST_CASE("replanning monotonicity: successive empty-world plans approach the goal") {
    const PlannerConfig config = small_planner();
    const KernelSpec kernel{0.5, 1.5};
    const RiskParams risk;
    const SolveConfig solver;
    const Vec2 goal{6, 0};
    Vec2 position{0, 0};
    double previous_gap = std::numeric_limits<double>::infinity();
    for (int replan = 0; replan < 8; ++replan) {
        const PlanStepResult result = plan_step({position, {1.2, 0}, 0}, {}, goal, config,
                                                kernel, risk, solver, 100 + replan);
        const double gap = distance(result.plan.points.back(), goal);
        CHECK(gap <= previous_gap + 1e-12);
        previous_gap = gap;
        position.x += 0.5;  // advance half a meter between replans
    }
}
