#pragma once

// Receding-horizon navigation loop: observe pedestrians, build GP nominal
// strategies, solve for the mixed-strategy equilibrium, and track the robot's
// weighted-mean trajectory with a pure-pursuit controller.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "brne/core.hpp"
#include "brne/gp.hpp"
#include "brne/risk.hpp"
#include "brne/solver.hpp"

namespace brne {

struct PlannerConfig {
    int horizon_steps = 20;
    double dt = 0.1;                 // planning grid step
    int samples_per_agent = 200;
    double replan_period = 0.2;      // seconds between solves
    int max_tracked_agents = 5;      // nearest-first pedestrian cutoff
    double nominal_speed = 1.2;      // m/s along the robot mean

    // GP anchor uncertainties (meters)
    double robot_start_std = 1e-3;
    double robot_end_std = 0.2;
    double ped_start_std = 1e-3;

    // pure-pursuit tracking
    double lookahead = 0.45;         // m along the plan
    double heading_gain = 2.5;       // rad/s per rad of heading error
    double linear_gain = 3.0;        // m/s per m of forward offset
    double max_linear_speed = 1.2;   // actuator bounds
    double max_angular_speed = 2.5;
    double goal_tolerance = 0.25;    // m
};

inline void validate(const PlannerConfig& config) {
    if (config.horizon_steps < 2) throw Error("PlannerConfig: horizon_steps must be >= 2");
    if (!(config.dt > 0.0)) throw Error("PlannerConfig: dt must be > 0");
    if (config.samples_per_agent < 1) throw Error("PlannerConfig: need at least one sample");
    if (config.replan_period < config.dt)
        throw Error("PlannerConfig: replan_period must be >= dt");
    if (config.max_tracked_agents < 1)
        throw Error("PlannerConfig: max_tracked_agents must be >= 1");
    if (!(config.nominal_speed > 0.0)) throw Error("PlannerConfig: nominal_speed must be > 0");
}

struct RobotCommand {
    double linear = 0.0;   // m/s, >= 0
    double angular = 0.0;  // rad/s, positive = counterclockwise
};

/// Robot nominal: straight-to-goal mean conditioned at the current position
/// and at the mean's endpoint.
inline NominalStrategy robot_nominal(const Vec2& position, const Vec2& goal,
                                     const PlannerConfig& config, const KernelSpec& kernel,
                                     const TimeGrid& grid) {
    Trajectory mean = robot_mean(position, goal, config.nominal_speed, grid);
    GPConditioning cond;
    cond.anchors.push_back({0, position, config.robot_start_std});
    cond.anchors.push_back({grid.horizon_steps - 1, mean.points.back(), config.robot_end_std});
    return condition_gp(kernel, mean, cond, grid);
}

/// Pedestrian nominal: constant-velocity mean conditioned at the current
/// position only; the future stays diffuse.
inline NominalStrategy pedestrian_nominal(const AgentObservation& obs,
                                          const PlannerConfig& config, const KernelSpec& kernel,
                                          const TimeGrid& grid) {
    Trajectory mean = pedestrian_mean(obs, grid);
    GPConditioning cond;
    cond.anchors.push_back({0, obs.position, config.ped_start_std});
    return condition_gp(kernel, mean, cond, grid);
}

struct PlanStepResult {
    Trajectory plan;
    bool solved = false;     // false when no pedestrians were tracked
    bool fallback = false;   // solver failed; plan is the nominal mean
    int tracked_agents = 0;
    SolveResult solve;
};

/// One planning cycle. Selects up to max_tracked_agents nearest pedestrians,
/// builds nominals, runs the solver (robot is agent 0, updated first), and
/// returns the weighted mean of the robot's posterior. With no pedestrians
/// the robot's straight-to-goal mean is returned without a solve; a solver
/// failure falls back to that mean and flags the step.
inline PlanStepResult plan_step(const AgentObservation& robot,
                                const std::vector<AgentObservation>& pedestrians,
                                const Vec2& goal, const PlannerConfig& config,
                                const KernelSpec& kernel, const RiskParams& risk,
                                const SolveConfig& solver, std::uint64_t seed) {
    validate(config);
    validate(robot);
    const TimeGrid grid{config.horizon_steps, config.dt};

    PlanStepResult result;
    if (pedestrians.empty()) {
        result.plan = robot_mean(robot.position, goal, config.nominal_speed, grid);
        return result;
    }

    std::vector<AgentObservation> tracked = pedestrians;
    std::sort(tracked.begin(), tracked.end(),
              [&](const AgentObservation& a, const AgentObservation& b) {
                  const double da = distance(a.position, robot.position);
                  const double db = distance(b.position, robot.position);
                  if (da != db) return da < db;
                  return a.agent_id < b.agent_id;
              });
    if (static_cast<int>(tracked.size()) > config.max_tracked_agents)
        tracked.resize(static_cast<size_t>(config.max_tracked_agents));
    result.tracked_agents = static_cast<int>(tracked.size());

    std::vector<NominalStrategy> nominals;
    nominals.reserve(tracked.size() + 1);
    nominals.push_back(robot_nominal(robot.position, goal, config, kernel, grid));
    for (const AgentObservation& obs : tracked)
        nominals.push_back(pedestrian_nominal(obs, config, kernel, grid));

    try {
        result.solve = solve(nominals, config.samples_per_agent, solver, risk, seed);
        result.plan = weighted_mean_trajectory(result.solve.strategies[0]);
        result.solved = true;
    } catch (const SolverError&) {
        result.plan = robot_mean(robot.position, goal, config.nominal_speed, grid);
        result.fallback = true;
    }
    return result;
}

/// Pure-pursuit tracking of a planned trajectory: angular velocity
/// proportional to the heading error toward a lookahead point, linear
/// velocity proportional to the forward offset, both clamped.
inline RobotCommand track(const Trajectory& plan, const Vec2& position, double heading,
                          const PlannerConfig& config) {
    if (plan.size() == 0) return {};

    // Nearest plan point, then the first point at least `lookahead` beyond it.
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < plan.size(); ++t) {
        const double d = distance(plan[t], position);
        if (d < best) {
            best = d;
            nearest = t;
        }
    }
    int target = nearest;
    double along = 0.0;
    while (target + 1 < plan.size() && along < config.lookahead) {
        along += distance(plan[target], plan[target + 1]);
        ++target;
    }

    const Vec2 offset = plan[target] - position;
    const double cos_h = std::cos(heading);
    const double sin_h = std::sin(heading);
    const double forward = cos_h * offset.x + sin_h * offset.y;
    const double lateral = -sin_h * offset.x + cos_h * offset.y;
    if (offset.norm() < 1e-9) return {};  // at plan end

    const double heading_error = std::atan2(lateral, forward);
    RobotCommand cmd;
    cmd.angular = std::clamp(config.heading_gain * heading_error, -config.max_angular_speed,
                             config.max_angular_speed);
    const double max_linear = std::min(config.max_linear_speed, config.nominal_speed);
    cmd.linear = std::clamp(config.linear_gain * forward, 0.0, max_linear);
    return cmd;
}

}  // namespace brne
