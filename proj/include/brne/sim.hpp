#pragma once

// Multi-agent episode simulation: scenario generation, pedestrian behavior
// models, world stepping, dataset playback, and per-episode metrics.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "brne/core.hpp"
#include "brne/planner.hpp"
#include "brne/rng.hpp"

namespace brne {

enum class ScenarioKind { kCircleCrossing, kHallway, kDatasetPlayback };

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::kCircleCrossing;
    int n_agents = 6;                  // total agents, robot slot included
    double circle_radius = 3.0;        // m
    double min_spawn_separation = 0.6; // m
    double desired_speed = 1.2;        // m/s
    double body_radius = 0.3;          // m
    double episode_timeout = 60.0;     // s
    double control_dt = 0.1;           // s per world step
    std::uint64_t rng_seed = 0;
    Vec2 robot_start{-3.0, 0.0};       // hallway / playback kinds
    Vec2 robot_goal{3.0, 0.0};
    std::string playback_path;
};

inline void validate(const ScenarioConfig& config) {
    if (config.n_agents < 1) throw Error("ScenarioConfig: need at least one agent");
    if (!(config.circle_radius > 0.0)) throw Error("ScenarioConfig: circle_radius must be > 0");
    if (config.min_spawn_separation < 2.0 * config.body_radius)
        throw Error("ScenarioConfig: min_spawn_separation must be >= 2 * body_radius");
    if (!(config.desired_speed > 0.0)) throw Error("ScenarioConfig: desired_speed must be > 0");
    if (!(config.control_dt > 0.0)) throw Error("ScenarioConfig: control_dt must be > 0");
    if (!(config.episode_timeout > 0.0)) throw Error("ScenarioConfig: episode_timeout must be > 0");
}

struct AgentEndpoints {
    Vec2 start;
    Vec2 goal;
};

/// Uniform starts on the circle, rejection-resampled until every pair is at
/// least min_spawn_separation apart; each goal is the antipode of its start.
inline std::vector<AgentEndpoints> sample_circle_scenario(const ScenarioConfig& config) {
    validate(config);
    Rng rng(derive_seed(config.rng_seed, 0xC1BC1EULL));
    std::vector<AgentEndpoints> agents;
    agents.reserve(static_cast<size_t>(config.n_agents));
    int attempts = 0;
    constexpr int kMaxAttempts = 10000;
    while (static_cast<int>(agents.size()) < config.n_agents) {
        if (++attempts > kMaxAttempts)
            throw InfeasibleScenarioError(
                "sample_circle_scenario: could not place agents after 10^4 rejections");
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const Vec2 start{config.circle_radius * std::cos(angle),
                         config.circle_radius * std::sin(angle)};
        bool ok = true;
        for (const AgentEndpoints& other : agents)
            if (distance(start, other.start) < config.min_spawn_separation) {
                ok = false;
                break;
            }
        if (ok) agents.push_back({start, start * -1.0});
    }
    return agents;
}

/// Agents split across the two ends of a corridor of half-length
/// circle_radius, head-on pairs offset laterally by the spawn separation.
inline std::vector<AgentEndpoints> hallway_scenario(const ScenarioConfig& config) {
    validate(config);
    std::vector<AgentEndpoints> agents;
    const double half = config.circle_radius;
    for (int i = 0; i < config.n_agents; ++i) {
        const double lane = static_cast<double>(i / 2) * config.min_spawn_separation;
        if (i % 2 == 0)
            agents.push_back({{-half, lane}, {half, lane}});
        else
            agents.push_back({{half, lane}, {-half, lane}});
    }
    return agents;
}

// ---------------------------------------------------------------------------
// Dataset playback

struct PlaybackSeries {
    int agent_id = 0;
    std::vector<double> times;
    std::vector<Vec2> positions;
};

struct PlaybackData {
    std::vector<PlaybackSeries> agents;
};

namespace detail {

inline double parse_double_field(const std::string& field, int line_no) {
    const char* begin = field.data();
    const char* end = begin + field.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError("playback: line " + std::to_string(line_no) + ": bad number '" + field +
                         "'");
    return value;
}

inline std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Load a pedestrian trajectory CSV: header `agent_id,t_seconds,x_m,y_m`,
/// one observation per row, sorted by (agent_id, t). Agents appear at their
/// first frame and disappear after their last.
inline PlaybackData load_playback(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("playback: cannot open '" + path + "'");
    PlaybackData data;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(file, line)) {
        ++line_no;
        const std::string trimmed = detail::strip(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (!saw_header) {
            std::string squashed;
            for (char c : trimmed)
                if (c != ' ' && c != '\t') squashed.push_back(c);
            if (squashed != "agent_id,t_seconds,x_m,y_m")
                throw ParseError("playback: line " + std::to_string(line_no) +
                                 ": expected header 'agent_id,t_seconds,x_m,y_m'");
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields;
        size_t begin = 0;
        while (true) {
            const size_t comma = trimmed.find(',', begin);
            fields.push_back(trimmed.substr(begin, comma - begin));
            if (comma == std::string::npos) break;
            begin = comma + 1;
        }
        if (fields.size() != 4)
            throw ParseError("playback: line " + std::to_string(line_no) +
                             ": expected 4 columns, got " + std::to_string(fields.size()));
        const int agent_id = static_cast<int>(detail::parse_double_field(fields[0], line_no));
        const double t = detail::parse_double_field(fields[1], line_no);
        const Vec2 pos{detail::parse_double_field(fields[2], line_no),
                       detail::parse_double_field(fields[3], line_no)};
        if (!data.agents.empty() && data.agents.back().agent_id == agent_id) {
            PlaybackSeries& series = data.agents.back();
            if (t <= series.times.back())
                throw ParseError("playback: line " + std::to_string(line_no) +
                                 ": timestamps out of order for agent " +
                                 std::to_string(agent_id));
            series.times.push_back(t);
            series.positions.push_back(pos);
        } else {
            if (!data.agents.empty() && agent_id <= data.agents.back().agent_id)
                throw ParseError("playback: line " + std::to_string(line_no) +
                                 ": rows must be sorted by (agent_id, t)");
            data.agents.push_back({agent_id, {t}, {pos}});
        }
    }
    if (!saw_header) throw ParseError("playback: empty file '" + path + "'");
    if (data.agents.empty()) throw ParseError("playback: no data rows in '" + path + "'");
    return data;
}

struct PlaybackSample {
    bool active = false;
    Vec2 position;
    Vec2 velocity;
};

inline PlaybackSample sample_playback(const PlaybackSeries& series, double t) {
    PlaybackSample out;
    if (t < series.times.front() - 1e-12 || t > series.times.back() + 1e-12) return out;
    out.active = true;
    const auto upper = std::upper_bound(series.times.begin(), series.times.end(), t);
    const size_t hi = std::min(static_cast<size_t>(upper - series.times.begin()),
                               series.times.size() - 1);
    const size_t lo = hi == 0 ? 0 : hi - 1;
    if (hi == lo || series.times[hi] == series.times[lo]) {
        out.position = series.positions[lo];
        return out;
    }
    const double span = series.times[hi] - series.times[lo];
    const double frac = std::clamp((t - series.times[lo]) / span, 0.0, 1.0);
    out.position = series.positions[lo] + (series.positions[hi] - series.positions[lo]) * frac;
    out.velocity = (series.positions[hi] - series.positions[lo]) * (1.0 / span);
    return out;
}

// ---------------------------------------------------------------------------
// Pedestrian models and world stepping

enum class PedestrianModelKind { kScriptedConstantVelocity, kReactiveSocialForce, kPlayback };

struct PedestrianModelParams {
    PedestrianModelKind kind = PedestrianModelKind::kScriptedConstantVelocity;
    double goal_gain = 2.0;           // 1/s relaxation toward the desired velocity
    double repulsion_strength = 4.0;  // m/s^2 at contact distance
    double repulsion_range = 0.5;     // m e-folding distance
    double accel_cap = 5.0;           // m/s^2
    double goal_tolerance = 0.15;     // m; agents hold position at their goal
    std::shared_ptr<const PlaybackData> playback;
};

struct RobotState {
    Vec2 position;
    double heading = 0.0;
    Vec2 velocity;  // world frame, from the last command
};

struct PedestrianState {
    int agent_id = 0;
    Vec2 position;
    Vec2 velocity;
    Vec2 goal;
    bool active = true;
    int playback_index = -1;  // index into PlaybackData::agents, if any
};

struct WorldState {
    double time = 0.0;
    RobotState robot;
    std::vector<PedestrianState> pedestrians;
    double desired_speed = 1.2;
    double body_radius = 0.3;
};

/// Advance the world by dt: the robot integrates differential-drive
/// kinematics under `command`, pedestrians advance per their model.
inline WorldState step_world(const WorldState& state, double dt, const RobotCommand& command,
                             const PedestrianModelParams& model) {
    if (!(dt > 0.0)) throw Error("step_world: dt must be > 0");
    WorldState next = state;
    next.time = state.time + dt;

    next.robot.velocity = {command.linear * std::cos(state.robot.heading),
                           command.linear * std::sin(state.robot.heading)};
    next.robot.position = state.robot.position + next.robot.velocity * dt;
    next.robot.heading = state.robot.heading + command.angular * dt;

    for (size_t p = 0; p < state.pedestrians.size(); ++p) {
        const PedestrianState& ped = state.pedestrians[p];
        PedestrianState& out = next.pedestrians[p];
        switch (model.kind) {
            case PedestrianModelKind::kScriptedConstantVelocity: {
                const double remaining = distance(ped.position, ped.goal);
                if (remaining <= model.goal_tolerance) {
                    out.velocity = {0.0, 0.0};
                    break;
                }
                const double step = std::min(state.desired_speed * dt, remaining);
                const Vec2 move = unit_toward(ped.position, ped.goal) * step;
                out.position = ped.position + move;
                out.velocity = move * (1.0 / dt);
                break;
            }
            case PedestrianModelKind::kReactiveSocialForce: {
                const double remaining = distance(ped.position, ped.goal);
                Vec2 desired{0.0, 0.0};
                if (remaining > model.goal_tolerance)
                    desired = unit_toward(ped.position, ped.goal) * state.desired_speed;
                Vec2 accel = (desired - ped.velocity) * model.goal_gain;
                const auto repel = [&](const Vec2& other) {
                    const double d = distance(ped.position, other);
                    if (d < 1e-9) return;
                    const double magnitude = model.repulsion_strength *
                                             std::exp((2.0 * state.body_radius - d) /
                                                      model.repulsion_range);
                    accel += unit_toward(other, ped.position) * magnitude;
                };
                for (size_t q = 0; q < state.pedestrians.size(); ++q)
                    if (q != p && state.pedestrians[q].active)
                        repel(state.pedestrians[q].position);
                repel(state.robot.position);
                const double a_norm = accel.norm();
                if (a_norm > model.accel_cap) accel = accel * (model.accel_cap / a_norm);
                out.velocity = ped.velocity + accel * dt;
                const double speed_cap = 1.3 * state.desired_speed;
                const double speed = out.velocity.norm();
                if (speed > speed_cap) out.velocity = out.velocity * (speed_cap / speed);
                out.position = ped.position + out.velocity * dt;
                if (remaining <= model.goal_tolerance) {
                    out.position = ped.position;
                    out.velocity = {0.0, 0.0};
                }
                break;
            }
            case PedestrianModelKind::kPlayback: {
                const PlaybackSample sample = sample_playback(
                    model.playback->agents[static_cast<size_t>(ped.playback_index)], next.time);
                out.active = sample.active;
                if (sample.active) {
                    out.position = sample.position;
                    out.velocity = sample.velocity;
                }
                break;
            }
        }
    }
    return next;
}

// ---------------------------------------------------------------------------
// Episode execution and metrics

struct Metrics {
    double safety_distance = std::numeric_limits<double>::infinity();
    bool collided = false;
    std::vector<double> path_lengths;   // robot first
    std::vector<double> times_to_goal;  // robot first; episode end if unreached
    double max_path_length = 0.0;
    double robot_time_to_goal = 0.0;
    bool froze = false;
};

struct StepRecord {
    double time = 0.0;
    Vec2 robot_position;
    double robot_heading = 0.0;
    Vec2 robot_velocity;
    RobotCommand command;
    std::vector<Vec2> ped_positions;
    std::vector<Vec2> ped_velocities;
    std::vector<std::uint8_t> ped_active;
    int plan_index = -1;
};

struct PlanRecord {
    double time = 0.0;
    Trajectory plan;
    std::vector<double> free_energy_trace;
    int iterations_used = 0;
    bool converged = false;
    bool fallback = false;
    bool solved = false;
    int tracked_agents = 0;
    double solve_wall_ms = 0.0;
};

struct EpisodeTrace {
    double control_dt = 0.0;
    std::vector<StepRecord> steps;
    std::vector<PlanRecord> plans;
    Metrics metrics;
};

struct EpisodeSetup {
    ScenarioConfig scenario;
    PlannerConfig planner;
    KernelSpec kernel;
    RiskParams risk;
    SolveConfig solver;
    PedestrianModelParams ped_model;
    std::uint64_t seed = 0;
};

namespace detail {

// Safety distance between the robot and active pedestrians in one record.
inline double record_min_distance(const StepRecord& record) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < record.ped_positions.size(); ++p)
        if (record.ped_active[p])
            best = std::min(best, distance(record.robot_position, record.ped_positions[p]));
    return best;
}

inline double polyline_length(const std::vector<Vec2>& points) {
    double total = 0.0;
    for (size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
    return total;
}

}  // namespace detail

/// Run one crowd-navigation episode: observe -> plan -> track -> step until
/// the robot reaches its goal, or the timeout elapses (recorded as a frozen
/// episode). Planner failures fall back to the nominal mean inside plan_step
/// and never abort the episode.
inline EpisodeTrace run_episode(const EpisodeSetup& setup) {
    validate(setup.scenario);
    validate(setup.planner);

    WorldState state;
    state.desired_speed = setup.scenario.desired_speed;
    state.body_radius = setup.scenario.body_radius;
    Vec2 goal;

    switch (setup.scenario.kind) {
        case ScenarioKind::kCircleCrossing: {
            const auto endpoints = sample_circle_scenario(setup.scenario);
            state.robot.position = endpoints[0].start;
            goal = endpoints[0].goal;
            for (size_t i = 1; i < endpoints.size(); ++i) {
                PedestrianState ped;
                ped.agent_id = static_cast<int>(i);
                ped.position = endpoints[i].start;
                ped.goal = endpoints[i].goal;
                ped.velocity = unit_toward(ped.position, ped.goal) * setup.scenario.desired_speed;
                state.pedestrians.push_back(ped);
            }
            break;
        }
        case ScenarioKind::kHallway: {
            const auto endpoints = hallway_scenario(setup.scenario);
            state.robot.position = endpoints[0].start;
            goal = endpoints[0].goal;
            for (size_t i = 1; i < endpoints.size(); ++i) {
                PedestrianState ped;
                ped.agent_id = static_cast<int>(i);
                ped.position = endpoints[i].start;
                ped.goal = endpoints[i].goal;
                ped.velocity = unit_toward(ped.position, ped.goal) * setup.scenario.desired_speed;
                state.pedestrians.push_back(ped);
            }
            break;
        }
        case ScenarioKind::kDatasetPlayback: {
            if (!setup.ped_model.playback)
                throw Error("run_episode: playback scenario without playback data");
            state.robot.position = setup.scenario.robot_start;
            goal = setup.scenario.robot_goal;
            const PlaybackData& data = *setup.ped_model.playback;
            for (size_t i = 0; i < data.agents.size(); ++i) {
                PedestrianState ped;
                ped.agent_id = data.agents[i].agent_id;
                ped.playback_index = static_cast<int>(i);
                ped.goal = data.agents[i].positions.back();
                const PlaybackSample sample = sample_playback(data.agents[i], 0.0);
                ped.active = sample.active;
                ped.position = sample.position;
                ped.velocity = sample.velocity;
                state.pedestrians.push_back(ped);
            }
            break;
        }
    }
    state.robot.heading = std::atan2(goal.y - state.robot.position.y,
                                     goal.x - state.robot.position.x);

    EpisodeTrace trace;
    trace.control_dt = setup.scenario.control_dt;
    const int steps_per_replan = std::max(
        1, static_cast<int>(std::lround(setup.planner.replan_period / setup.scenario.control_dt)));
    const int max_steps = static_cast<int>(
        std::ceil(setup.scenario.episode_timeout / setup.scenario.control_dt));

    Trajectory plan;
    bool reached = false;
    const auto push_record = [&](const RobotCommand& cmd) {
        StepRecord record;
        record.time = state.time;
        record.robot_position = state.robot.position;
        record.robot_heading = state.robot.heading;
        record.robot_velocity = state.robot.velocity;
        record.command = cmd;
        record.plan_index = static_cast<int>(trace.plans.size()) - 1;
        for (const PedestrianState& ped : state.pedestrians) {
            record.ped_positions.push_back(ped.position);
            record.ped_velocities.push_back(ped.velocity);
            record.ped_active.push_back(ped.active ? 1 : 0);
        }
        trace.steps.push_back(std::move(record));
    };

    for (int step = 0; step < max_steps; ++step) {
        if (step % steps_per_replan == 0) {
            std::vector<AgentObservation> observations;
            for (const PedestrianState& ped : state.pedestrians)
                if (ped.active)
                    observations.push_back({ped.position, ped.velocity, ped.agent_id});
            AgentObservation robot_obs{state.robot.position, state.robot.velocity, 0};
            const auto t0 = std::chrono::steady_clock::now();
            PlanStepResult planned = plan_step(
                robot_obs, observations, goal, setup.planner, setup.kernel, setup.risk,
                setup.solver, derive_seed(setup.seed, static_cast<std::uint64_t>(step), 0x91a4));
            const auto t1 = std::chrono::steady_clock::now();
            PlanRecord plan_record;
            plan_record.time = state.time;
            plan_record.plan = planned.plan;
            plan_record.fallback = planned.fallback;
            plan_record.solved = planned.solved;
            plan_record.tracked_agents = planned.tracked_agents;
            plan_record.solve_wall_ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count();
            if (planned.solved) {
                plan_record.free_energy_trace = planned.solve.free_energy_trace;
                plan_record.iterations_used = planned.solve.iterations_used;
                plan_record.converged = planned.solve.converged;
            }
            plan = planned.plan;
            trace.plans.push_back(std::move(plan_record));
        }
        const RobotCommand cmd = track(plan, state.robot.position, state.robot.heading,
                                       setup.planner);
        push_record(cmd);
        state = step_world(state, setup.scenario.control_dt, cmd, setup.ped_model);
        if (distance(state.robot.position, goal) <= setup.planner.goal_tolerance) {
            reached = true;
            break;
        }
    }
    push_record({});

    // Metrics from the recorded states.
    Metrics& metrics = trace.metrics;
    for (const StepRecord& record : trace.steps)
        metrics.safety_distance = std::min(metrics.safety_distance,
                                           detail::record_min_distance(record));
    metrics.collided = metrics.safety_distance < 2.0 * setup.scenario.body_radius;
    metrics.froze = !reached;
    metrics.robot_time_to_goal = reached ? trace.steps.back().time
                                         : setup.scenario.episode_timeout;

    const size_t n_peds = state.pedestrians.size();
    std::vector<Vec2> robot_points;
    robot_points.reserve(trace.steps.size());
    for (const StepRecord& record : trace.steps) robot_points.push_back(record.robot_position);
    metrics.path_lengths.push_back(detail::polyline_length(robot_points));
    metrics.times_to_goal.push_back(metrics.robot_time_to_goal);
    for (size_t p = 0; p < n_peds; ++p) {
        std::vector<Vec2> points;
        double time_to_goal = trace.steps.back().time;
        bool found = false;
        for (const StepRecord& record : trace.steps) {
            if (!record.ped_active[p]) continue;
            points.push_back(record.ped_positions[p]);
            if (!found &&
                distance(record.ped_positions[p], state.pedestrians[p].goal) <=
                    setup.ped_model.goal_tolerance) {
                time_to_goal = record.time;
                found = true;
            }
        }
        metrics.path_lengths.push_back(detail::polyline_length(points));
        metrics.times_to_goal.push_back(time_to_goal);
    }
    metrics.max_path_length = 0.0;
    for (double length : metrics.path_lengths)
        metrics.max_path_length = std::max(metrics.max_path_length, length);
    return trace;
}

namespace detail {

inline Vec2 eval_plan_at(const Trajectory& plan, double plan_dt, double tau) {
    if (tau <= 0.0 || plan.size() == 1) return plan[0];
    const double idx = tau / plan_dt;
    const int lo = static_cast<int>(idx);
    if (lo >= plan.size() - 1) return plan.points.back();
    const double frac = idx - lo;
    return plan[lo] + (plan[lo + 1] - plan[lo]) * frac;
}

}  // namespace detail

/// Joint multi-agent navigation episode on a circle (or hallway) scenario:
/// one solve per replan plans for every agent simultaneously, and each agent
/// tracks its own posterior-mean trajectory at the scenario speed. Safety is
/// measured over all agent pairs. Agent 0 fills the trace's robot slot.
inline EpisodeTrace run_multiagent_episode(const EpisodeSetup& setup) {
    validate(setup.scenario);
    validate(setup.planner);
    if (setup.scenario.n_agents < 2)
        throw Error("run_multiagent_episode: need at least two agents");

    const std::vector<AgentEndpoints> endpoints =
        setup.scenario.kind == ScenarioKind::kHallway ? hallway_scenario(setup.scenario)
                                                      : sample_circle_scenario(setup.scenario);
    const int n = setup.scenario.n_agents;
    const TimeGrid grid{setup.planner.horizon_steps, setup.planner.dt};

    std::vector<Vec2> positions(static_cast<size_t>(n));
    std::vector<Vec2> velocities(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        positions[static_cast<size_t>(i)] = endpoints[static_cast<size_t>(i)].start;
        velocities[static_cast<size_t>(i)] =
            unit_toward(endpoints[static_cast<size_t>(i)].start,
                        endpoints[static_cast<size_t>(i)].goal) *
            setup.scenario.desired_speed;
    }

    EpisodeTrace trace;
    trace.control_dt = setup.scenario.control_dt;
    const int steps_per_replan = std::max(
        1, static_cast<int>(std::lround(setup.planner.replan_period / setup.scenario.control_dt)));
    const int max_steps = static_cast<int>(
        std::ceil(setup.scenario.episode_timeout / setup.scenario.control_dt));
    const double goal_tol = setup.planner.goal_tolerance;

    std::vector<Trajectory> plans(static_cast<size_t>(n));
    double plan_start = 0.0;
    int replans = 0;

    const auto joint_replan = [&](double now) {
        std::vector<NominalStrategy> nominals;
        nominals.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            nominals.push_back(robot_nominal(positions[static_cast<size_t>(i)],
                                             endpoints[static_cast<size_t>(i)].goal,
                                             setup.planner, setup.kernel, grid));
        PlanRecord record;
        record.time = now;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            SolveResult result =
                solve(nominals, setup.planner.samples_per_agent, setup.solver, setup.risk,
                      derive_seed(setup.seed, static_cast<std::uint64_t>(replans), 0x30177));
            for (int i = 0; i < n; ++i)
                plans[static_cast<size_t>(i)] =
                    weighted_mean_trajectory(result.strategies[static_cast<size_t>(i)]);
            record.solved = true;
            record.converged = result.converged;
            record.iterations_used = result.iterations_used;
            record.free_energy_trace = result.free_energy_trace;
        } catch (const SolverError&) {
            for (int i = 0; i < n; ++i) plans[static_cast<size_t>(i)] = nominals[static_cast<size_t>(i)].mean;
            record.fallback = true;
        }
        record.solve_wall_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        record.plan = plans[0];
        record.tracked_agents = n - 1;
        trace.plans.push_back(std::move(record));
        plan_start = now;
        ++replans;
    };

    double now = 0.0;
    const auto push_record = [&]() {
        StepRecord record;
        record.time = now;
        record.robot_position = positions[0];
        record.robot_velocity = velocities[0];
        record.robot_heading = std::atan2(velocities[0].y, velocities[0].x);
        record.plan_index = static_cast<int>(trace.plans.size()) - 1;
        for (int i = 1; i < n; ++i) {
            record.ped_positions.push_back(positions[static_cast<size_t>(i)]);
            record.ped_velocities.push_back(velocities[static_cast<size_t>(i)]);
            record.ped_active.push_back(1);
        }
        trace.steps.push_back(std::move(record));
    };

    std::vector<double> reach_time(static_cast<size_t>(n), -1.0);
    int steps_taken = 0;
    for (int step = 0; step < max_steps; ++step) {
        now = step * setup.scenario.control_dt;
        if (step % steps_per_replan == 0) joint_replan(now);
        push_record();
        const double tau = now + setup.scenario.control_dt - plan_start;
        for (int i = 0; i < n; ++i) {
            Vec2& pos = positions[static_cast<size_t>(i)];
            const Vec2 goal = endpoints[static_cast<size_t>(i)].goal;
            if (reach_time[static_cast<size_t>(i)] >= 0.0) {
                velocities[static_cast<size_t>(i)] = {0.0, 0.0};
                continue;
            }
            const Trajectory& plan = plans[static_cast<size_t>(i)];
            const double horizon = (plan.size() - 1) * setup.planner.dt;
            Vec2 target;
            if (tau <= horizon) {
                target = detail::eval_plan_at(plan, setup.planner.dt, tau);
            } else {
                const double step_len = setup.scenario.desired_speed * setup.scenario.control_dt;
                const double remaining = distance(pos, goal);
                target = pos + unit_toward(pos, goal) * std::min(step_len, remaining);
            }
            velocities[static_cast<size_t>(i)] =
                (target - pos) * (1.0 / setup.scenario.control_dt);
            pos = target;
            if (distance(pos, goal) <= goal_tol)
                reach_time[static_cast<size_t>(i)] = now + setup.scenario.control_dt;
        }
        steps_taken = step + 1;
        bool all_done = true;
        for (int i = 0; i < n; ++i)
            if (reach_time[static_cast<size_t>(i)] < 0.0) all_done = false;
        if (all_done) break;
    }
    now = steps_taken * setup.scenario.control_dt;
    push_record();

    Metrics& metrics = trace.metrics;
    for (const StepRecord& record : trace.steps) {
        double best = detail::record_min_distance(record);
        for (size_t a = 0; a < record.ped_positions.size(); ++a)
            for (size_t b = a + 1; b < record.ped_positions.size(); ++b)
                best = std::min(best,
                                distance(record.ped_positions[a], record.ped_positions[b]));
        metrics.safety_distance = std::min(metrics.safety_distance, best);
    }
    metrics.collided = metrics.safety_distance < 2.0 * setup.scenario.body_radius;
    bool all_reached = true;
    for (int i = 0; i < n; ++i)
        if (reach_time[static_cast<size_t>(i)] < 0.0) all_reached = false;
    metrics.froze = !all_reached;
    metrics.robot_time_to_goal =
        reach_time[0] >= 0.0 ? reach_time[0] : setup.scenario.episode_timeout;

    for (int i = 0; i < n; ++i) {
        std::vector<Vec2> points;
        points.reserve(trace.steps.size());
        for (const StepRecord& record : trace.steps)
            points.push_back(i == 0 ? record.robot_position
                                    : record.ped_positions[static_cast<size_t>(i - 1)]);
        metrics.path_lengths.push_back(detail::polyline_length(points));
        metrics.times_to_goal.push_back(reach_time[static_cast<size_t>(i)] >= 0.0
                                            ? reach_time[static_cast<size_t>(i)]
                                            : setup.scenario.episode_timeout);
    }
    metrics.max_path_length = 0.0;
    for (double length : metrics.path_lengths)
        metrics.max_path_length = std::max(metrics.max_path_length, length);
    return trace;
}

}  // namespace brne
