#pragma once

// Wall-clock timing of circle-scenario solves and the log-log scaling fits
// behind the complexity claims. Timing uses a monotonic clock; medians of
// warm solves are reported alongside mean +/- std.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "brne/planner.hpp"
#include "brne/sim.hpp"
#include "brne/solver.hpp"
#include "brne/verify.hpp"

namespace brne {

inline double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

inline double sample_std_of(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

/// Least-squares slope of ln(y) against ln(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

struct BenchPoint {
    int n_agents = 0;
    int samples = 0;
    int horizon = 0;
    int threads = 1;
    std::vector<double> wall_ms;  // per warm repetition
    double median_ms = 0.0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
};

/// Time `reps` warm solves of a seeded circle game at the given sizes.
inline BenchPoint time_circle_solve(int n_agents, int samples, int horizon_steps,
                                    const CircleSolveSetup& setup, int reps, int warmup,
                                    int threads, std::uint64_t base_seed) {
    BenchPoint point;
    point.n_agents = n_agents;
    point.samples = samples;
    point.horizon = horizon_steps;
    point.threads = threads;

    ScenarioConfig scenario = setup.scenario;
    scenario.n_agents = n_agents;
    scenario.rng_seed = derive_seed(base_seed, static_cast<std::uint64_t>(n_agents), 0xbe7c4);
    const std::vector<AgentEndpoints> endpoints = sample_circle_scenario(scenario);
    PlannerConfig planner = setup.planner;
    planner.horizon_steps = horizon_steps;
    planner.samples_per_agent = samples;
    const TimeGrid grid{horizon_steps, planner.dt};
    std::vector<NominalStrategy> nominals;
    nominals.reserve(endpoints.size());
    for (const AgentEndpoints& agent : endpoints)
        nominals.push_back(robot_nominal(agent.start, agent.goal, planner, setup.kernel, grid));

    SolveConfig solver = setup.solver;
    solver.threads = threads;
    for (int rep = -warmup; rep < reps; ++rep) {
        const std::uint64_t seed =
            derive_seed(base_seed, static_cast<std::uint64_t>(rep + warmup), 0x71e0);
        const auto t0 = std::chrono::steady_clock::now();
        const SolveResult result = solve(nominals, samples, solver, setup.risk, seed);
        const auto t1 = std::chrono::steady_clock::now();
        (void)result;
        if (rep >= 0)
            point.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    point.median_ms = median_of(point.wall_ms);
    point.mean_ms = mean_of(point.wall_ms);
    point.std_ms = sample_std_of(point.wall_ms);
    return point;
}

}  // namespace brne
