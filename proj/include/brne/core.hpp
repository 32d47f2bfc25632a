#pragma once

// Core trajectory and sampled-mixed-strategy types shared by every module.
// All types are immutable value objects after construction and safe to share
// across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace brne {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct GridMismatchError : Error {
    using Error::Error;
};

struct DegenerateWeightsError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct SolverError : Error {
    using Error::Error;
};

// Rejection-sampling envelope produced an unusably low acceptance rate.
struct EnvelopeError : SolverError {
    using SolverError::SolverError;
};

struct InfeasibleScenarioError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Unit vector toward `to`; zero vector if the points coincide.
inline Vec2 unit_toward(const Vec2& from, const Vec2& to) {
    const Vec2 d = to - from;
    const double n = d.norm();
    if (n <= 0.0) return {0.0, 0.0};
    return d * (1.0 / n);
}

/// Fixed planning-time discretization shared by all agents in one solve.
struct TimeGrid {
    int horizon_steps = 0;  // T, number of waypoints
    double dt = 0.0;        // seconds per step

    double total_horizon() const { return horizon_steps * dt; }
    bool operator==(const TimeGrid& o) const {
        return horizon_steps == o.horizon_steps && dt == o.dt;
    }
};

inline void validate(const TimeGrid& grid) {
    if (grid.horizon_steps < 2) throw Error("TimeGrid: horizon_steps must be >= 2");
    if (!(grid.dt > 0.0) || !std::isfinite(grid.dt)) throw Error("TimeGrid: dt must be > 0");
}

/// A pure strategy: T planar waypoints aligned to a TimeGrid.
struct Trajectory {
    std::vector<Vec2> points;

    int size() const { return static_cast<int>(points.size()); }
    const Vec2& operator[](int t) const { return points[static_cast<size_t>(t)]; }
    Vec2& operator[](int t) { return points[static_cast<size_t>(t)]; }
};

/// A mixed strategy in sample form: M trajectories plus importance weights.
///
/// Weights are kept normalized to mean 1 (sum = M) so that
/// (1/M) sum_j w_j f(s_j) is directly the Monte-Carlo estimate of E_p[f].
/// `nominal_weights` are the importance ratios that make this sample set
/// represent the agent's nominal strategy; they are all ones when the samples
/// were drawn from the nominal itself (the production path) and only differ
/// when a sample set is injected from elsewhere (e.g. discrete test games).
struct SampledMixedStrategy {
    TimeGrid grid;
    std::vector<Trajectory> samples;
    std::vector<double> weights;
    std::vector<double> nominal_weights;

    int sample_count() const { return static_cast<int>(samples.size()); }
};

struct AgentObservation {
    Vec2 position;
    Vec2 velocity;
    int agent_id = 0;
};

inline void validate(const AgentObservation& obs) {
    if (!obs.position.finite() || !obs.velocity.finite())
        throw Error("AgentObservation: non-finite state");
}

/// Rescale weights to mean 1. Input must be non-negative, finite, and not all
/// zero; the output is proportional to the input.
inline std::vector<double> normalize_weights(const std::vector<double>& weights) {
    if (weights.empty()) throw DegenerateWeightsError("normalize_weights: empty input");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0)
            throw DegenerateWeightsError("normalize_weights: negative or non-finite weight");
        sum += w;
    }
    if (sum <= 0.0) throw DegenerateWeightsError("normalize_weights: all weights are zero");
    const double scale = static_cast<double>(weights.size()) / sum;
    std::vector<double> out(weights.size());
    for (size_t j = 0; j < weights.size(); ++j) out[j] = weights[j] * scale;
    return out;
}

/// Weighted average trajectory, point t = (1/M) sum_j w_j * samples[j][t].
/// Expects weights normalized to mean 1.
inline Trajectory weighted_mean_trajectory(const SampledMixedStrategy& strategy) {
    const int m = strategy.sample_count();
    if (m == 0) throw Error("weighted_mean_trajectory: empty sample set");
    if (static_cast<int>(strategy.weights.size()) != m)
        throw Error("weighted_mean_trajectory: weight/sample count mismatch");
    const int t_steps = strategy.samples[0].size();
    Trajectory mean;
    mean.points.assign(static_cast<size_t>(t_steps), Vec2{});
    const double inv_m = 1.0 / static_cast<double>(m);
    for (int j = 0; j < m; ++j) {
        const double wj = strategy.weights[static_cast<size_t>(j)] * inv_m;
        const Trajectory& s = strategy.samples[static_cast<size_t>(j)];
        for (int t = 0; t < t_steps; ++t) mean[t] += s[t] * wj;
    }
    return mean;
}

/// Minimum over time of the distance between two grid-aligned trajectories.
inline double min_pairwise_distance(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size() || a.size() == 0)
        throw GridMismatchError("min_pairwise_distance: trajectories on different grids");
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < a.size(); ++t) best = std::min(best, distance(a[t], b[t]));
    return best;
}

}  // namespace brne
