#pragma once

// Nominal mixed strategies as Gaussian processes on the planning grid.
//
// A nominal strategy is built in three steps: pick a mean trajectory
// (constant-velocity for pedestrians, straight-to-goal for the robot),
// evaluate an RBF kernel over the grid times, and condition the resulting
// multivariate normal on anchor waypoints with user-chosen marginal
// uncertainty. The x and y axes share one kernel and are treated as
// independent GPs, so a single Cholesky factor serves both axes.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "brne/core.hpp"
#include "brne/rng.hpp"

namespace brne {

/// Radial-basis kernel over time: k(t, t') = variance * exp(-(t-t')^2 / (2 l^2)).
struct KernelSpec {
    double variance = 0.25;     // m^2
    double lengthscale = 1.5;   // seconds
};

inline void validate(const KernelSpec& kernel) {
    if (!(kernel.variance > 0.0)) throw Error("KernelSpec: variance must be > 0");
    if (!(kernel.lengthscale > 0.0)) throw Error("KernelSpec: lengthscale must be > 0");
}

/// Soft waypoint constraint: the conditioned GP passes through `value` at grid
/// step `index` with marginal standard deviation `stddev`.
struct GPAnchor {
    int index = 0;
    Vec2 value;
    double stddev = 1e-3;  // meters; exact constraints are approximated by a small stddev
};

struct GPConditioning {
    std::vector<GPAnchor> anchors;
};

/// Conditioned Gaussian process over the grid: mean trajectory plus one
/// lower-triangular factor L with L L^T = posterior covariance (+ jitter),
/// shared by the x and y axes.
struct NominalStrategy {
    TimeGrid grid;
    Trajectory mean;
    Eigen::MatrixXd cov_factor;

    /// Marginal standard deviation at grid step t, i.e. sqrt(diag(L L^T)[t]).
    double marginal_std(int t) const { return cov_factor.row(t).norm(); }
};

/// Constant-velocity mean: points[t] = position + velocity * (t * dt).
inline Trajectory pedestrian_mean(const AgentObservation& obs, const TimeGrid& grid) {
    validate(grid);
    validate(obs);
    Trajectory mean;
    mean.points.reserve(static_cast<size_t>(grid.horizon_steps));
    for (int t = 0; t < grid.horizon_steps; ++t)
        mean.points.push_back(obs.position + obs.velocity * (t * grid.dt));
    return mean;
}

/// Straight segment from start toward goal at nominal_speed, clamped at the
/// goal once reached.
inline Trajectory robot_mean(const Vec2& start, const Vec2& goal, double nominal_speed,
                             const TimeGrid& grid) {
    validate(grid);
    if (!(nominal_speed > 0.0)) throw Error("robot_mean: nominal_speed must be > 0");
    const double total = distance(start, goal);
    const Vec2 dir = unit_toward(start, goal);
    Trajectory mean;
    mean.points.reserve(static_cast<size_t>(grid.horizon_steps));
    for (int t = 0; t < grid.horizon_steps; ++t) {
        const double along = std::min(nominal_speed * t * grid.dt, total);
        mean.points.push_back(start + dir * along);
    }
    return mean;
}

namespace detail {

inline Eigen::MatrixXd rbf_gram(const KernelSpec& kernel, const TimeGrid& grid) {
    const int n = grid.horizon_steps;
    Eigen::MatrixXd gram(n, n);
    const double inv_two_l2 = 1.0 / (2.0 * kernel.lengthscale * kernel.lengthscale);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double dt = (i - j) * grid.dt;
            const double k = kernel.variance * std::exp(-dt * dt * inv_two_l2);
            gram(i, j) = k;
            gram(j, i) = k;
        }
    }
    return gram;
}

// Cholesky with an escalating jitter: 1e-10*variance up to 1e-4*variance.
inline Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& cov, double variance) {
    for (double jitter = 1e-10 * variance; jitter <= 1e-4 * variance * (1.0 + 1e-12);
         jitter *= 10.0) {
        Eigen::MatrixXd shifted = cov;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericalError("condition_gp: covariance factorization failed at maximum jitter");
}

}  // namespace detail

/// Condition the GP prior (kernel Gram over grid times, around `mean`) on the
/// given anchors. Returns the posterior mean and the shared per-axis
/// covariance factor. With no anchors the covariance is the raw Gram matrix
/// (plus factorization jitter).
inline NominalStrategy condition_gp(const KernelSpec& kernel, const Trajectory& mean,
                                    const GPConditioning& cond, const TimeGrid& grid) {
    validate(grid);
    validate(kernel);
    if (mean.size() != grid.horizon_steps)
        throw GridMismatchError("condition_gp: mean trajectory not aligned to grid");

    const int n_anchors = static_cast<int>(cond.anchors.size());
    for (int a = 0; a < n_anchors; ++a) {
        const GPAnchor& anchor = cond.anchors[static_cast<size_t>(a)];
        if (anchor.index < 0 || anchor.index >= grid.horizon_steps)
            throw Error("condition_gp: anchor index outside grid");
        if (a > 0 && anchor.index <= cond.anchors[static_cast<size_t>(a - 1)].index)
            throw Error("condition_gp: anchor indices must be strictly increasing");
        if (!(anchor.stddev > 0.0)) throw Error("condition_gp: anchor stddev must be > 0");
    }

    const Eigen::MatrixXd gram = detail::rbf_gram(kernel, grid);

    NominalStrategy nominal;
    nominal.grid = grid;
    nominal.mean = mean;
    if (n_anchors == 0) {
        nominal.cov_factor = detail::robust_cholesky(gram, kernel.variance);
        return nominal;
    }

    const int n = grid.horizon_steps;
    Eigen::MatrixXd cross(n, n_anchors);       // K_a
    Eigen::MatrixXd anchor_gram(n_anchors, n_anchors);
    Eigen::VectorXd residual_x(n_anchors), residual_y(n_anchors);
    for (int a = 0; a < n_anchors; ++a) {
        const GPAnchor& anchor = cond.anchors[static_cast<size_t>(a)];
        cross.col(a) = gram.col(anchor.index);
        for (int b = 0; b < n_anchors; ++b)
            anchor_gram(a, b) = gram(anchor.index, cond.anchors[static_cast<size_t>(b)].index);
        anchor_gram(a, a) += anchor.stddev * anchor.stddev;
        residual_x(a) = anchor.value.x - mean[anchor.index].x;
        residual_y(a) = anchor.value.y - mean[anchor.index].y;
    }

    Eigen::LLT<Eigen::MatrixXd> anchor_llt(anchor_gram);
    if (anchor_llt.info() != Eigen::Success)
        throw NumericalError("condition_gp: anchor system not positive definite");

    const Eigen::MatrixXd gain = anchor_llt.solve(cross.transpose());  // (K_aa + D)^-1 K_a^T
    Eigen::MatrixXd cov = gram - cross * gain;
    cov = 0.5 * (cov + cov.transpose());  // restore exact symmetry

    const Eigen::VectorXd shift_x = gain.transpose() * residual_x;
    const Eigen::VectorXd shift_y = gain.transpose() * residual_y;
    for (int t = 0; t < n; ++t) {
        nominal.mean[t].x += shift_x(t);
        nominal.mean[t].y += shift_y(t);
    }
    nominal.cov_factor = detail::robust_cholesky(cov, kernel.variance);
    return nominal;
}

/// Draw M trajectories mean + L z (z standard normal, per axis) with unit
/// weights. Deterministic for a fixed seed; each sample consumes its normals
/// in x-axis-then-y-axis order.
inline SampledMixedStrategy sample_trajectories(const NominalStrategy& nominal, int n_samples,
                                                std::uint64_t rng_seed) {
    if (n_samples < 1) throw Error("sample_trajectories: need at least one sample");
    const int n = nominal.grid.horizon_steps;
    Rng rng(rng_seed);
    SampledMixedStrategy strategy;
    strategy.grid = nominal.grid;
    strategy.samples.reserve(static_cast<size_t>(n_samples));
    strategy.weights.assign(static_cast<size_t>(n_samples), 1.0);
    strategy.nominal_weights.assign(static_cast<size_t>(n_samples), 1.0);

    Eigen::VectorXd z_x(n), z_y(n);
    for (int j = 0; j < n_samples; ++j) {
        for (int t = 0; t < n; ++t) z_x(t) = rng.normal();
        for (int t = 0; t < n; ++t) z_y(t) = rng.normal();
        const Eigen::VectorXd dx = nominal.cov_factor * z_x;
        const Eigen::VectorXd dy = nominal.cov_factor * z_y;
        Trajectory sample;
        sample.points.reserve(static_cast<size_t>(n));
        for (int t = 0; t < n; ++t)
            sample.points.push_back({nominal.mean[t].x + dx(t), nominal.mean[t].y + dy(t)});
        strategy.samples.push_back(std::move(sample));
    }
    return strategy;
}

}  // namespace brne
