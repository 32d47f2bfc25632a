#pragma once

// Pairwise logistic collision risk and Monte-Carlo estimators of expected
// risk against sampled mixed strategies.
//
// Per time step the risk of two trajectories at distance d is
//   scale / (1 + exp(steepness * (d - comfort_distance)))
// aggregated over the horizon by sum (default) or max. The public operations
// evaluate the logistic exactly; solvers use LogisticRiskTable, a cubic
// Hermite tabulation of the same curve (error ~1e-12 * scale), because the
// per-step risk evaluation is the hot loop of the whole pipeline.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "brne/core.hpp"

namespace brne {

enum class RiskAggregation { kSumOverTime, kMaxOverTime };

struct RiskParams {
    double scale = 1.0;              // dimensionless, >= 0
    double steepness = 6.0;          // 1/m, > 0
    double comfort_distance = 0.6;   // m, > 0
    RiskAggregation aggregation = RiskAggregation::kSumOverTime;
};

inline void validate(const RiskParams& params) {
    if (!(params.scale >= 0.0)) throw Error("RiskParams: scale must be >= 0");
    if (!(params.steepness > 0.0)) throw Error("RiskParams: steepness must be > 0");
    if (!(params.comfort_distance > 0.0)) throw Error("RiskParams: comfort_distance must be > 0");
}

/// Per-step logistic risk at distance d, in [0, scale].
inline double step_risk(double d, const RiskParams& params) {
    return params.scale / (1.0 + std::exp(params.steepness * (d - params.comfort_distance)));
}

/// Collision risk between two pure strategies; symmetric in its arguments.
inline double pairwise_risk(const Trajectory& a, const Trajectory& b, const RiskParams& params) {
    if (a.size() != b.size() || a.size() == 0)
        throw GridMismatchError("pairwise_risk: trajectories on different grids");
    double total = 0.0;
    for (int t = 0; t < a.size(); ++t) {
        const double r = step_risk(distance(a[t], b[t]), params);
        if (params.aggregation == RiskAggregation::kSumOverTime)
            total += r;
        else
            total = std::max(total, r);
    }
    return total;
}

/// Injectable risk evaluation, used to drive the solver off a discrete game's
/// risk matrix in the theorem tests.
using RiskHook = std::function<double(const Trajectory&, const Trajectory&)>;

inline RiskHook make_risk_hook(const RiskParams& params) {
    return [params](const Trajectory& a, const Trajectory& b) {
        return pairwise_risk(a, b, params);
    };
}

/// Entry j = (1/M_other) sum_b other.weights[b] * r(query.samples[j], other.samples[b]),
/// the Monte-Carlo estimate of E_{p_other}[r](query sample j).
inline std::vector<double> expected_risk_profile(const SampledMixedStrategy& query,
                                                 const SampledMixedStrategy& other,
                                                 const RiskHook& hook) {
    if (!(query.grid == other.grid))
        throw GridMismatchError("expected_risk_profile: strategies on different grids");
    const int m_query = query.sample_count();
    const int m_other = other.sample_count();
    const double inv_m = 1.0 / static_cast<double>(m_other);
    std::vector<double> out(static_cast<size_t>(m_query), 0.0);
    for (int j = 0; j < m_query; ++j) {
        double acc = 0.0;
        for (int b = 0; b < m_other; ++b)
            acc += other.weights[static_cast<size_t>(b)] *
                   hook(query.samples[static_cast<size_t>(j)], other.samples[static_cast<size_t>(b)]);
        out[static_cast<size_t>(j)] = acc * inv_m;
    }
    return out;
}

inline std::vector<double> expected_risk_profile(const SampledMixedStrategy& query,
                                                 const SampledMixedStrategy& other,
                                                 const RiskParams& params) {
    validate(params);
    return expected_risk_profile(query, other, make_risk_hook(params));
}

/// (1/(M_a M_b)) sum_j sum_b a.w[j] b.w[b] r(a_j, b_b): the joint expectation
/// of collision risk under both mixed strategies.
inline double joint_expected_risk(const SampledMixedStrategy& a, const SampledMixedStrategy& b,
                                  const RiskHook& hook) {
    const std::vector<double> profile = expected_risk_profile(a, b, hook);
    double acc = 0.0;
    for (size_t j = 0; j < profile.size(); ++j) acc += a.weights[j] * profile[j];
    return acc / static_cast<double>(profile.size());
}

inline double joint_expected_risk(const SampledMixedStrategy& a, const SampledMixedStrategy& b,
                                  const RiskParams& params) {
    validate(params);
    return joint_expected_risk(a, b, make_risk_hook(params));
}

/// Cubic-Hermite tabulation of step_risk on a uniform distance grid, stored
/// as packed per-cell polynomial coefficients for a branchless Horner
/// evaluation. Distances beyond the cutoff (where the logistic tail drops
/// below ~1e-13 * scale) evaluate to exactly zero.
class LogisticRiskTable {
public:
    explicit LogisticRiskTable(const RiskParams& params, int cells = 4096)
        : scale_(params.scale), aggregation_(params.aggregation), cells_(cells) {
        validate(params);
        cutoff_ = params.comfort_distance + 30.0 / params.steepness;
        inv_cell_ = static_cast<double>(cells) / cutoff_;
        const double h = cutoff_ / cells;
        const auto logistic = [&](double d) {
            return 1.0 / (1.0 + std::exp(params.steepness * (d - params.comfort_distance)));
        };
        // cell i covers [i*h, (i+1)*h); one extra all-zero cell absorbs d >= cutoff
        coeffs_.assign(4 * (static_cast<size_t>(cells) + 1), 0.0);
        for (int i = 0; i < cells; ++i) {
            const double s0 = logistic(i * h);
            const double s1 = logistic((i + 1) * h);
            const double v0 = params.scale * s0;
            const double v1 = params.scale * s1;
            const double g0 = -params.scale * params.steepness * s0 * (1.0 - s0) * h;
            const double g1 = -params.scale * params.steepness * s1 * (1.0 - s1) * h;
            double* c = coeffs_.data() + 4 * static_cast<size_t>(i);
            c[0] = v0;
            c[1] = g0;
            c[2] = -3.0 * v0 - 2.0 * g0 + 3.0 * v1 - g1;
            c[3] = 2.0 * v0 + g0 - 2.0 * v1 + g1;
        }
    }

    double scale() const { return scale_; }
    RiskAggregation aggregation() const { return aggregation_; }
    /// Risk is exactly zero at and beyond this distance.
    double cutoff() const { return cutoff_; }

    double operator()(double d) const {
        const double u = std::min(d * inv_cell_, static_cast<double>(cells_));
        const int i = static_cast<int>(u);
        const double t = u - i;
        const double* c = coeffs_.data() + 4 * static_cast<size_t>(i);
        return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
    }

private:
    double scale_;
    RiskAggregation aggregation_;
    int cells_;
    double cutoff_ = 0.0;
    double inv_cell_ = 0.0;
    std::vector<double> coeffs_;
};

namespace detail {

/// Sample-major flattening of a strategy's trajectories for tight inner
/// loops, with per-time-step bounding boxes over the whole sample cloud.
struct SampleBlock {
    int n_samples = 0;
    int n_steps = 0;
    std::vector<double> xs;  // [j * n_steps + t]
    std::vector<double> ys;
    std::vector<double> x_lo, x_hi, y_lo, y_hi;  // per time step

    const double* x_row(int j) const { return xs.data() + static_cast<size_t>(j) * n_steps; }
    const double* y_row(int j) const { return ys.data() + static_cast<size_t>(j) * n_steps; }
};

inline SampleBlock flatten(const SampledMixedStrategy& strategy) {
    SampleBlock block;
    block.n_samples = strategy.sample_count();
    block.n_steps = block.n_samples > 0 ? strategy.samples[0].size() : 0;
    block.xs.resize(static_cast<size_t>(block.n_samples) * block.n_steps);
    block.ys.resize(static_cast<size_t>(block.n_samples) * block.n_steps);
    const double inf = std::numeric_limits<double>::infinity();
    block.x_lo.assign(static_cast<size_t>(block.n_steps), inf);
    block.x_hi.assign(static_cast<size_t>(block.n_steps), -inf);
    block.y_lo.assign(static_cast<size_t>(block.n_steps), inf);
    block.y_hi.assign(static_cast<size_t>(block.n_steps), -inf);
    for (int j = 0; j < block.n_samples; ++j) {
        const Trajectory& s = strategy.samples[static_cast<size_t>(j)];
        double* x = block.xs.data() + static_cast<size_t>(j) * block.n_steps;
        double* y = block.ys.data() + static_cast<size_t>(j) * block.n_steps;
        for (int t = 0; t < block.n_steps; ++t) {
            x[t] = s[t].x;
            y[t] = s[t].y;
            block.x_lo[static_cast<size_t>(t)] = std::min(block.x_lo[static_cast<size_t>(t)], x[t]);
            block.x_hi[static_cast<size_t>(t)] = std::max(block.x_hi[static_cast<size_t>(t)], x[t]);
            block.y_lo[static_cast<size_t>(t)] = std::min(block.y_lo[static_cast<size_t>(t)], y[t]);
            block.y_hi[static_cast<size_t>(t)] = std::max(block.y_hi[static_cast<size_t>(t)], y[t]);
        }
    }
    return block;
}

/// Time steps at which any sample of `a` can come within the risk cutoff of
/// any sample of `b` (box-distance lower bound); elsewhere the per-step risk
/// is exactly zero and can be skipped.
inline std::vector<int> active_steps(const SampleBlock& a, const SampleBlock& b, double cutoff) {
    std::vector<int> active;
    active.reserve(static_cast<size_t>(a.n_steps));
    for (int t = 0; t < a.n_steps; ++t) {
        const size_t k = static_cast<size_t>(t);
        const double gap_x =
            std::max({a.x_lo[k] - b.x_hi[k], b.x_lo[k] - a.x_hi[k], 0.0});
        const double gap_y =
            std::max({a.y_lo[k] - b.y_hi[k], b.y_lo[k] - a.y_hi[k], 0.0});
        if (gap_x * gap_x + gap_y * gap_y < cutoff * cutoff) active.push_back(t);
    }
    return active;
}

/// Aggregated risk of one trajectory row against one other row.
inline double row_risk(const double* ax, const double* ay, const double* bx, const double* by,
                       int n_steps, const LogisticRiskTable& table) {
    double acc = 0.0;
    if (table.aggregation() == RiskAggregation::kSumOverTime) {
        for (int t = 0; t < n_steps; ++t) {
            const double dx = ax[t] - bx[t];
            const double dy = ay[t] - by[t];
            acc += table(std::sqrt(dx * dx + dy * dy));
        }
    } else {
        for (int t = 0; t < n_steps; ++t) {
            const double dx = ax[t] - bx[t];
            const double dy = ay[t] - by[t];
            acc = std::max(acc, table(std::sqrt(dx * dx + dy * dy)));
        }
    }
    return acc;
}

/// row_risk restricted to a precomputed active-step list.
inline double row_risk_at(const double* ax, const double* ay, const double* bx, const double* by,
                          const int* steps, int n_active, const LogisticRiskTable& table,
                          bool sum_aggregation, double* distance_buffer) {
    for (int k = 0; k < n_active; ++k) {
        const int t = steps[k];
        const double dx = ax[t] - bx[t];
        const double dy = ay[t] - by[t];
        distance_buffer[k] = std::sqrt(dx * dx + dy * dy);
    }
    double acc = 0.0;
    if (sum_aggregation)
        for (int k = 0; k < n_active; ++k) acc += table(distance_buffer[k]);
    else
        for (int k = 0; k < n_active; ++k) acc = std::max(acc, table(distance_buffer[k]));
    return acc;
}

}  // namespace detail

}  // namespace brne
