#pragma once

// Iterative Bayesian update over sampled mixed strategies.
//
// Each Gauss-Seidel sweep replaces one agent's mixed strategy with its
// Bayesian posterior against the other agents' current strategies:
//   p_i(s) = eta * p'_i(s) * exp(-sum_{a != i} E_{p_a}[r](s)).
// In importance-sampling mode the sample sets stay frozen and only weights
// move; on a frozen set each update is the exact global minimizer of that
// agent's objective, so the free energy
//   F = sum_{i<j} E_{p_i,p_j}[r] + sum_i KL(p_i || p'_i)
// is non-increasing across sweeps up to floating-point rounding. In
// rejection-sampling mode every agent redraws a fresh accepted sample set per
// sweep and the weights stay uniform.
//
// The per-sample risk accumulations inside one agent's update are
// embarrassingly parallel and are the dominant cost (O(T M^2 N^2) per solve);
// agents within a sweep are sequential by contract.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "brne/core.hpp"
#include "brne/gp.hpp"
#include "brne/parallel.hpp"
#include "brne/risk.hpp"
#include "brne/rng.hpp"

namespace brne {

enum class SolveMode { kImportanceSampling, kRejectionSampling };

struct SolveConfig {
    int max_iterations = 10;
    double tolerance = 1e-4;   // relative free-energy change across sweeps
    SolveMode mode = SolveMode::kImportanceSampling;
    double rejection_gamma = 1.2;  // RS envelope constant, > 1
    int threads = 0;               // 0 = hardware concurrency
    bool record_weight_history = false;
};

inline void validate(const SolveConfig& config) {
    if (config.max_iterations < 1) throw Error("SolveConfig: max_iterations must be >= 1");
    if (!(config.tolerance > 0.0)) throw Error("SolveConfig: tolerance must be > 0");
    if (!(config.rejection_gamma > 1.0)) throw Error("SolveConfig: rejection_gamma must be > 1");
}

struct SolveResult {
    std::vector<SampledMixedStrategy> strategies;       // posterior
    std::vector<SampledMixedStrategy> nominal_sampled;  // iteration-0 sample sets
    std::vector<double> free_energy_trace;              // [0] = F before the first sweep
    int iterations_used = 0;
    bool converged = false;
    // Expected-risk vectors e_i[j] = sum_{a != i} E_{p_a}[r](s_ij), recorded
    // against the nominal and converged strategies (diagnostics).
    std::vector<std::vector<double>> initial_risk;
    std::vector<std::vector<double>> final_risk;
    // Rejection-sampling effort (RS mode only).
    std::int64_t rs_trials = 0;
    std::int64_t rs_accepts = 0;
    // Per-sweep weight snapshots when SolveConfig::record_weight_history is set.
    std::vector<std::vector<std::vector<double>>> weight_history;
};

/// Monte-Carlo estimate of KL(p || p') from importance weights:
/// (1/M) sum_j w_j ln(w_j / w'_j), with 0 ln 0 := 0.
inline double kl_estimate(const SampledMixedStrategy& strategy) {
    double acc = 0.0;
    for (size_t j = 0; j < strategy.weights.size(); ++j) {
        const double w = strategy.weights[j];
        if (w <= 0.0) continue;
        acc += w * std::log(w / strategy.nominal_weights[j]);
    }
    return acc / static_cast<double>(strategy.weights.size());
}

/// F = sum over unordered pairs of joint expected risk + sum of KL estimates.
inline double free_energy(const std::vector<SampledMixedStrategy>& strategies,
                          const RiskHook& hook) {
    const int n = static_cast<int>(strategies.size());
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int a = i + 1; a < n; ++a)
            acc += joint_expected_risk(strategies[static_cast<size_t>(i)],
                                       strategies[static_cast<size_t>(a)], hook);
    for (const auto& strategy : strategies) acc += kl_estimate(strategy);
    return acc;
}

inline double free_energy(const std::vector<SampledMixedStrategy>& strategies,
                          const RiskParams& params) {
    validate(params);
    return free_energy(strategies, make_risk_hook(params));
}

namespace detail {

// Pairwise risk matrices for all unordered agent pairs, row-major M x M with
// rows indexed by the lower agent index of the pair.
struct PairRisk {
    int n_agents = 0;
    int n_samples = 0;
    std::vector<std::vector<double>> mats;

    int pair_index(int i, int a) const {  // requires i < a
        return i * n_agents - i * (i + 1) / 2 + (a - i - 1);
    }
    std::vector<double>& mat(int i, int a) { return mats[static_cast<size_t>(pair_index(i, a))]; }
    const std::vector<double>& mat(int i, int a) const {
        return mats[static_cast<size_t>(pair_index(i, a))];
    }
};

inline PairRisk fill_pair_risk(const std::vector<SampleBlock>& blocks,
                               const LogisticRiskTable& table, int threads) {
    PairRisk risk;
    risk.n_agents = static_cast<int>(blocks.size());
    risk.n_samples = blocks.empty() ? 0 : blocks[0].n_samples;
    risk.mats.resize(static_cast<size_t>(risk.n_agents * (risk.n_agents - 1) / 2));
    const int m = risk.n_samples;
    const bool sum_aggregation = table.aggregation() == RiskAggregation::kSumOverTime;
    for (int i = 0; i < risk.n_agents; ++i) {
        for (int a = i + 1; a < risk.n_agents; ++a) {
            std::vector<double>& mat = risk.mat(i, a);
            const SampleBlock& bi = blocks[static_cast<size_t>(i)];
            const SampleBlock& ba = blocks[static_cast<size_t>(a)];
            const std::vector<int> steps = active_steps(bi, ba, table.cutoff());
            if (steps.empty()) {
                mat.assign(static_cast<size_t>(m) * m, 0.0);
                continue;
            }
            mat.resize(static_cast<size_t>(m) * m);
            const int n_active = static_cast<int>(steps.size());
            // below ~10^5 per-step evaluations the fork-join overhead dominates
            const int fill_threads =
                static_cast<std::int64_t>(m) * m * n_active > 150000 ? threads : 1;
            // pack the active-step coordinates contiguously for both agents
            const auto pack = [&](const SampleBlock& block) {
                std::vector<double> packed(static_cast<size_t>(m) * 2 * n_active);
                for (int j = 0; j < m; ++j) {
                    double* row = packed.data() + static_cast<size_t>(j) * 2 * n_active;
                    const double* x = block.x_row(j);
                    const double* y = block.y_row(j);
                    for (int k = 0; k < n_active; ++k) {
                        row[k] = x[steps[static_cast<size_t>(k)]];
                        row[n_active + k] = y[steps[static_cast<size_t>(k)]];
                    }
                }
                return packed;
            };
            const std::vector<double> packed_i = pack(bi);
            const std::vector<double> packed_a = pack(ba);
            parallel_for(m, fill_threads, [&](std::int64_t j0, std::int64_t j1) {
                std::vector<double> distances(static_cast<size_t>(n_active));
                for (std::int64_t j = j0; j < j1; ++j) {
                    double* out = mat.data() + static_cast<size_t>(j) * m;
                    const double* a_row = packed_i.data() + static_cast<size_t>(j) * 2 * n_active;
                    for (int b = 0; b < m; ++b) {
                        const double* b_row =
                            packed_a.data() + static_cast<size_t>(b) * 2 * n_active;
                        for (int k = 0; k < n_active; ++k) {
                            const double dx = a_row[k] - b_row[k];
                            const double dy = a_row[n_active + k] - b_row[n_active + k];
                            distances[static_cast<size_t>(k)] = std::sqrt(dx * dx + dy * dy);
                        }
                        double acc = 0.0;
                        if (sum_aggregation)
                            for (int k = 0; k < n_active; ++k)
                                acc += table(distances[static_cast<size_t>(k)]);
                        else
                            for (int k = 0; k < n_active; ++k)
                                acc = std::max(acc, table(distances[static_cast<size_t>(k)]));
                        out[b] = acc;
                    }
                }
            });
        }
    }
    return risk;
}

inline PairRisk fill_pair_risk(const std::vector<SampledMixedStrategy>& strategies,
                               const RiskHook& hook) {
    PairRisk risk;
    risk.n_agents = static_cast<int>(strategies.size());
    risk.n_samples = strategies.empty() ? 0 : strategies[0].sample_count();
    risk.mats.resize(static_cast<size_t>(risk.n_agents * (risk.n_agents - 1) / 2));
    const int m = risk.n_samples;
    for (int i = 0; i < risk.n_agents; ++i) {
        for (int a = i + 1; a < risk.n_agents; ++a) {
            std::vector<double>& mat = risk.mat(i, a);
            mat.resize(static_cast<size_t>(m) * m);
            for (int j = 0; j < m; ++j)
                for (int b = 0; b < m; ++b)
                    mat[static_cast<size_t>(j) * m + b] =
                        hook(strategies[static_cast<size_t>(i)].samples[static_cast<size_t>(j)],
                             strategies[static_cast<size_t>(a)].samples[static_cast<size_t>(b)]);
        }
    }
    return risk;
}

// e[j] = sum_{a != i} (1/M) sum_b R_{ia}[j, b] * w_a[b], the accumulated
// expected risk of agent i's sample j against all other agents.
inline std::vector<double> accumulated_risk(const PairRisk& risk, int agent,
                                            const std::vector<std::vector<double>>& weights) {
    const int m = risk.n_samples;
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> e(static_cast<size_t>(m), 0.0);
    for (int a = 0; a < risk.n_agents; ++a) {
        if (a == agent) continue;
        const std::vector<double>& w = weights[static_cast<size_t>(a)];
        if (agent < a) {
            const std::vector<double>& mat = risk.mat(agent, a);
            for (int j = 0; j < m; ++j) {
                const double* row = mat.data() + static_cast<size_t>(j) * m;
                double acc = 0.0;
                for (int b = 0; b < m; ++b) acc += row[b] * w[static_cast<size_t>(b)];
                e[static_cast<size_t>(j)] += acc * inv_m;
            }
        } else {
            const std::vector<double>& mat = risk.mat(a, agent);
            for (int b = 0; b < m; ++b) {
                const double* row = mat.data() + static_cast<size_t>(b) * m;
                const double wb = w[static_cast<size_t>(b)] * inv_m;
                for (int j = 0; j < m; ++j) e[static_cast<size_t>(j)] += wb * row[j];
            }
        }
    }
    return e;
}

// Exponential tilt with a min-shift to prevent underflow; the shift is
// absorbed by the normalization constant.
inline std::vector<double> softmin_weights(const std::vector<double>& nominal_weights,
                                           const std::vector<double>& accumulated) {
    double lowest = std::numeric_limits<double>::infinity();
    for (double e : accumulated) lowest = std::min(lowest, e);
    if (!std::isfinite(lowest))
        throw SolverError("weight update: non-finite accumulated risk");
    std::vector<double> w(accumulated.size());
    for (size_t j = 0; j < accumulated.size(); ++j)
        w[j] = nominal_weights[j] * std::exp(-(accumulated[j] - lowest));
    try {
        return normalize_weights(w);
    } catch (const DegenerateWeightsError&) {
        throw SolverError("weight update: degenerate posterior weights");
    }
}

inline double pair_risk_total(const PairRisk& risk,
                              const std::vector<std::vector<double>>& weights) {
    const int m = risk.n_samples;
    const double inv_m2 = 1.0 / (static_cast<double>(m) * m);
    double total = 0.0;
    for (int i = 0; i < risk.n_agents; ++i) {
        for (int a = i + 1; a < risk.n_agents; ++a) {
            const std::vector<double>& mat = risk.mat(i, a);
            const std::vector<double>& wi = weights[static_cast<size_t>(i)];
            const std::vector<double>& wa = weights[static_cast<size_t>(a)];
            double acc = 0.0;
            for (int j = 0; j < m; ++j) {
                const double* row = mat.data() + static_cast<size_t>(j) * m;
                double inner = 0.0;
                for (int b = 0; b < m; ++b) inner += row[b] * wa[static_cast<size_t>(b)];
                acc += wi[static_cast<size_t>(j)] * inner;
            }
            total += acc * inv_m2;
        }
    }
    return total;
}

inline double kl_total(const std::vector<std::vector<double>>& weights,
                       const std::vector<SampledMixedStrategy>& strategies) {
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        const std::vector<double>& w = weights[i];
        const std::vector<double>& nw = strategies[i].nominal_weights;
        double kl = 0.0;
        for (size_t j = 0; j < w.size(); ++j)
            if (w[j] > 0.0) kl += w[j] * std::log(w[j] / nw[j]);
        acc += kl / static_cast<double>(w.size());
    }
    return acc;
}

inline void validate_shared_shape(const std::vector<SampledMixedStrategy>& strategies) {
    if (strategies.size() < 2) throw Error("solve: need at least two agents");
    const TimeGrid grid = strategies[0].grid;
    const int m = strategies[0].sample_count();
    if (m < 1) throw Error("solve: empty sample set");
    for (const auto& s : strategies) {
        if (!(s.grid == grid)) throw GridMismatchError("solve: strategies on different grids");
        if (s.sample_count() != m) throw Error("solve: sample counts differ across agents");
        if (s.weights.size() != s.samples.size() ||
            s.nominal_weights.size() != s.samples.size())
            throw Error("solve: weight vector size mismatch");
    }
}

// Shared Gauss-Seidel weight iteration on frozen sample sets.
inline SolveResult reweight_loop(std::vector<SampledMixedStrategy> strategies,
                                 const SolveConfig& config, const PairRisk& risk) {
    const int n = static_cast<int>(strategies.size());
    std::vector<std::vector<double>> weights(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        weights[static_cast<size_t>(i)] =
            normalize_weights(strategies[static_cast<size_t>(i)].nominal_weights);

    SolveResult result;
    result.initial_risk.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        result.initial_risk[static_cast<size_t>(i)] = accumulated_risk(risk, i, weights);

    double f_prev = pair_risk_total(risk, weights) + kl_total(weights, strategies);
    result.free_energy_trace.push_back(f_prev);

    for (int sweep = 1; sweep <= config.max_iterations; ++sweep) {
        for (int i = 0; i < n; ++i) {
            const std::vector<double> e = accumulated_risk(risk, i, weights);
            weights[static_cast<size_t>(i)] =
                softmin_weights(strategies[static_cast<size_t>(i)].nominal_weights, e);
        }
        const double f = pair_risk_total(risk, weights) + kl_total(weights, strategies);
        result.free_energy_trace.push_back(f);
        result.iterations_used = sweep;
        if (config.record_weight_history) result.weight_history.push_back(weights);
        const double rel_change = std::abs(f - f_prev) / std::max(std::abs(f_prev), 1.0);
        f_prev = f;
        if (rel_change < config.tolerance) {
            result.converged = true;
            break;
        }
    }

    result.final_risk.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        result.final_risk[static_cast<size_t>(i)] = accumulated_risk(risk, i, weights);
    for (int i = 0; i < n; ++i)
        strategies[static_cast<size_t>(i)].weights = std::move(weights[static_cast<size_t>(i)]);
    result.strategies = std::move(strategies);
    return result;
}

}  // namespace detail

/// One importance-sampling update for agent i against the others' current
/// weights: w_j = w'_j * exp(-e_j), rescaled to mean 1.
inline std::vector<double> update_agent_weights_is(
    int agent, const std::vector<SampledMixedStrategy>& strategies, const RiskHook& hook) {
    if (strategies.size() < 2) throw Error("update_agent_weights_is: need at least two agents");
    const int n = static_cast<int>(strategies.size());
    const int m = strategies[static_cast<size_t>(agent)].sample_count();
    std::vector<double> e(static_cast<size_t>(m), 0.0);
    for (int a = 0; a < n; ++a) {
        if (a == agent) continue;
        const std::vector<double> profile = expected_risk_profile(
            strategies[static_cast<size_t>(agent)], strategies[static_cast<size_t>(a)], hook);
        for (int j = 0; j < m; ++j) e[static_cast<size_t>(j)] += profile[static_cast<size_t>(j)];
    }
    return detail::softmin_weights(strategies[static_cast<size_t>(agent)].nominal_weights, e);
}

inline std::vector<double> update_agent_weights_is(
    int agent, const std::vector<SampledMixedStrategy>& strategies, const RiskParams& params) {
    validate(params);
    return update_agent_weights_is(agent, strategies, make_risk_hook(params));
}

/// Importance-sampling solve on externally provided (frozen) sample sets.
/// The risk hook variant is how the discrete-oracle tests drive the solver
/// with a game's risk matrix instead of the logistic trajectory risk.
inline SolveResult solve_reweight(std::vector<SampledMixedStrategy> strategies,
                                  const SolveConfig& config, const RiskHook& hook) {
    validate(config);
    detail::validate_shared_shape(strategies);
    const detail::PairRisk risk = detail::fill_pair_risk(strategies, hook);
    return detail::reweight_loop(std::move(strategies), config, risk);
}

inline SolveResult solve_reweight(std::vector<SampledMixedStrategy> strategies,
                                  const SolveConfig& config, const RiskParams& params) {
    validate(config);
    validate(params);
    detail::validate_shared_shape(strategies);
    std::vector<detail::SampleBlock> blocks;
    blocks.reserve(strategies.size());
    for (const auto& s : strategies) blocks.push_back(detail::flatten(s));
    const LogisticRiskTable table(params);
    const detail::PairRisk risk = detail::fill_pair_risk(blocks, table, config.threads);
    return detail::reweight_loop(std::move(strategies), config, risk);
}

namespace detail {

struct RejectionDiagnostics {
    std::int64_t trials = 0;
    std::int64_t accepts = 0;
};

// Draw M samples from `draw`, accepting each candidate with probability
// omega(candidate) / gamma via the test "gamma * u < omega". `accumulate_cap`
// returns the accumulated expected risk of a candidate, allowed to stop early
// once the partial sum reaches the rejection threshold. Slots use independent
// seeded streams, so results do not depend on thread count.
template <typename DrawFn, typename RiskFn>
std::vector<Trajectory> rejection_sample(int n_samples, double gamma, std::uint64_t seed,
                                         int threads, const DrawFn& draw, const RiskFn& risk_of,
                                         RejectionDiagnostics* diagnostics = nullptr) {
    std::vector<Trajectory> accepted(static_cast<size_t>(n_samples));
    std::atomic<std::int64_t> trials{0};
    std::atomic<std::int64_t> accepts{0};
    std::atomic<bool> collapsed{false};
    constexpr std::int64_t kWindow = 20000;

    parallel_for(n_samples, threads, [&](std::int64_t j0, std::int64_t j1) {
        for (std::int64_t j = j0; j < j1; ++j) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j), 0x5ca1ab1eULL));
            while (true) {
                const std::int64_t seen = trials.fetch_add(1, std::memory_order_relaxed) + 1;
                if (seen % 4096 == 0 && seen >= kWindow) {
                    const double rate =
                        static_cast<double>(accepts.load(std::memory_order_relaxed)) /
                        static_cast<double>(seen);
                    if (rate < 1e-4) {
                        collapsed.store(true, std::memory_order_relaxed);
                        return;
                    }
                }
                if (collapsed.load(std::memory_order_relaxed)) return;
                const double u = rng.uniform_open();
                if (gamma * u >= 1.0) continue;  // omega <= 1 always; reject without drawing
                const double threshold = -std::log(gamma * u);
                Trajectory candidate = draw(rng);
                const double e = risk_of(candidate, threshold);
                if (e < threshold) {
                    accepted[static_cast<size_t>(j)] = std::move(candidate);
                    accepts.fetch_add(1, std::memory_order_relaxed);
                    break;
                }
            }
        }
    });

    if (diagnostics) {
        diagnostics->trials = trials.load();
        diagnostics->accepts = accepts.load();
    }
    if (collapsed.load()) {
        const double rate = static_cast<double>(accepts.load()) /
                            std::max<std::int64_t>(trials.load(), 1);
        throw EnvelopeError("rejection sampling: acceptance rate " + std::to_string(rate) +
                            " below 1e-4 over " + std::to_string(trials.load()) +
                            " trials; risk magnitudes are too large for the envelope");
    }
    return accepted;
}

// Accumulated expected risk of a flattened candidate against the other
// agents' current sample sets, stopping once `cap` is reached.
inline double accumulated_risk_capped(const double* cx, const double* cy, int n_steps, int agent,
                                      const std::vector<SampleBlock>& blocks,
                                      const std::vector<const std::vector<double>*>& weights,
                                      const LogisticRiskTable& table, double cap) {
    double e = 0.0;
    const int n = static_cast<int>(blocks.size());
    for (int a = 0; a < n; ++a) {
        if (a == agent) continue;
        const SampleBlock& block = blocks[static_cast<size_t>(a)];
        const std::vector<double>& w = *weights[static_cast<size_t>(a)];
        const double inv_m = 1.0 / static_cast<double>(block.n_samples);
        for (int b = 0; b < block.n_samples; ++b) {
            e += inv_m * w[static_cast<size_t>(b)] *
                 row_risk(cx, cy, block.x_row(b), block.y_row(b), n_steps, table);
            if (e >= cap) return e;
        }
    }
    return e;
}

}  // namespace detail

/// One rejection-sampling update for agent i: M fresh samples drawn from the
/// nominal, each accepted with probability omega(s) / gamma against the
/// others' current strategies. The likelihood exp(-e(s)) is defined only up
/// to a constant, so omega is normalized by the lowest accumulated risk over
/// the agent's current sample set; this leaves the accepted distribution
/// unchanged while keeping the acceptance rate usable when all trajectories
/// carry unavoidable risk (dense scenes). The accepted set carries uniform
/// weights.
inline SampledMixedStrategy update_agent_strategy_rs(
    int agent, const NominalStrategy& nominal,
    const std::vector<SampledMixedStrategy>& strategies, const RiskParams& params, double gamma,
    std::uint64_t rng_seed, int threads = 0,
    detail::RejectionDiagnostics* diagnostics = nullptr) {
    if (!(gamma > 1.0)) throw Error("update_agent_strategy_rs: gamma must be > 1");
    validate(params);
    const int m = strategies[static_cast<size_t>(agent)].sample_count();
    const int n_steps = nominal.grid.horizon_steps;

    std::vector<detail::SampleBlock> blocks;
    blocks.reserve(strategies.size());
    std::vector<const std::vector<double>*> weights;
    weights.reserve(strategies.size());
    for (const auto& s : strategies) {
        blocks.push_back(detail::flatten(s));
        weights.push_back(&s.weights);
    }
    const LogisticRiskTable table(params);

    // Envelope normalizer: lowest accumulated risk across the agent's current
    // samples. Candidates below the normalizer (rare) accept with certainty.
    double shift = std::numeric_limits<double>::infinity();
    {
        const detail::SampleBlock& own = blocks[static_cast<size_t>(agent)];
        for (int j = 0; j < own.n_samples; ++j) {
            const double e = detail::accumulated_risk_capped(
                own.x_row(j), own.y_row(j), n_steps, agent, blocks, weights, table, shift);
            shift = std::min(shift, e);
        }
        if (!std::isfinite(shift)) shift = 0.0;
    }

    const Eigen::MatrixXd& factor = nominal.cov_factor;
    const auto draw = [&](Rng& rng) {
        Eigen::VectorXd z_x(n_steps), z_y(n_steps);
        for (int t = 0; t < n_steps; ++t) z_x(t) = rng.normal();
        for (int t = 0; t < n_steps; ++t) z_y(t) = rng.normal();
        const Eigen::VectorXd dx = factor * z_x;
        const Eigen::VectorXd dy = factor * z_y;
        Trajectory candidate;
        candidate.points.reserve(static_cast<size_t>(n_steps));
        for (int t = 0; t < n_steps; ++t)
            candidate.points.push_back({nominal.mean[t].x + dx(t), nominal.mean[t].y + dy(t)});
        return candidate;
    };
    const auto risk_of = [&](const Trajectory& candidate, double cap) {
        std::vector<double> cx(static_cast<size_t>(n_steps)), cy(static_cast<size_t>(n_steps));
        for (int t = 0; t < n_steps; ++t) {
            cx[static_cast<size_t>(t)] = candidate[t].x;
            cy[static_cast<size_t>(t)] = candidate[t].y;
        }
        const double e = detail::accumulated_risk_capped(cx.data(), cy.data(), n_steps, agent,
                                                         blocks, weights, table, cap + shift);
        return std::max(e - shift, 0.0);
    };

    SampledMixedStrategy updated;
    updated.grid = nominal.grid;
    updated.samples =
        detail::rejection_sample(m, gamma, rng_seed, threads, draw, risk_of, diagnostics);
    updated.weights.assign(static_cast<size_t>(m), 1.0);
    updated.nominal_weights.assign(static_cast<size_t>(m), 1.0);
    return updated;
}

/// Full multi-agent solve from nominal strategies. Draws M samples per agent
/// (per-agent seed streams derived from rng_seed unless given explicitly),
/// then iterates Gauss-Seidel sweeps in ascending agent order until the
/// relative free-energy change drops below tolerance or max_iterations.
inline SolveResult solve(const std::vector<NominalStrategy>& nominals, int samples_per_agent,
                         const SolveConfig& config, const RiskParams& params,
                         std::span<const std::uint64_t> agent_seeds) {
    validate(config);
    validate(params);
    const int n = static_cast<int>(nominals.size());
    if (n < 2) throw Error("solve: need at least two agents");
    if (static_cast<int>(agent_seeds.size()) != n)
        throw Error("solve: need one seed per agent");

    std::vector<SampledMixedStrategy> strategies;
    strategies.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        strategies.push_back(sample_trajectories(nominals[static_cast<size_t>(i)],
                                                 samples_per_agent,
                                                 agent_seeds[static_cast<size_t>(i)]));

    if (config.mode == SolveMode::kImportanceSampling) {
        std::vector<SampledMixedStrategy> nominal_sampled = strategies;
        SolveResult result = solve_reweight(std::move(strategies), config, params);
        result.nominal_sampled = std::move(nominal_sampled);
        return result;
    }

    // Rejection sampling: redraw full sample sets per agent per sweep.
    std::vector<detail::SampleBlock> blocks;
    const LogisticRiskTable table(params);
    const auto risk_blocks = [&]() {
        blocks.clear();
        blocks.reserve(strategies.size());
        for (const auto& s : strategies) blocks.push_back(detail::flatten(s));
        return detail::fill_pair_risk(blocks, table, config.threads);
    };

    SolveResult result;
    result.nominal_sampled = strategies;
    {
        const detail::PairRisk risk = risk_blocks();
        std::vector<std::vector<double>> uniform(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            uniform[static_cast<size_t>(i)].assign(static_cast<size_t>(samples_per_agent), 1.0);
        result.free_energy_trace.push_back(detail::pair_risk_total(risk, uniform));
        result.initial_risk.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            result.initial_risk[static_cast<size_t>(i)] = detail::accumulated_risk(risk, i, uniform);
    }

    double f_prev = result.free_energy_trace.front();
    for (int sweep = 1; sweep <= config.max_iterations; ++sweep) {
        for (int i = 0; i < n; ++i) {
            detail::RejectionDiagnostics diagnostics;
            strategies[static_cast<size_t>(i)] = update_agent_strategy_rs(
                i, nominals[static_cast<size_t>(i)], strategies, params, config.rejection_gamma,
                derive_seed(agent_seeds[static_cast<size_t>(i)], 0xAACCE55ULL,
                            static_cast<std::uint64_t>(sweep)),
                config.threads, &diagnostics);
            result.rs_trials += diagnostics.trials;
            result.rs_accepts += diagnostics.accepts;
        }
        const detail::PairRisk risk = risk_blocks();
        std::vector<std::vector<double>> uniform(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            uniform[static_cast<size_t>(i)].assign(static_cast<size_t>(samples_per_agent), 1.0);
        const double f = detail::pair_risk_total(risk, uniform);
        result.free_energy_trace.push_back(f);
        result.iterations_used = sweep;
        const double rel_change = std::abs(f - f_prev) / std::max(std::abs(f_prev), 1.0);
        f_prev = f;
        if (sweep == config.max_iterations || rel_change < config.tolerance) {
            result.final_risk.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i)
                result.final_risk[static_cast<size_t>(i)] =
                    detail::accumulated_risk(risk, i, uniform);
            if (rel_change < config.tolerance) result.converged = true;
            break;
        }
    }
    result.strategies = std::move(strategies);
    return result;
}

inline SolveResult solve(const std::vector<NominalStrategy>& nominals, int samples_per_agent,
                         const SolveConfig& config, const RiskParams& params,
                         std::uint64_t rng_seed) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(nominals.size());
    for (size_t i = 0; i < nominals.size(); ++i)
        seeds.push_back(derive_seed(rng_seed, static_cast<std::uint64_t>(i), 0x5eedULL));
    return solve(nominals, samples_per_agent, config, params,
                 std::span<const std::uint64_t>(seeds));
}

/// Theorem-4 check: the drop in total joint expected risk from nominal to
/// posterior is lower-bounded by the total KL divergence. lhs and rhs are
/// evaluated on the solve's own sample sets; mc_tolerance combines a rounding
/// floor with 3 approximate Monte-Carlo standard errors of the risk estimates.
struct RiskReduction {
    double lhs = 0.0;  // nominal joint risk - posterior joint risk
    double rhs = 0.0;  // sum of KL estimates
    double mc_tolerance = 0.0;
    bool holds = false;
};

inline RiskReduction risk_reduction_check(const SolveResult& result, const RiskParams&) {
    RiskReduction out;
    double kl_nominal = 0.0;
    for (const auto& s : result.nominal_sampled) kl_nominal += kl_estimate(s);
    double kl_post = 0.0;
    for (const auto& s : result.strategies) kl_post += kl_estimate(s);

    const double risk_nominal = result.free_energy_trace.front() - kl_nominal;
    const double risk_post = result.free_energy_trace.back() - kl_post;
    out.rhs = kl_post;
    out.lhs = risk_nominal - risk_post;

    // Approximate MC standard error of a total joint risk: treat the
    // per-sample weighted risk halves as independent contributions.
    const auto total_se = [](const std::vector<std::vector<double>>& profiles,
                             const std::vector<SampledMixedStrategy>& strategies) {
        double var_sum = 0.0;
        for (size_t i = 0; i < profiles.size(); ++i) {
            const std::vector<double>& e = profiles[i];
            const size_t m = e.size();
            double mean = 0.0;
            for (size_t j = 0; j < m; ++j) mean += strategies[i].weights[j] * e[j];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (size_t j = 0; j < m; ++j) {
                const double d = strategies[i].weights[j] * e[j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m) * std::max<double>(static_cast<double>(m) - 1.0, 1.0);
            var_sum += var;
        }
        return 0.5 * std::sqrt(var_sum);
    };
    const double se = total_se(result.initial_risk, result.nominal_sampled) +
                      total_se(result.final_risk, result.strategies);
    out.mc_tolerance =
        std::max(3.0 * se, 1e-9 * std::max({1.0, std::abs(out.lhs), std::abs(out.rhs)}));
    out.holds = out.lhs >= out.rhs - out.mc_tolerance;
    return out;
}

}  // namespace brne
