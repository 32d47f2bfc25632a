#pragma once

// Exact finite-strategy-space reference implementation of the iterative
// Bayesian update. With K pure strategies per agent every posterior,
// free-energy value, and Nash condition is computable in closed form, which
// makes this the Monte-Carlo-noise-free oracle for the theorem tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "brne/core.hpp"
#include "brne/rng.hpp"

namespace brne {

struct DiscreteGame {
    int n_agents = 0;      // N
    int n_strategies = 0;  // K
    // risk[i][j]: K x K, entry (a, b) = risk between strategy a of agent i and
    // strategy b of agent j; risk[i][j] must equal risk[j][i] transposed.
    std::vector<std::vector<Eigen::MatrixXd>> risk;
    std::vector<Eigen::VectorXd> nominals;  // probability vectors, sum 1
};

inline void validate(const DiscreteGame& game) {
    if (game.n_agents < 2) throw Error("DiscreteGame: need at least two agents");
    if (game.n_strategies < 1) throw Error("DiscreteGame: need at least one strategy");
    if (static_cast<int>(game.nominals.size()) != game.n_agents)
        throw Error("DiscreteGame: nominal count mismatch");
    for (const auto& nominal : game.nominals) {
        if (nominal.size() != game.n_strategies) throw Error("DiscreteGame: nominal size mismatch");
        if (std::abs(nominal.sum() - 1.0) > 1e-12)
            throw Error("DiscreteGame: nominal does not sum to 1");
        if ((nominal.array() < 0.0).any()) throw Error("DiscreteGame: negative nominal mass");
    }
    for (int i = 0; i < game.n_agents; ++i) {
        for (int j = 0; j < game.n_agents; ++j) {
            if (i == j) continue;
            const Eigen::MatrixXd& m = game.risk[static_cast<size_t>(i)][static_cast<size_t>(j)];
            const Eigen::MatrixXd& mt = game.risk[static_cast<size_t>(j)][static_cast<size_t>(i)];
            if ((m - mt.transpose()).cwiseAbs().maxCoeff() > 1e-12)
                throw Error("DiscreteGame: risk[i][j] != risk[j][i]^T");
            if ((m.array() < 0.0).any()) throw Error("DiscreteGame: negative risk");
        }
    }
}

namespace detail {

constexpr double kRiskCap = 1e6;  // finite-risk assumption; avoids inf * 0

// exponent_sign = -1 is the Bayesian posterior; +1 is a deliberately broken
// variant used by the verify command to prove the descent test can fail.
inline Eigen::VectorXd exact_posterior_impl(const DiscreteGame& game, int agent,
                                            const std::vector<Eigen::VectorXd>& current,
                                            double exponent_sign) {
    Eigen::VectorXd exponent = Eigen::VectorXd::Zero(game.n_strategies);
    for (int a = 0; a < game.n_agents; ++a) {
        if (a == agent) continue;
        exponent += game.risk[static_cast<size_t>(agent)][static_cast<size_t>(a)] *
                    current[static_cast<size_t>(a)];
    }
    exponent = exponent.cwiseMin(kRiskCap);
    const double shift =
        exponent_sign < 0.0 ? exponent.minCoeff() : exponent.maxCoeff();
    Eigen::VectorXd posterior(game.n_strategies);
    for (int k = 0; k < game.n_strategies; ++k)
        posterior(k) = game.nominals[static_cast<size_t>(agent)](k) *
                       std::exp(exponent_sign * (exponent(k) - shift));
    const double total = posterior.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw SolverError("exact_posterior: degenerate posterior");
    return posterior / total;
}

}  // namespace detail

/// Gauss-Seidel Bayesian posterior for one agent:
/// p_i[k] proportional to nominal_i[k] * exp(-sum_{a != i} (risk_ia p_a)[k]).
inline Eigen::VectorXd exact_posterior(const DiscreteGame& game, int agent,
                                       const std::vector<Eigen::VectorXd>& current) {
    return detail::exact_posterior_impl(game, agent, current, -1.0);
}

inline double exact_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& prior) {
    double acc = 0.0;
    for (int k = 0; k < p.size(); ++k)
        if (p(k) > 0.0) acc += p(k) * std::log(p(k) / prior(k));
    return acc;
}

/// F = sum_{i<j} p_i^T risk_ij p_j + sum_i KL(p_i || nominal_i), exactly.
inline double exact_free_energy(const DiscreteGame& game,
                                const std::vector<Eigen::VectorXd>& dists) {
    double acc = 0.0;
    for (int i = 0; i < game.n_agents; ++i)
        for (int j = i + 1; j < game.n_agents; ++j)
            acc += dists[static_cast<size_t>(i)].dot(
                game.risk[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                dists[static_cast<size_t>(j)]);
    for (int i = 0; i < game.n_agents; ++i)
        acc += exact_kl(dists[static_cast<size_t>(i)], game.nominals[static_cast<size_t>(i)]);
    return acc;
}

struct ExactSolveResult {
    std::vector<Eigen::VectorXd> strategies;
    std::vector<double> free_energy_trace;
    int iterations_used = 0;
    bool converged = false;
};

/// Gauss-Seidel sweeps of exact_posterior until the relative free-energy
/// change drops below tol.
inline ExactSolveResult exact_solve(const DiscreteGame& game, int max_iters, double tol) {
    validate(game);
    ExactSolveResult result;
    result.strategies = game.nominals;
    double f_prev = exact_free_energy(game, result.strategies);
    result.free_energy_trace.push_back(f_prev);
    for (int sweep = 1; sweep <= max_iters; ++sweep) {
        for (int i = 0; i < game.n_agents; ++i)
            result.strategies[static_cast<size_t>(i)] =
                exact_posterior(game, i, result.strategies);
        const double f = exact_free_energy(game, result.strategies);
        result.free_energy_trace.push_back(f);
        result.iterations_used = sweep;
        const double rel_change = std::abs(f - f_prev) / std::max(std::abs(f_prev), 1.0);
        f_prev = f;
        if (rel_change < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

/// Objective of agent i: J_i = sum_{a != i} p_i^T risk_ia p_a + KL(p_i || nominal_i).
inline double exact_objective(const DiscreteGame& game, int agent,
                              const std::vector<Eigen::VectorXd>& dists,
                              const Eigen::VectorXd& p_agent) {
    double acc = exact_kl(p_agent, game.nominals[static_cast<size_t>(agent)]);
    for (int a = 0; a < game.n_agents; ++a) {
        if (a == agent) continue;
        acc += p_agent.dot(game.risk[static_cast<size_t>(agent)][static_cast<size_t>(a)] *
                           dists[static_cast<size_t>(a)]);
    }
    return acc;
}

struct NashReport {
    double max_violation = 0.0;  // max over agents/alternatives of J_i(candidate) - J_i(alt)
    bool is_nash = false;
};

/// Verify the Nash condition of `candidate`: for each agent, compare its
/// objective against (a) the exact best response (the closed-form global
/// minimizer) and (b) `trials` random distributions.
inline NashReport nash_verify(const DiscreteGame& game,
                              const std::vector<Eigen::VectorXd>& candidate, int trials,
                              std::uint64_t seed = 0x6a7e5) {
    validate(game);
    NashReport report;
    double worst = -std::numeric_limits<double>::infinity();
    Rng rng(seed);
    for (int i = 0; i < game.n_agents; ++i) {
        const double j_candidate =
            exact_objective(game, i, candidate, candidate[static_cast<size_t>(i)]);
        const Eigen::VectorXd best = exact_posterior(game, i, candidate);
        worst = std::max(worst, j_candidate - exact_objective(game, i, candidate, best));
        for (int trial = 0; trial < trials; ++trial) {
            Eigen::VectorXd alt(game.n_strategies);
            double total = 0.0;
            for (int k = 0; k < game.n_strategies; ++k) {
                alt(k) = -std::log(rng.uniform_open());  // exponential spacing -> Dirichlet(1)
                total += alt(k);
            }
            alt /= total;
            worst = std::max(worst, j_candidate - exact_objective(game, i, candidate, alt));
        }
    }
    report.max_violation = worst;
    report.is_nash = worst <= 1e-8;
    return report;
}

struct RandomGameOptions {
    int min_agents = 2;
    int max_agents = 4;
    int min_strategies = 2;
    int max_strategies = 5;
    double max_risk = 2.0;
    bool uniform_nominals = false;
};

/// Seeded random game: symmetric-pair risk matrices with entries in
/// [0, max_risk], Dirichlet(1) nominals (or uniform when requested).
inline DiscreteGame random_game(std::uint64_t seed, const RandomGameOptions& options = {}) {
    Rng rng(seed);
    DiscreteGame game;
    game.n_agents = options.min_agents +
                    static_cast<int>(rng.uniform_index(
                        static_cast<std::uint64_t>(options.max_agents - options.min_agents + 1)));
    game.n_strategies =
        options.min_strategies +
        static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(options.max_strategies - options.min_strategies + 1)));
    game.risk.assign(static_cast<size_t>(game.n_agents),
                     std::vector<Eigen::MatrixXd>(static_cast<size_t>(game.n_agents)));
    for (int i = 0; i < game.n_agents; ++i) {
        for (int j = i + 1; j < game.n_agents; ++j) {
            Eigen::MatrixXd m(game.n_strategies, game.n_strategies);
            for (int a = 0; a < game.n_strategies; ++a)
                for (int b = 0; b < game.n_strategies; ++b)
                    m(a, b) = rng.uniform(0.0, options.max_risk);
            game.risk[static_cast<size_t>(i)][static_cast<size_t>(j)] = m;
            game.risk[static_cast<size_t>(j)][static_cast<size_t>(i)] = m.transpose();
        }
        game.risk[static_cast<size_t>(i)][static_cast<size_t>(i)] =
            Eigen::MatrixXd::Zero(game.n_strategies, game.n_strategies);
    }
    for (int i = 0; i < game.n_agents; ++i) {
        Eigen::VectorXd nominal(game.n_strategies);
        if (options.uniform_nominals) {
            nominal.setConstant(1.0 / game.n_strategies);
        } else {
            double total = 0.0;
            for (int k = 0; k < game.n_strategies; ++k) {
                nominal(k) = -std::log(rng.uniform_open());
                total += nominal(k);
            }
            nominal /= total;
        }
        game.nominals.push_back(nominal);
    }
    return game;
}

}  // namespace brne
