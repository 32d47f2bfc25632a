#pragma once

// Theorem-checking suites: exact discrete-game properties (descent, Nash
// fixed point, risk-reduction bound), oracle equivalence of the sampling
// solver, and circle-scenario convergence statistics. Shared between the
// `verify` CLI command and the acceptance tests.

#include <cstdint>
#include <vector>

#include "brne/oracle.hpp"
#include "brne/parallel.hpp"
#include "brne/planner.hpp"
#include "brne/sim.hpp"
#include "brne/solver.hpp"

namespace brne {

namespace detail {

// exact_solve with a switchable exponent sign; +1 is the deliberately broken
// update used to prove the descent check can fail.
inline ExactSolveResult exact_solve_impl(const DiscreteGame& game, int max_iters, double tol,
                                         double exponent_sign) {
    ExactSolveResult result;
    result.strategies = game.nominals;
    double f_prev = exact_free_energy(game, result.strategies);
    result.free_energy_trace.push_back(f_prev);
    for (int sweep = 1; sweep <= max_iters; ++sweep) {
        for (int i = 0; i < game.n_agents; ++i)
            result.strategies[static_cast<size_t>(i)] =
                exact_posterior_impl(game, i, result.strategies, exponent_sign);
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

inline double exact_risk_total(const DiscreteGame& game,
                               const std::vector<Eigen::VectorXd>& dists) {
    double acc = 0.0;
    for (int i = 0; i < game.n_agents; ++i)
        for (int j = i + 1; j < game.n_agents; ++j)
            acc += dists[static_cast<size_t>(i)].dot(
                game.risk[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                dists[static_cast<size_t>(j)]);
    return acc;
}

}  // namespace detail

struct TheoremCase {
    std::uint64_t seed = 0;
    int n_agents = 0;
    int n_strategies = 0;
    double descent_violation = 0.0;  // max positive jump of the F trace
    double nash_violation = 0.0;     // nash_verify max_violation
    double bound_margin = 0.0;       // (nominal risk - posterior risk) - sum KL
    bool converged = false;
    bool pass = false;
};

struct TheoremSuite {
    std::vector<TheoremCase> cases;
    double max_descent_violation = 0.0;
    double max_nash_violation = 0.0;
    double min_bound_margin = 0.0;
    bool all_pass = false;
};

inline constexpr double kDescentTolerance = 1e-10;
inline constexpr double kNashTolerance = 1e-8;
inline constexpr double kBoundTolerance = 1e-10;

/// Run the exact theorem checks on seeded random games (N in 2..4, K in
/// 2..5, risks in [0,2], Dirichlet nominals): free-energy descent, Nash
/// verification of the converged point, and the risk-reduction bound.
inline TheoremSuite run_theorem_suite(int n_games, std::uint64_t base_seed,
                                      double exponent_sign = -1.0) {
    TheoremSuite suite;
    suite.min_bound_margin = std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_games; ++g) {
        TheoremCase record;
        record.seed = derive_seed(base_seed, static_cast<std::uint64_t>(g), 0x7e09a);
        const DiscreteGame game = random_game(record.seed);
        record.n_agents = game.n_agents;
        record.n_strategies = game.n_strategies;

        const ExactSolveResult result = detail::exact_solve_impl(game, 300, 1e-13, exponent_sign);
        record.converged = result.converged;
        for (size_t k = 1; k < result.free_energy_trace.size(); ++k)
            record.descent_violation =
                std::max(record.descent_violation,
                         result.free_energy_trace[k] - result.free_energy_trace[k - 1]);

        record.nash_violation =
            nash_verify(game, result.strategies, 100, derive_seed(record.seed, 0xa17)).max_violation;

        double kl_total = 0.0;
        for (int i = 0; i < game.n_agents; ++i)
            kl_total += exact_kl(result.strategies[static_cast<size_t>(i)],
                                 game.nominals[static_cast<size_t>(i)]);
        record.bound_margin = detail::exact_risk_total(game, game.nominals) -
                              detail::exact_risk_total(game, result.strategies) - kl_total;

        record.pass = record.descent_violation <= kDescentTolerance &&
                      record.nash_violation <= kNashTolerance &&
                      record.bound_margin >= -kBoundTolerance;
        suite.max_descent_violation =
            std::max(suite.max_descent_violation, record.descent_violation);
        suite.max_nash_violation = std::max(suite.max_nash_violation, record.nash_violation);
        suite.min_bound_margin = std::min(suite.min_bound_margin, record.bound_margin);
        suite.cases.push_back(record);
    }
    suite.all_pass = true;
    for (const TheoremCase& record : suite.cases) suite.all_pass &= record.pass;
    return suite;
}

struct OracleEquivalence {
    int games = 0;
    int sweeps_per_game = 0;
    double max_weight_diff = 0.0;  // max |w/K - p| over all sweeps/agents/entries
    bool pass = false;
};

/// Drive the sampling solver (IS mode) with a discrete game's strategies:
/// agent i's sample set holds the K pure strategies, one trajectory atom
/// each, and the injected risk hook reads the game's risk matrix. With
/// uniform nominals this sample representation is exact, so each Gauss-Seidel
/// sweep must match exact_posterior to floating-point accuracy.
inline OracleEquivalence run_oracle_equivalence(int n_games, std::uint64_t base_seed,
                                                int sweeps = 6) {
    OracleEquivalence out;
    out.games = n_games;
    out.sweeps_per_game = sweeps;
    for (int g = 0; g < n_games; ++g) {
        RandomGameOptions options;
        options.uniform_nominals = true;
        const DiscreteGame game =
            random_game(derive_seed(base_seed, static_cast<std::uint64_t>(g), 0x0eac1e), options);
        const int n = game.n_agents;
        const int k = game.n_strategies;

        // Atom trajectories: x encodes the strategy index, y the agent index.
        const TimeGrid grid{2, 1.0};
        std::vector<SampledMixedStrategy> strategies(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            SampledMixedStrategy& s = strategies[static_cast<size_t>(i)];
            s.grid = grid;
            for (int a = 0; a < k; ++a) {
                Trajectory atom;
                atom.points = {{static_cast<double>(a), static_cast<double>(i)},
                               {static_cast<double>(a), static_cast<double>(i)}};
                s.samples.push_back(atom);
            }
            s.weights.assign(static_cast<size_t>(k), 1.0);
            s.nominal_weights.assign(static_cast<size_t>(k), 1.0);
        }
        const RiskHook hook = [&game](const Trajectory& a, const Trajectory& b) {
            const int strat_a = static_cast<int>(std::lround(a[0].x));
            const int agent_a = static_cast<int>(std::lround(a[0].y));
            const int strat_b = static_cast<int>(std::lround(b[0].x));
            const int agent_b = static_cast<int>(std::lround(b[0].y));
            return game.risk[static_cast<size_t>(agent_a)][static_cast<size_t>(agent_b)](strat_a,
                                                                                         strat_b);
        };

        SolveConfig config;
        config.max_iterations = sweeps;
        config.tolerance = 1e-300;  // force a fixed number of sweeps
        config.record_weight_history = true;
        const SolveResult result = solve_reweight(std::move(strategies), config, hook);

        std::vector<Eigen::VectorXd> current = game.nominals;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            for (int i = 0; i < n; ++i) current[static_cast<size_t>(i)] = exact_posterior(game, i, current);
            for (int i = 0; i < n; ++i)
                for (int a = 0; a < k; ++a) {
                    const double from_solver =
                        result.weight_history[static_cast<size_t>(sweep)][static_cast<size_t>(i)]
                                             [static_cast<size_t>(a)] /
                        static_cast<double>(k);
                    out.max_weight_diff =
                        std::max(out.max_weight_diff,
                                 std::abs(from_solver - current[static_cast<size_t>(i)](a)));
                }
        }
    }
    out.pass = out.max_weight_diff <= 1e-9;
    return out;
}

struct CircleTrial {
    std::uint64_t seed = 0;
    bool converged = false;
    int iterations = 0;
    double descent_violation_rel = 0.0;  // max positive relative F jump
    RiskReduction risk_reduction;
};

struct CircleSuite {
    int n_agents = 0;
    std::vector<CircleTrial> trials;
    int converged_within(int sweeps) const {
        int count = 0;
        for (const CircleTrial& t : trials)
            if (t.converged && t.iterations <= sweeps) ++count;
        return count;
    }
    double max_descent_violation() const {
        double worst = 0.0;
        for (const CircleTrial& t : trials)
            worst = std::max(worst, t.descent_violation_rel);
        return worst;
    }
    int risk_bound_holds() const {
        int count = 0;
        for (const CircleTrial& t : trials)
            if (t.risk_reduction.holds) ++count;
        return count;
    }
};

struct CircleSolveSetup {
    ScenarioConfig scenario;   // circle geometry; n_agents overridden per suite
    PlannerConfig planner;     // grid, sample count, anchor stds, nominal speed
    KernelSpec kernel;
    RiskParams risk;
    SolveConfig solver;
};

/// Solve seeded circle-crossing games (one BRNE solve per trial, no episode
/// rollout) and collect convergence / descent / risk-bound statistics.
inline CircleSuite run_circle_solves(int n_agents, int trials, const CircleSolveSetup& setup,
                                     std::uint64_t base_seed, int trial_threads = 0) {
    CircleSuite suite;
    suite.n_agents = n_agents;
    suite.trials.resize(static_cast<size_t>(trials));
    parallel_for(trials, trial_threads, [&](std::int64_t t0, std::int64_t t1) {
        for (std::int64_t trial = t0; trial < t1; ++trial) {
            CircleTrial record;
            record.seed = derive_seed(base_seed, static_cast<std::uint64_t>(trial), 0xc19c1e);
            ScenarioConfig scenario = setup.scenario;
            scenario.n_agents = n_agents;
            scenario.rng_seed = record.seed;
            const std::vector<AgentEndpoints> endpoints = sample_circle_scenario(scenario);
            const TimeGrid grid{setup.planner.horizon_steps, setup.planner.dt};
            std::vector<NominalStrategy> nominals;
            nominals.reserve(endpoints.size());
            for (const AgentEndpoints& agent : endpoints)
                nominals.push_back(
                    robot_nominal(agent.start, agent.goal, setup.planner, setup.kernel, grid));
            SolveConfig solver = setup.solver;
            solver.threads = 1;  // parallelism lives at the trial level here
            const SolveResult result =
                solve(nominals, setup.planner.samples_per_agent, solver, setup.risk,
                      derive_seed(record.seed, 0x501e));
            record.converged = result.converged;
            record.iterations = result.iterations_used;
            for (size_t k = 1; k < result.free_energy_trace.size(); ++k) {
                const double jump = result.free_energy_trace[k] - result.free_energy_trace[k - 1];
                const double rel =
                    jump / std::max(std::abs(result.free_energy_trace[k - 1]), 1.0);
                record.descent_violation_rel = std::max(record.descent_violation_rel, rel);
            }
            record.risk_reduction = risk_reduction_check(result, setup.risk);
            suite.trials[static_cast<size_t>(trial)] = record;
        }
    });
    return suite;
}

}  // namespace brne
