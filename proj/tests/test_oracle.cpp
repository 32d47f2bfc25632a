#include <catch2/catch.hpp>

#include <cmath>

#include "brne/oracle.hpp"
#include "brne/verify.hpp"

using namespace brne;

namespace {

// Two-agent game with a shared risk matrix.
DiscreteGame two_agent_game(const Eigen::MatrixXd& risk, const Eigen::VectorXd& nominal_a,
                            const Eigen::VectorXd& nominal_b) {
    DiscreteGame game;
    game.n_agents = 2;
    game.n_strategies = static_cast<int>(nominal_a.size());
    game.risk.assign(2, std::vector<Eigen::MatrixXd>(2));
    game.risk[0][1] = risk;
    game.risk[1][0] = risk.transpose();
    game.risk[0][0] = Eigen::MatrixXd::Zero(game.n_strategies, game.n_strategies);
    game.risk[1][1] = game.risk[0][0];
    game.nominals = {nominal_a, nominal_b};
    return game;
}

}  // namespace

TEST_CASE("exact_posterior: zero risk returns the nominal") {
    Eigen::VectorXd nominal(3);
    nominal << 0.2, 0.5, 0.3;
    const auto game = two_agent_game(Eigen::MatrixXd::Zero(3, 3), nominal, nominal);
    const Eigen::VectorXd posterior = exact_posterior(game, 0, game.nominals);
    CHECK((posterior - nominal).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("exact_posterior: exponent gap ln 3 gives [0.75, 0.25]") {
    Eigen::VectorXd nominal(2);
    nominal << 0.5, 0.5;
    Eigen::MatrixXd risk(2, 2);
    const double ln3 = std::log(3.0);
    risk << 0.0, 0.0, ln3, ln3;  // e = [0, ln 3] regardless of the other's mix
    const auto game = two_agent_game(risk, nominal, nominal);
    const Eigen::VectorXd posterior = exact_posterior(game, 0, game.nominals);
    CHECK(posterior(0) == Approx(0.75).epsilon(1e-12));
    CHECK(posterior(1) == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("exact_posterior: capped huge risk drives mass to exactly zero") {
    Eigen::VectorXd nominal(2);
    nominal << 0.5, 0.5;
    Eigen::MatrixXd risk(2, 2);
    risk << 0.0, 0.0, 1e12, 1e12;  // capped at 1e6 before exponentiation
    const auto game = two_agent_game(risk, nominal, nominal);
    const Eigen::VectorXd posterior = exact_posterior(game, 0, game.nominals);
    CHECK(posterior(0) == 1.0);
    CHECK(posterior(1) == 0.0);
}

TEST_CASE("exact_solve: zero risk converges in one sweep with F = 0") {
    Eigen::VectorXd nominal(4);
    nominal << 0.1, 0.2, 0.3, 0.4;
    const auto game = two_agent_game(Eigen::MatrixXd::Zero(4, 4), nominal, nominal);
    const auto result = exact_solve(game, 50, 1e-12);
    CHECK(result.converged);
    CHECK(result.iterations_used == 1);
    for (double f : result.free_energy_trace) CHECK(f == Approx(0.0).margin(1e-15));
}

TEST_CASE("exact_solve: F trace is non-increasing on random games") {
    for (int g = 0; g < 100; ++g) {
        RandomGameOptions options;
        options.min_agents = 3;
        options.max_agents = 3;
        options.min_strategies = 4;
        options.max_strategies = 4;
        const DiscreteGame game = random_game(derive_seed(4242, g), options);
        const auto result = exact_solve(game, 100, 1e-12);
        for (size_t k = 1; k < result.free_energy_trace.size(); ++k)
            CHECK(result.free_energy_trace[k] <= result.free_energy_trace[k - 1] + 1e-12);
    }
}

TEST_CASE("exact_solve: symmetric game has a symmetric equilibrium") {
    Rng rng(314);
    Eigen::MatrixXd risk(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b <= a; ++b) {
            risk(a, b) = rng.uniform(0.0, 1.0);
            risk(b, a) = risk(a, b);
        }
    Eigen::VectorXd nominal(3);
    nominal << 0.25, 0.4, 0.35;
    const auto game = two_agent_game(risk, nominal, nominal);
    auto result = exact_solve(game, 500, 1e-14);
    REQUIRE(result.converged);
    // settle to the limit point beyond the F-based stopping rule
    for (int sweep = 0; sweep < 200; ++sweep)
        for (int i = 0; i < 2; ++i)
            result.strategies[static_cast<size_t>(i)] = exact_posterior(game, i, result.strategies);
    CHECK((result.strategies[0] - result.strategies[1]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact_solve result is a fixed point of exact_posterior") {
    const DiscreteGame game = random_game(777);
    auto result = exact_solve(game, 500, 1e-14);
    REQUIRE(result.converged);
    for (int sweep = 0; sweep < 200; ++sweep)
        for (int i = 0; i < game.n_agents; ++i)
            result.strategies[static_cast<size_t>(i)] = exact_posterior(game, i, result.strategies);
    for (int i = 0; i < game.n_agents; ++i) {
        const Eigen::VectorXd again = exact_posterior(game, i, result.strategies);
        CHECK((again - result.strategies[static_cast<size_t>(i)]).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("nash_verify accepts the solved equilibrium and rejects the nominal") {
    const DiscreteGame game = random_game(31337);
    const auto result = exact_solve(game, 500, 1e-14);
    REQUIRE(result.converged);
    const NashReport at_equilibrium = nash_verify(game, result.strategies, 100);
    CHECK(at_equilibrium.is_nash);
    CHECK(at_equilibrium.max_violation <= 1e-8);

    const NashReport at_nominal = nash_verify(game, game.nominals, 100);
    CHECK_FALSE(at_nominal.is_nash);
    CHECK(at_nominal.max_violation > 0.0);
}

TEST_CASE("nash_verify: zero-risk game accepts the nominal with violation <= 0") {
    Eigen::VectorXd nominal(3);
    nominal << 0.3, 0.3, 0.4;
    const auto game = two_agent_game(Eigen::MatrixXd::Zero(3, 3), nominal, nominal);
    const NashReport report = nash_verify(game, game.nominals, 50);
    CHECK(report.is_nash);
    CHECK(report.max_violation <= 1e-12);
}

TEST_CASE("risk-reduction bound holds exactly on random games") {
    for (int g = 0; g < 100; ++g) {
        const DiscreteGame game = random_game(derive_seed(9001, g));
        const auto result = exact_solve(game, 300, 1e-13);
        double kl_total = 0.0;
        for (int i = 0; i < game.n_agents; ++i)
            kl_total += exact_kl(result.strategies[static_cast<size_t>(i)],
                                 game.nominals[static_cast<size_t>(i)]);
        const double reduction = detail::exact_risk_total(game, game.nominals) -
                                 detail::exact_risk_total(game, result.strategies);
        CHECK(reduction >= kl_total - 1e-10);
    }
}

TEST_CASE("theorem suite passes and the sign-flip mutation breaks descent") {
    const TheoremSuite healthy = run_theorem_suite(20, 555);
    CHECK(healthy.all_pass);
    CHECK(healthy.max_descent_violation <= kDescentTolerance);
    CHECK(healthy.max_nash_violation <= kNashTolerance);
    CHECK(healthy.min_bound_margin >= -kBoundTolerance);

    const TheoremSuite broken = run_theorem_suite(20, 555, +1.0);
    CHECK_FALSE(broken.all_pass);
    CHECK(broken.max_descent_violation > kDescentTolerance);
}

TEST_CASE("sampling solver matches the exact oracle sweep by sweep") {
    const OracleEquivalence equivalence = run_oracle_equivalence(25, 2718);
    CHECK(equivalence.pass);
    CHECK(equivalence.max_weight_diff <= 1e-9);
}

TEST_CASE("sampled free energy matches the exact oracle free energy") {
    // Inject a 2-agent discrete game into the sampled representation and
    // compare free_energy against the closed form.
    RandomGameOptions options;
    options.min_agents = 2;
    options.max_agents = 2;
    options.uniform_nominals = true;
    const DiscreteGame game = random_game(808, options);
    const int k = game.n_strategies;

    std::vector<SampledMixedStrategy> strategies(2);
    for (int i = 0; i < 2; ++i) {
        strategies[static_cast<size_t>(i)].grid = {2, 1.0};
        for (int a = 0; a < k; ++a) {
            Trajectory atom;
            atom.points = {{static_cast<double>(a), static_cast<double>(i)},
                           {static_cast<double>(a), static_cast<double>(i)}};
            strategies[static_cast<size_t>(i)].samples.push_back(atom);
        }
        strategies[static_cast<size_t>(i)].weights.assign(static_cast<size_t>(k), 1.0);
        strategies[static_cast<size_t>(i)].nominal_weights.assign(static_cast<size_t>(k), 1.0);
    }
    const RiskHook hook = [&game](const Trajectory& a, const Trajectory& b) {
        return game.risk[static_cast<size_t>(std::lround(a[0].y))]
                        [static_cast<size_t>(std::lround(b[0].y))](
                            static_cast<int>(std::lround(a[0].x)),
                            static_cast<int>(std::lround(b[0].x)));
    };

    SolveConfig config;
    config.max_iterations = 4;
    config.tolerance = 1e-300;
    const SolveResult sampled = solve_reweight(strategies, config, hook);

    std::vector<Eigen::VectorXd> current = game.nominals;
    for (int sweep = 0; sweep < 4; ++sweep)
        for (int i = 0; i < 2; ++i) current[static_cast<size_t>(i)] = exact_posterior(game, i, current);
    CHECK(sampled.free_energy_trace.back() ==
          Approx(exact_free_energy(game, current)).margin(1e-9));
}

TEST_CASE("DiscreteGame validation catches malformed games") {
    Eigen::VectorXd nominal(2);
    nominal << 0.6, 0.5;  // sums to 1.1
    auto game = two_agent_game(Eigen::MatrixXd::Zero(2, 2), nominal, nominal);
    CHECK_THROWS_AS(validate(game), Error);

    nominal << 0.5, 0.5;
    game = two_agent_game(Eigen::MatrixXd::Zero(2, 2), nominal, nominal);
    game.risk[1][0](0, 1) = 0.3;  // breaks the transpose pairing
    CHECK_THROWS_AS(validate(game), Error);
}
