#include <doctest.h>

#include "nearopt/adjoint.hpp"
#include "nearopt/noise.hpp"
#include "nearopt/numeric.hpp"

#include <cmath>

using namespace nearopt;

namespace {

ControlPair still_pair(const ProblemSpec& p, const TimeGrid& grid,
                       std::size_t paths) {
    RegularControl u = RegularControl::constant(grid, paths, Vec::Zero(1), p.a1);
    SingularControl eta = SingularControl::zero(grid, paths, 1);
    return ControlPair(std::move(u), std::move(eta), "still");
}

ControlPair example1_candidate(const ProblemSpec& p, const TimeGrid& grid,
                               std::size_t paths, double u_const) {
    RegularControl u = RegularControl::constant(
        grid, paths, Vec::Constant(1, u_const), p.a1);
    SingularControl eta =
        SingularControl::atom(grid, paths, Vec::Constant(1, 1.0), grid.start);
    return ControlPair(std::move(u), std::move(eta), "candidate");
}

} // namespace

TEST_CASE("constant terminal gradient with zero driver stays constant") {
    const ProblemSpec p =
        make_problem("linear", {{"a", 0.0}, {"c", 3.0}, {"sigma", 0.5}});
    TimeGrid grid(0.0, 1.0, 50);
    const NoiseEnsemble noise = sample_noise(grid, 2000, 1, 5);
    const ControlPair pair = still_pair(p, grid, 2000);
    const StateEnsemble states = simulate(p, pair, noise);

    const FirstOrderAdjoint adj =
        solve_first_order(p, pair, states, noise, RegressionConfig{});
    // K is zero up to ridge shrinkage amplified by dW/dt
    for (std::size_t pth = 0; pth < 2000; pth += 100) {
        for (std::size_t i = 0; i <= 50; ++i) {
            CHECK(adj.psi.at(pth, i, 0) == doctest::Approx(3.0).epsilon(1e-6));
            CHECK(std::abs(adj.K.at(pth, i, 0)) <= 1e-5);
        }
    }
}

TEST_CASE("example1 regression reproduces the closed-form costate") {
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 50);
    const std::size_t paths = 4000;
    const NoiseEnsemble noise = sample_noise(grid, paths, 1, 17);
    const double ueps = 1.0 - std::sqrt(0.04);
    const ControlPair pair = example1_candidate(p, grid, paths, ueps);
    const StateEnsemble states = simulate(p, pair, noise);

    const AdjointSolution sol =
        solve_adjoints(p, pair, states, noise, RegressionConfig{});

    // (Q, R) = (1, 0): constant terminal, zero driver
    double q_err = 0.0, r_max = 0.0;
    for (std::size_t pth = 0; pth < paths; ++pth)
        for (std::size_t i = 0; i <= 50; ++i) {
            q_err = std::max(q_err, std::abs(sol.second.Q.at(pth, i, 0) - 1.0));
            r_max = std::max(r_max, std::abs(sol.second.R.at(pth, i, 0)));
        }
    CHECK(q_err <= 1e-2);
    CHECK(r_max <= 1e-2);

    // psi ~ ueps W + 1, K ~ ueps
    double sq = 0.0, k_sum = 0.0;
    std::size_t k_n = 0;
    for (std::size_t pth = 0; pth < paths; ++pth) {
        double w = 0.0;
        for (std::size_t i = 0; i <= 50; ++i) {
            const double diff = sol.first.psi.at(pth, i, 0) - (ueps * w + 1.0);
            sq += diff * diff;
            if (i < 50) {
                w += noise.increment(pth, i, 0);
                k_sum += sol.first.K.at(pth, i, 0);
                ++k_n;
            }
        }
    }
    CHECK(std::sqrt(sq / static_cast<double>(paths * 51)) <= 5e-2);
    CHECK(std::abs(k_sum / static_cast<double>(k_n) - ueps) <= 2e-2);

    // terminal conditions hold pathwise, exactly
    for (std::size_t pth = 0; pth < paths; pth += 333) {
        CHECK(sol.first.psi.at(pth, 50, 0) == states.x.at(pth, 50, 0));
        CHECK(sol.second.Q.at(pth, 50, 0) == 1.0);
    }
}

TEST_CASE("closed-form and regression backends agree on the benchmarks") {
    TimeGrid grid(0.0, 1.0, 200);
    const std::size_t paths = 10000;

    SUBCASE("linear terminal gradient") {
        const ProblemSpec p = make_problem(
            "linear", {{"a", 0.5}, {"c", 2.0}, {"sigma", 0.4}, {"y", 1.0}});
        const NoiseEnsemble noise = sample_noise(grid, paths, 1, 23);
        const ControlPair pair = still_pair(p, grid, paths);
        const StateEnsemble states = simulate(p, pair, noise);

        const AdjointSolution reg =
            solve_adjoints(p, pair, states, noise, RegressionConfig{});
        const AdjointSolution closed =
            solve_adjoints_closed_form(p, pair, states, noise);

        for (std::size_t i = 0; i <= 200; i += 20) {
            const double want = closed.first.psi.at(0, i, 0);
            CHECK(want ==
                  doctest::Approx(2.0 * std::exp(0.5 * (1.0 - grid.node(i))))
                      .epsilon(1e-12));
            CHECK(std::abs(reg.first.psi.at(7, i, 0) - want) <=
                  0.01 * std::abs(want));
            CHECK(std::abs(reg.second.Q.at(7, i, 0)) <= 1e-6);
        }
    }
    SUBCASE("quadratic terminal cost") {
        const ProblemSpec p = make_problem(
            "linear_quad", {{"a", 0.5}, {"c", 2.0}, {"sigma", 0.4}, {"y", 1.0}});
        const NoiseEnsemble noise = sample_noise(grid, paths, 1, 29);
        const ControlPair pair = still_pair(p, grid, paths);
        const StateEnsemble states = simulate(p, pair, noise);

        const AdjointSolution reg =
            solve_adjoints(p, pair, states, noise, RegressionConfig{});
        const AdjointSolution closed =
            solve_adjoints_closed_form(p, pair, states, noise);

        double q_rel = 0.0;
        double psi_sq = 0.0, psi_ref_sq = 0.0;
        for (std::size_t pth = 0; pth < paths; ++pth) {
            for (std::size_t i = 0; i <= 200; ++i) {
                const double qc = closed.second.Q.at(pth, i, 0);
                q_rel = std::max(q_rel,
                                 std::abs(reg.second.Q.at(pth, i, 0) - qc) /
                                     std::abs(qc));
                const double pc = closed.first.psi.at(pth, i, 0);
                const double diff = reg.first.psi.at(pth, i, 0) - pc;
                psi_sq += diff * diff;
                psi_ref_sq += pc * pc;
            }
        }
        CHECK(q_rel <= 0.01);
        CHECK(std::sqrt(psi_sq / psi_ref_sq) <= 0.01);

        // K ~ c s e^{2a(T-t)}; extraction noise is larger than the bias
        double k_err = 0.0;
        for (std::size_t i = 0; i < 200; i += 25) {
            double acc = 0.0;
            for (std::size_t pth = 0; pth < paths; ++pth)
                acc += reg.first.K.at(pth, i, 0);
            acc /= static_cast<double>(paths);
            const double want = closed.first.K.at(0, i, 0);
            k_err = std::max(k_err, std::abs(acc - want) / want);
        }
        CHECK(k_err <= 0.10);
    }
    SUBCASE("degenerate deterministic state is handled") {
        const ProblemSpec p = make_problem(
            "linear", {{"a", 0.5}, {"c", 2.0}, {"sigma", 0.0}, {"y", 1.0}});
        const NoiseEnsemble noise = sample_noise(grid, 64, 1, 31);
        const ControlPair pair = still_pair(p, grid, 64);
        const StateEnsemble states = simulate(p, pair, noise);
        const AdjointSolution reg =
            solve_adjoints(p, pair, states, noise, RegressionConfig{});
        const double want = 2.0 * std::exp(0.5);
        CHECK(std::abs(reg.first.psi.at(0, 0, 0) - want) <= 0.01 * want);
    }
}

TEST_CASE("quadratic running cost drives the costates through Gamma") {
    // f = 0, sigma = s, ell = x^2/2, h = 0:
    //   psi_t = x_t (T - t), K_t = s (T - t), Q_t = T - t, R = 0.
    ProblemSpec p = make_problem(
        "linear", {{"a", 0.0}, {"c", 0.0}, {"sigma", 0.3}, {"y", 0.5}});
    p.ell = [](double, const Vec& x, const Vec&) { return 0.5 * x(0) * x(0); };
    p.derivs.ell_x = [](double, const Vec& x, const Vec&) { return x; };
    p.derivs.ell_xx = [](double, const Vec&, const Vec&) {
        return Mat::Constant(1, 1, 1.0);
    };
    TimeGrid grid(0.0, 1.0, 100);
    const std::size_t paths = 8000;
    const NoiseEnsemble noise = sample_noise(grid, paths, 1, 47);
    const ControlPair pair = still_pair(p, grid, paths);
    const StateEnsemble states = simulate(p, pair, noise);
    const AdjointSolution sol =
        solve_adjoints(p, pair, states, noise, RegressionConfig{});

    double psi_sq = 0.0, q_err = 0.0;
    for (std::size_t pth = 0; pth < paths; ++pth) {
        for (std::size_t i = 0; i <= 100; ++i) {
            const double ttm = 1.0 - grid.node(i);
            const double want_psi = states.x.at(pth, i, 0) * ttm;
            const double dpsi = sol.first.psi.at(pth, i, 0) - want_psi;
            psi_sq += dpsi * dpsi;
            q_err = std::max(q_err,
                             std::abs(sol.second.Q.at(pth, i, 0) - ttm));
        }
    }
    CHECK(std::sqrt(psi_sq / static_cast<double>(paths * 101)) <= 1e-2);
    CHECK(q_err <= 1e-5); // constant Gamma integrates exactly

    for (std::size_t i = 0; i < 100; i += 20) {
        double k_mean = 0.0;
        for (std::size_t pth = 0; pth < paths; ++pth)
            k_mean += sol.first.K.at(pth, i, 0);
        k_mean /= static_cast<double>(paths);
        CHECK(k_mean == doctest::Approx(0.3 * (1.0 - grid.node(i)))
                            .epsilon(0.05));
    }
}

TEST_CASE("zero-driver solutions satisfy the tower property") {
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 40);
    const std::size_t paths = 4000;
    const NoiseEnsemble noise = sample_noise(grid, paths, 1, 37);
    const ControlPair pair = example1_candidate(p, grid, paths, 0.8);
    const StateEnsemble states = simulate(p, pair, noise);
    const FirstOrderAdjoint adj =
        solve_first_order(p, pair, states, noise, RegressionConfig{});

    for (std::size_t i = 0; i < 40; i += 7) {
        std::vector<double> delta(paths);
        for (std::size_t pth = 0; pth < paths; ++pth)
            delta[pth] = adj.psi.at(pth, i + 1, 0) - adj.psi.at(pth, i, 0);
        CHECK(std::abs(mean(delta)) <= 3.0 * standard_error(delta) + 1e-10);
    }
}

TEST_CASE("solution statistics are finite and echo the a-priori bound") {
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 50);
    const NoiseEnsemble noise = sample_noise(grid, 2000, 1, 41);
    const ControlPair pair = example1_candidate(p, grid, 2000, 0.8);
    const StateEnsemble states = simulate(p, pair, noise);
    const AdjointSolution sol =
        solve_adjoints(p, pair, states, noise, RegressionConfig{});

    const AdjointStats st = solution_stats(sol, grid);
    CHECK(st.finite);
    // E sup (0.8 W + 1)^2 is a little above E (0.8 W_1 + 1)^2 = 1.64
    CHECK(st.sup_psi_sq > 1.0);
    CHECK(st.sup_psi_sq < 10.0);
    CHECK(st.int_K_sq == doctest::Approx(0.64).epsilon(0.05));
    CHECK(st.sup_Q_sq == doctest::Approx(1.0).epsilon(0.01));
    CHECK(st.int_R_sq <= 1e-4);

    const WeightEnsemble w = make_weights(sol);
    for (std::size_t pth = 0; pth < 2000; pth += 100)
        for (std::size_t i = 0; i <= 50; ++i)
            CHECK(w.varsigma.at(pth, i, 0) >= 1.0);
}

TEST_CASE("adjoint deviations vanish for identical pairs and shrink with d1") {
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 32);
    const std::size_t paths = 1000;
    const NoiseEnsemble noise = sample_noise(grid, paths, 1, 43);
    const ControlPair a = example1_candidate(p, grid, paths, 0.8);

    SUBCASE("identical pairs") {
        const AdjointDeviation dev = estimate_adjoint_deviation(
            p, a, a, noise, RegressionConfig{}, 0.5, 1.5);
        CHECK(dev.first_order == 0.0);
        CHECK(dev.second_order == 0.0);
        CHECK(dev.d1 == 0.0);
    }
    SUBCASE("constant comparison control") {
        const ControlPair b = example1_candidate(p, grid, paths, 0.5);
        const AdjointDeviation dev = estimate_adjoint_deviation(
            p, a, b, noise, RegressionConfig{}, 0.5, 1.5);
        CHECK(dev.d1 == 1.0);
        CHECK(dev.first_order > 0.0);
        CHECK(std::isfinite(dev.first_order / dev.d1_pow));
        // K differs by 0.3 so the beta = 1.5 time integral is ~0.3^1.5
        CHECK(dev.first_order ==
              doctest::Approx(std::pow(0.3, 1.5)).epsilon(0.25));
    }
    SUBCASE("support ladder decreases monotonically") {
        double prev = 1e300;
        for (int level = 0; level <= 2; ++level) {
            const double span = 1.0 / static_cast<double>(1 << level);
            PathArray values = a.u.values();
            for (std::size_t pth = 0; pth < paths; ++pth)
                for (std::size_t i = 0; i < 32; ++i)
                    if (grid.node(i) < span)
                        values.at(pth, i, 0) = 0.2;
            const ControlPair b(
                RegularControl::from_values(grid, std::move(values), p.a1),
                a.eta, "rung");
            const AdjointDeviation dev = estimate_adjoint_deviation(
                p, a, b, noise, RegressionConfig{}, 0.5, 1.5);
            CHECK(dev.first_order < prev);
            prev = dev.first_order;
        }
    }
}

TEST_CASE("regression failures are reported with a condition number") {
    const ProblemSpec p = make_problem(
        "linear", {{"a", 0.0}, {"c", 1.0}, {"sigma", 0.0}, {"y", 1.0}});
    TimeGrid grid(0.0, 1.0, 4);
    const NoiseEnsemble noise = sample_noise(grid, 64, 1, 2);
    const ControlPair pair = still_pair(p, grid, 64);
    const StateEnsemble states = simulate(p, pair, noise);

    RegressionConfig cfg;
    cfg.ridge = 0.0; // constant states make the normal matrix singular
    CHECK_THROWS_WITH_AS(
        solve_first_order(p, pair, states, noise, cfg),
        doctest::Contains("condition number"), std::runtime_error);

    RegressionConfig bad;
    bad.basis_degree = -1;
    CHECK_THROWS_AS(solve_first_order(p, pair, states, noise, bad),
                    std::invalid_argument);
}

TEST_CASE("terminal node repeats the last K and R cells") {
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 10);
    const NoiseEnsemble noise = sample_noise(grid, 128, 1, 3);
    const ControlPair pair = example1_candidate(p, grid, 128, 0.8);
    const StateEnsemble states = simulate(p, pair, noise);
    const AdjointSolution sol =
        solve_adjoints(p, pair, states, noise, RegressionConfig{});
    for (std::size_t pth = 0; pth < 128; pth += 17) {
        CHECK(sol.first.K.at(pth, 10, 0) == sol.first.K.at(pth, 9, 0));
        CHECK(sol.second.R.at(pth, 10, 0) == sol.second.R.at(pth, 9, 0));
    }
}
