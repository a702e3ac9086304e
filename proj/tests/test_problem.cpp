#include <doctest.h>

#include "nearopt/noise.hpp"
#include "nearopt/numeric.hpp"
#include "nearopt/problem.hpp"

#include <cmath>
#include <random>

using namespace nearopt;

TEST_CASE("time grid nodes are increasing and hit both endpoints") {
    TimeGrid grid(0.0, 1.0, 100);
    CHECK(grid.node(0) == 0.0);
    CHECK(grid.node(100) == 1.0);
    for (std::size_t i = 0; i < 100; ++i)
        CHECK(grid.node(i) < grid.node(i + 1));
    CHECK(grid.cell_containing(0.3) == 30);
    CHECK(grid.cell_containing(1.0) == 99);
    CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("example1 coefficients match the worked example") {
    const ProblemSpec p = make_problem("example1", {{"epsilon", 0.04}});
    const Vec x = Vec::Constant(1, 0.7);
    const Vec u = Vec::Constant(1, 0.3);
    CHECK(p.f(0.5, x, u)(0) == 0.0);
    CHECK(p.sigma(0.5, x, u)(0, 0) == 0.3);
    CHECK(p.ell(0.5, x, u) == -0.3);
    CHECK(p.h(x) == doctest::Approx(0.245).epsilon(1e-14));
    CHECK(p.G(0.2)(0, 0) == 1.0);
    CHECK(p.k(0.2)(0) == 0.0);
    CHECK(p.a1.lo(0) == 0.0);
    CHECK(p.a1.hi(0) == 1.0);
    REQUIRE(p.a2_cap.has_value());
    CHECK((*p.a2_cap)(0) == 1.0);
    CHECK(p.y(0) == 0.0);
    CHECK(p.derivs.h_x(x)(0) == 0.7);
    CHECK(p.derivs.h_xx(x)(0, 0) == 1.0);
}

TEST_CASE("registry rejects duplicates and unknown names") {
    auto& reg = ProblemRegistry::instance();
    const std::string name = "test_dup_problem";
    if (!reg.contains(name))
        reg.add(name, make_zero_problem());
    CHECK_THROWS_AS(reg.add(name, make_zero_problem()), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("no_such_problem"), std::invalid_argument);
}

TEST_CASE("validation rejects negative prices and empty boxes") {
    ProblemSpec bad = make_zero_problem();
    bad.k = [](double) { return Vec::Constant(1, -0.1); };
    CHECK_THROWS_WITH_AS(validate_problem(bad),
                         "problem: k has a negative component",
                         std::invalid_argument);

    CHECK_THROWS_AS(Box(Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)),
                    std::invalid_argument);
}

TEST_CASE("noise sampling is reproducible and has the contracted variance") {
    TimeGrid grid(0.0, 1.0, 100);
    const NoiseEnsemble a = sample_noise(grid, 10000, 1, 7);
    const NoiseEnsemble b = sample_noise(grid, 10000, 1, 7);
    CHECK(a.dW.raw() == b.dW.raw());

    const NoiseEnsemble c = sample_noise(grid, 10000, 1, 8);
    CHECK(a.dW.raw() != c.dW.raw());

    // pooled and per-step sample variance against dt = 0.01
    double pooled = 0.0;
    for (double v : a.dW.raw())
        pooled += v * v;
    pooled /= static_cast<double>(a.dW.raw().size());
    CHECK(pooled == doctest::Approx(0.01).epsilon(0.05));

    for (std::size_t step : {0ul, 42ul, 99ul}) {
        double s = 0.0;
        for (std::size_t p = 0; p < a.n_paths; ++p)
            s += a.increment(p, step, 0) * a.increment(p, step, 0);
        s /= static_cast<double>(a.n_paths);
        CHECK(s == doctest::Approx(0.01).epsilon(0.05));
    }

    CHECK_THROWS_AS(sample_noise(grid, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("antithetic pairing negates odd paths") {
    TimeGrid grid(0.0, 1.0, 16);
    const NoiseEnsemble n = sample_noise(grid, 8, 2, 3, true);
    for (std::size_t p = 0; p < 8; p += 2)
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(n.increment(p + 1, i, c) == -n.increment(p, i, c));
}

TEST_CASE("finite differences agree with analytic derivatives") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::uniform_real_distribution<double> uu(0.05, 0.95);

    for (const char* name : {"example1", "linear_quad"}) {
        const ProblemSpec p =
            make_problem(name, {{"a", 0.7}, {"c", 1.3}, {"sigma", 0.4}});
        const DerivativeBundle fd = finite_difference_bundle(
            p.f, p.sigma, p.ell, p.h, p.dim_n, p.dim_m, p.dim_l);
        for (int s = 0; s < 100; ++s) {
            const double t = 0.01 * s;
            const Vec x = Vec::Constant(1, ux(rng));
            const Vec u = Vec::Constant(1, uu(rng));
            auto close = [](double got, double want) {
                return std::abs(got - want) <= 1e-4 * (1.0 + std::abs(want));
            };
            CHECK(close(fd.f_x(t, x, u)(0, 0), p.derivs.f_x(t, x, u)(0, 0)));
            CHECK(close(fd.sigma_x(t, x, u)[0](0, 0),
                        p.derivs.sigma_x(t, x, u)[0](0, 0)));
            CHECK(close(fd.ell_x(t, x, u)(0), p.derivs.ell_x(t, x, u)(0)));
            CHECK(close(fd.f_xx(t, x, u)[0](0, 0),
                        p.derivs.f_xx(t, x, u)[0](0, 0)));
            CHECK(close(fd.ell_xx(t, x, u)(0, 0),
                        p.derivs.ell_xx(t, x, u)(0, 0)));
            CHECK(close(fd.h_x(x)(0), p.derivs.h_x(x)(0)));
            CHECK(close(fd.h_xx(x)(0, 0), p.derivs.h_xx(x)(0, 0)));
            CHECK(close(fd.sigma_u(t, x, u)[0](0, 0),
                        p.derivs.sigma_u(t, x, u)[0](0, 0)));
            CHECK(close(fd.ell_u(t, x, u)(0), p.derivs.ell_u(t, x, u)(0)));
        }
    }
}

TEST_CASE("singular controls are nondecreasing and reject negative mass") {
    TimeGrid grid(0.0, 1.0, 32);
    std::mt19937 rng(5);
    std::exponential_distribution<double> mass(10.0);

    PathArray inc(16, 32, 1);
    for (std::size_t p = 0; p < 16; ++p)
        for (std::size_t i = 0; i < 32; ++i)
            inc.at(p, i, 0) = mass(rng);
    const SingularControl eta = SingularControl::from_increments(grid, inc);
    const PathArray cum = eta.cumulative_paths();
    for (std::size_t p = 0; p < 16; ++p) {
        CHECK(cum.at(p, 0, 0) == 0.0);
        for (std::size_t i = 0; i < 32; ++i)
            CHECK(cum.at(p, i + 1, 0) >= cum.at(p, i, 0));
    }

    PathArray bad(1, 32, 1);
    bad.at(0, 3, 0) = -1e-9;
    CHECK_THROWS_AS(SingularControl::from_increments(grid, bad),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        SingularControl::atom(grid, 2, Vec::Constant(1, -1.0), 0.5),
        std::invalid_argument);
}

TEST_CASE("regular control constructors project into the domain box") {
    TimeGrid grid(0.0, 1.0, 8);
    const Box box(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0));
    const RegularControl u =
        RegularControl::constant(grid, 4, Vec::Constant(1, 1.7), box);
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t i = 0; i < 8; ++i)
            CHECK(u.values().at(p, i, 0) == 1.0);

    const RegularControl v = RegularControl::deterministic(
        grid, 2, [](double t) { return Vec::Constant(1, 2.0 * t - 0.5); },
        box);
    for (std::size_t i = 0; i < 8; ++i) {
        const double val = v.values().at(0, i, 0);
        CHECK(val >= 0.0);
        CHECK(val <= 1.0);
    }
}

TEST_CASE("adapted controls only see the noise prefix") {
    TimeGrid grid(0.0, 1.0, 16);
    const NoiseEnsemble noise = sample_noise(grid, 8, 1, 21);
    const Box box(Vec::Constant(1, -10.0), Vec::Constant(1, 10.0));

    const RegularControl u = RegularControl::adapted(
        noise, 1,
        [](std::size_t, std::size_t step, std::span<const double> past) {
            CHECK(past.size() == step);
            double w = 0.0;
            for (double d : past)
                w += d;
            return Vec::Constant(1, w);
        },
        box);

    for (std::size_t p = 0; p < 8; ++p) {
        double w = 0.0;
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(u.values().at(p, i, 0) == doctest::Approx(w).epsilon(1e-12));
            w += noise.increment(p, i, 0);
        }
    }
}
