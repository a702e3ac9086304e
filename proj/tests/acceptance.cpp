// Acceptance suite: end-to-end checks of the worked example, the linear
// solver benchmarks and the property suites, each printed as one pass/fail
// line with its measured values.

#include "nearopt/certify.hpp"
#include "nearopt/hamiltonian.hpp"
#include "nearopt/noise.hpp"
#include "nearopt/numeric.hpp"
#include "nearopt/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <vector>

using namespace nearopt;

namespace {

int g_failures = 0;

void report(int id, const char* what, bool ok, const std::string& detail) {
    std::printf("%s  criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what,
                detail.c_str());
    if (!ok)
        ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

struct Example1Setup {
    ProblemSpec problem = make_problem("example1");
    TimeGrid grid{0.0, 1.0, 100};
    std::size_t paths = 10000;
    double epsilon = 0.04;
    double u_eps = 1.0 - std::sqrt(0.04);
    NoiseEnsemble noise = sample_noise(grid, paths, 1, 1);
    ControlPair candidate;
    StateEnsemble states;
    AdjointSolution regression;
    AdjointSolution closed;
    double first_order_seconds = 0.0;
    double second_order_seconds = 0.0;

    Example1Setup()
        : candidate(RegularControl::constant(grid, paths,
                                             Vec::Constant(1, u_eps),
                                             problem.a1),
                    SingularControl::atom(grid, paths, Vec::Constant(1, 1.0),
                                          0.0),
                    "candidate") {
        states = simulate(problem, candidate, noise);
        const RegressionConfig cfg;
        auto t0 = std::chrono::steady_clock::now();
        regression.first =
            solve_first_order(problem, candidate, states, noise, cfg);
        first_order_seconds = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        regression.second = solve_second_order(problem, candidate, states,
                                               noise, regression.first, cfg);
        second_order_seconds = seconds_since(t0);
        closed = solve_adjoints_closed_form(problem, candidate, states, noise);
    }

    ControlPair constant_pair(double c) const {
        return ControlPair(
            RegularControl::constant(grid, paths, Vec::Constant(1, c),
                                     problem.a1),
            candidate.eta, "const");
    }

    CertificateConfig cert() const {
        CertificateConfig cc;
        cc.epsilon = epsilon;
        cc.delta = 1.0 / 3.0;
        cc.big_c = 1.0;
        return cc;
    }
};

void criterion1(const Example1Setup& ex) {
    double q_err = 0.0, r_max = 0.0;
    for (std::size_t p = 0; p < ex.paths; ++p) {
        for (std::size_t i = 0; i <= ex.grid.n_steps; ++i) {
            q_err = std::max(q_err,
                             std::abs(ex.regression.second.Q.at(p, i, 0) - 1.0));
            r_max = std::max(r_max, std::abs(ex.regression.second.R.at(p, i, 0)));
        }
    }
    const double secs = ex.second_order_seconds;
    std::ostringstream os;
    os << "max|Q-1|=" << q_err << ", max|R|=" << r_max << ", solve " << secs
       << "s";
    report(1, "second-order costate of the worked example",
           q_err <= 1e-2 && r_max <= 1e-2 && secs <= 30.0, os.str());
}

void criterion2(const Example1Setup& ex) {
    double sq = 0.0, k_sum = 0.0;
    std::size_t k_n = 0;
    for (std::size_t p = 0; p < ex.paths; ++p) {
        double w = 0.0;
        for (std::size_t i = 0; i <= ex.grid.n_steps; ++i) {
            const double ref = ex.u_eps * w + 1.0;
            const double diff = ex.regression.first.psi.at(p, i, 0) - ref;
            sq += diff * diff;
            if (i < ex.grid.n_steps) {
                w += ex.noise.increment(p, i, 0);
                k_sum += ex.regression.first.K.at(p, i, 0);
                ++k_n;
            }
        }
    }
    const double rmse = std::sqrt(
        sq / static_cast<double>(ex.paths * ex.grid.n_nodes()));
    const double k_err =
        std::abs(k_sum / static_cast<double>(k_n) - ex.u_eps);
    std::ostringstream os;
    os << "psi rmse=" << rmse << ", |mean K - " << ex.u_eps << "|=" << k_err
       << ", solve " << ex.first_order_seconds << "s";
    report(2, "first-order costate of the worked example",
           rmse <= 5e-2 && k_err <= 2e-2 && ex.first_order_seconds <= 30.0,
           os.str());
}

void criterion3(const Example1Setup& ex) {
    const RegularGap closed_gap = necessary_regular_gap(
        ex.problem, ex.candidate, ex.states, ex.closed, ex.cert());
    const RegularGap reg_gap = necessary_regular_gap(
        ex.problem, ex.candidate, ex.states, ex.regression, ex.cert());

    const bool closed_ok = std::abs(closed_gap.gap - 0.02) <= 1e-12 &&
                           closed_gap.std_error == 0.0;
    // the paired std error is conditional on the fitted costate; the
    // absolute floor covers the regression-coefficient noise it cannot see
    const double tol = std::max(3.0 * reg_gap.std_error, 5e-3);
    const bool reg_ok = std::abs(reg_gap.gap - 0.02) <= tol;
    std::ostringstream os;
    os << "closed gap=" << closed_gap.gap << ", regression gap=" << reg_gap.gap
       << " (tol " << tol << ")";
    report(3, "necessary regular gap equals eps/2", closed_ok && reg_ok,
           os.str());
}

void criterion4(const Example1Setup& ex) {
    auto k_integral = [&](const AdjointSolution& sol) {
        std::vector<double> per_path(ex.paths, 0.0);
        for (std::size_t p = 0; p < ex.paths; ++p) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ex.grid.n_steps; ++i) {
                const double d = sol.first.K.at(p, i, 0) - 1.0;
                acc += ex.grid.dt() * d * d;
            }
            per_path[p] = acc;
        }
        return mean(per_path);
    };
    const double closed_val = k_integral(ex.closed);
    const double reg_val = k_integral(ex.regression);
    const bool ok = std::abs(closed_val - ex.epsilon) <= 1e-12 &&
                    std::abs(reg_val - ex.epsilon) <= 0.1 * ex.epsilon;
    std::ostringstream os;
    os << "closed=" << closed_val << ", regression=" << reg_val
       << ", target=" << ex.epsilon;
    report(4, "E int (K-1)^2 dt equals eps", ok, os.str());
}

void criterion5(const Example1Setup& ex) {
    bool ok = true;
    std::ostringstream os;
    std::vector<ControlPair> family;
    for (double c : {0.0, 0.5, ex.u_eps, 1.0}) {
        family.push_back(ex.constant_pair(c));
        const CostEstimate est =
            cost(ex.problem, family.back(),
                 simulate(ex.problem, family.back(), ex.noise));
        const double want = 0.5 * (c - 1.0) * (c - 1.0);
        const bool this_ok =
            std::abs(est.mean - want) <= 3.0 * est.std_error + 1e-12;
        ok = ok && this_ok;
        os << "J(" << c << ")=" << est.mean << "/" << want << " ";
    }
    const NearOptimality near =
        near_optimality_gap(ex.problem, ex.constant_pair(ex.u_eps), family,
                            ex.noise, ex.epsilon);
    ok = ok && near.within_bound;
    os << "gap=" << near.gap << " vs eps=" << ex.epsilon;
    report(5, "cost curve and order-eps near-optimality", ok, os.str());
}

void criterion6(const Example1Setup& ex) {
    const ControlPair zero_pair = ex.constant_pair(0.0);
    const StateEnsemble states = simulate(ex.problem, zero_pair, ex.noise);
    const AdjointSolution closed =
        solve_adjoints_closed_form(ex.problem, zero_pair, states, ex.noise);
    const RegularGap gap = necessary_regular_gap(ex.problem, zero_pair, states,
                                                 closed, ex.cert());

    bool ok = gap.gap >= 0.45 && std::abs(gap.gap - 0.5) <= 1e-12;
    // for every (C, delta) there is an eps <= 1e-2 whose threshold the gap
    // exceeds; the verdict must flag it
    for (double c : {0.1, 1.0, 10.0}) {
        for (double delta : {1.0 / 3.0, 0.2, 0.1}) {
            const double eps =
                std::min(1e-2, 0.5 * std::pow(0.4 / c, 1.0 / delta));
            const double threshold = c * std::pow(eps, delta);
            ok = ok && !passes(gap.gap, threshold, gap.std_error);
        }
    }
    std::ostringstream os;
    os << "gap=" << gap.gap;
    report(6, "the zero control is flagged as far from optimal", ok, os.str());
}

void criterion7() {
    TimeGrid grid(0.0, 1.0, 200);
    const std::size_t paths = 10000;
    bool ok = true;
    std::ostringstream os;

    {
        const ProblemSpec p = make_problem(
            "linear", {{"a", 0.5}, {"c", 2.0}, {"sigma", 0.4}, {"y", 1.0}});
        const NoiseEnsemble noise = sample_noise(grid, paths, 1, 2);
        const ControlPair pair(
            RegularControl::constant(grid, paths, Vec::Zero(1), p.a1),
            SingularControl::zero(grid, paths, 1), "none");
        const StateEnsemble states = simulate(p, pair, noise);
        const FirstOrderAdjoint adj =
            solve_first_order(p, pair, states, noise, RegressionConfig{});
        double rel = 0.0;
        for (std::size_t i = 0; i <= 200; ++i) {
            const double want = 2.0 * std::exp(0.5 * (1.0 - grid.node(i)));
            for (std::size_t pp = 0; pp < paths; pp += 997)
                rel = std::max(rel,
                               std::abs(adj.psi.at(pp, i, 0) - want) / want);
        }
        ok = ok && rel <= 0.01;
        os << "psi rel err=" << rel;
    }
    {
        const ProblemSpec p = make_problem(
            "linear_quad", {{"a", 0.5}, {"c", 2.0}, {"sigma", 0.4}, {"y", 1.0}});
        const NoiseEnsemble noise = sample_noise(grid, paths, 1, 3);
        const ControlPair pair(
            RegularControl::constant(grid, paths, Vec::Zero(1), p.a1),
            SingularControl::zero(grid, paths, 1), "none");
        const StateEnsemble states = simulate(p, pair, noise);
        const AdjointSolution sol =
            solve_adjoints(p, pair, states, noise, RegressionConfig{});
        double rel = 0.0;
        for (std::size_t i = 0; i <= 200; ++i) {
            const double want = 2.0 * std::exp(1.0 - grid.node(i));
            for (std::size_t pp = 0; pp < paths; pp += 997)
                rel = std::max(
                    rel, std::abs(sol.second.Q.at(pp, i, 0) - want) / want);
        }
        ok = ok && rel <= 0.01;
        os << ", Q rel err=" << rel;
    }
    report(7, "linear benchmarks within one percent", ok, os.str());
}

void criterion8() {
    bool ok = true;
    std::ostringstream os;
    std::mt19937 rng(123);

    // metric axioms
    {
        TimeGrid grid(0.0, 1.0, 8);
        const Box box(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0));
        std::uniform_real_distribution<double> val(-1.0, 1.0);
        std::bernoulli_distribution flip(0.5);
        std::exponential_distribution<double> mass(8.0);
        auto rand_u = [&] {
            PathArray a(4, 8, 1);
            for (std::size_t p = 0; p < 4; ++p)
                for (std::size_t i = 0; i < 8; ++i)
                    a.at(p, i, 0) = flip(rng) ? 0.0 : val(rng);
            return RegularControl::from_values(grid, std::move(a), box);
        };
        auto rand_eta = [&] {
            PathArray a(4, 8, 1);
            for (std::size_t p = 0; p < 4; ++p)
                for (std::size_t i = 0; i < 8; ++i)
                    a.at(p, i, 0) = flip(rng) ? mass(rng) : 0.0;
            return SingularControl::from_increments(grid, std::move(a));
        };
        bool axioms = true;
        for (int k = 0; k < 1000 && axioms; ++k) {
            const RegularControl a = rand_u(), b = rand_u(), c = rand_u();
            axioms = axioms && d1(a, a) == 0.0 && d1(a, b) == d1(b, a) &&
                     d1(a, b) >= 0.0 && d1(a, b) <= d1(a, c) + d1(c, b) + 1e-15;
            const SingularControl x = rand_eta(), y = rand_eta(), z = rand_eta();
            axioms = axioms && d2(x, x) == 0.0 && d2(x, y) == d2(y, x) &&
                     d2(x, y) >= 0.0 && d2(x, y) <= d2(x, z) + d2(z, y) + 1e-12;
        }
        ok = ok && axioms;
        os << "metric axioms " << (axioms ? "ok" : "violated");

        // convex perturbation keeps increments nonnegative
        bool monotone = true;
        std::uniform_real_distribution<double> th(0.0, 1.0);
        for (int k = 0; k < 1000 && monotone; ++k) {
            const SingularControl x = rand_eta(), y = rand_eta();
            const SingularControl mix =
                convex_perturb_singular(x, y, th(rng));
            for (double v : mix.increments().raw())
                monotone = monotone && v >= 0.0;
        }
        ok = ok && monotone;
        os << ", perturb monotone " << (monotone ? "ok" : "violated");

        // spike bound on a dyadic grid: exact, no slack
        bool spike_ok = true;
        TimeGrid sgrid(0.0, 1.0, 128);
        const RegularControl base =
            RegularControl::constant(sgrid, 2, Vec::Zero(1), box);
        std::uniform_int_distribution<int> pos(0, 512);
        for (int k = 0; k < 1000 && spike_ok; ++k) {
            const int a = pos(rng);
            const int b = pos(rng);
            const double t0 = std::min(a, b) / 512.0;
            const double theta = std::abs(a - b) / 512.0;
            const RegularControl s =
                spike_perturb(base, t0, theta, Vec::Constant(1, 1.0), box);
            spike_ok = d1(s, base) <= theta;
        }
        ok = ok && spike_ok;
        os << ", spike bound " << (spike_ok ? "ok" : "violated");
    }

    // Clarke interval of |.| at 0, exact endpoints
    {
        const GradientInterval gi =
            clarke_interval([](double z) { return std::abs(z); }, 0.0);
        const bool clarke_ok = gi.lower(0) == -1.0 && gi.upper(0) == 1.0;
        ok = ok && clarke_ok;
        os << ", clarke " << (clarke_ok ? "ok" : "violated");
    }

    // script_H with Q = 0 reduces to H
    {
        const ProblemSpec ex1 = make_problem("example1");
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        bool reduce_ok = true;
        for (int k = 0; k < 1000 && reduce_ok; ++k) {
            HamiltonianFrame fr;
            fr.t = 0.3;
            fr.x_ref = Vec::Constant(1, dist(rng));
            fr.u_ref = Vec::Constant(1, dist(rng));
            fr.psi = Vec::Constant(1, dist(rng));
            fr.K = Mat::Constant(1, 1, dist(rng));
            fr.Q = Mat::Zero(1, 1);
            const Vec u = Vec::Constant(1, dist(rng));
            reduce_ok = script_H(ex1, fr, u) ==
                        hamiltonian(ex1, fr.t, fr.x_ref, u, fr.psi, fr.K);
        }
        ok = ok && reduce_ok;
        os << ", script_H reduction " << (reduce_ok ? "ok" : "violated");
    }

    // cost decomposition identity on random small ensembles
    {
        const ProblemSpec ex1 = make_problem("example1");
        TimeGrid grid(0.0, 1.0, 8);
        std::uniform_real_distribution<double> uval(0.0, 1.0);
        bool decomp_ok = true;
        for (int k = 0; k < 1000 && decomp_ok; ++k) {
            const NoiseEnsemble noise =
                sample_noise(grid, 4, 1, static_cast<std::uint64_t>(k + 10));
            const ControlPair pair(
                RegularControl::constant(grid, 4, Vec::Constant(1, uval(rng)),
                                         ex1.a1),
                SingularControl::atom(grid, 4, Vec::Constant(1, uval(rng)),
                                      uval(rng)),
                "case");
            const CostEstimate est =
                cost(ex1, pair, simulate(ex1, pair, noise));
            decomp_ok = est.mean == est.terminal + est.running + est.singular;
        }
        ok = ok && decomp_ok;
        os << ", cost identity " << (decomp_ok ? "ok" : "violated");
    }

    // seed determinism of whole reports
    {
        RunConfig cfg;
        cfg.command = "example1";
        cfg.paths = 500;
        cfg.steps = 25;
        cfg.ugrid = 21;
        cfg.out = "test_reports/acceptance_det_a.txt";
        std::ostringstream diag;
        const RunResult a = run(cfg, diag);
        cfg.out = "test_reports/acceptance_det_b.txt";
        const RunResult b = run(cfg, diag);
        const bool det_ok =
            a.exit_code == 0 && a.report_text == b.report_text;
        ok = ok && det_ok;
        os << ", determinism " << (det_ok ? "ok" : "violated");
    }

    report(8, "property suites", ok, os.str());
}

void criterion9() {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemSpec p = make_problem("example1");
    TimeGrid grid(0.0, 1.0, 128);
    const std::size_t paths = 10000;
    const NoiseEnsemble noise = sample_noise(grid, paths, 1, 4);

    const ControlPair base(
        RegularControl::constant(grid, paths, Vec::Constant(1, 1.0), p.a1),
        SingularControl::atom(grid, paths, Vec::Constant(1, 1.0), 0.0),
        "base");

    bool ok = true;
    double prev = 1e300;
    std::vector<double> ratios;
    std::ostringstream os;
    for (int level = 0; level <= 3; ++level) {
        const double span = 1.0 / static_cast<double>(1 << level);
        PathArray values = base.u.values();
        for (std::size_t pp = 0; pp < paths; ++pp)
            for (std::size_t i = 0; i < 128; ++i)
                if (grid.node(i) < span)
                    values.at(pp, i, 0) = 0.0;
        const ControlPair rung(
            RegularControl::from_values(grid, std::move(values), p.a1),
            base.eta, "rung");
        const StateDeviation dev =
            estimate_state_deviation(p, base, rung, noise, 1.0);
        ok = ok && std::abs(dev.d1 - span) <= 1e-12;
        ok = ok && dev.lhs_moment < prev;
        prev = dev.lhs_moment;
        ratios.push_back(dev.lhs_moment / std::pow(dev.d1, 0.5));
        os << "d1=" << dev.d1 << ":ratio=" << ratios.back() << " ";
    }
    double lo = ratios[0], hi = ratios[0];
    for (double r : ratios) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    ok = ok && hi / lo < 10.0;
    const double secs = seconds_since(t0);
    ok = ok && secs <= 60.0;
    os << "spread=" << hi / lo << ", " << secs << "s";
    report(9, "state deviation ladder", ok, os.str());
}

} // namespace

int main() {
    std::printf("acceptance suite: worked example with %d paths, %d steps\n",
                10000, 100);
    const Example1Setup ex;
    criterion1(ex);
    criterion2(ex);
    criterion3(ex);
    criterion4(ex);
    criterion5(ex);
    criterion6(ex);
    criterion7();
    criterion8();
    criterion9();
    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
