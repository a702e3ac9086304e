#include "nearopt/run.hpp"

#include "nearopt/adjoint.hpp"
#include "nearopt/certify.hpp"
#include "nearopt/forward.hpp"
#include "nearopt/metrics.hpp"
#include "nearopt/noise.hpp"
#include "nearopt/numeric.hpp"
#include "nearopt/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace nearopt {
namespace {

struct RunContext {
    ProblemSpec problem;
    TimeGrid grid;
    NoiseEnsemble noise;
    ControlPair candidate;
};

RunContext build_context(const RunConfig& cfg) {
    ProblemParams params = parse_problem_params(cfg.problem_params);
    if (cfg.problem == "example1")
        params["epsilon"] = cfg.epsilon;
    ProblemSpec problem = make_problem(cfg.problem, params);
    TimeGrid grid(cfg.grid_s, cfg.grid_t, cfg.steps);
    NoiseEnsemble noise =
        sample_noise(grid, cfg.paths, problem.dim_l, cfg.seed, cfg.antithetic);
    RegularControl u = parse_control_spec(cfg.control, problem, grid,
                                          cfg.paths, cfg.epsilon);
    SingularControl eta = parse_eta_spec(cfg.eta, problem, grid, cfg.paths);
    std::string label = cfg.control.empty() ? "ueps" : cfg.control;
    label += "/" + cfg.eta;
    return RunContext{std::move(problem), grid, std::move(noise),
                      ControlPair(std::move(u), std::move(eta), label)};
}

void add_common_params(Report& rep, const RunConfig& cfg) {
    rep.add_param("problem", cfg.problem);
    rep.add_param("grid.s", cfg.grid_s);
    rep.add_param("grid.T", cfg.grid_t);
    rep.add_param("steps", static_cast<std::uint64_t>(cfg.steps));
    rep.add_param("paths", static_cast<std::uint64_t>(cfg.paths));
    rep.add_param("seed", cfg.seed);
    rep.add_param("control", cfg.control.empty() ? "ueps" : cfg.control);
    rep.add_param("eta", cfg.eta);
}

void add_cost_metrics(Report& rep, const CostEstimate& est,
                      const std::string& prefix) {
    rep.add_metric(prefix + "_mean", est.mean);
    rep.add_metric(prefix + "_std_error", est.std_error);
    rep.add_metric(prefix + "_terminal", est.terminal);
    rep.add_metric(prefix + "_running", est.running);
    rep.add_metric(prefix + "_singular", est.singular);
}

void add_adjoint_stats(Report& rep, const AdjointSolution& sol,
                       const TimeGrid& grid, const std::string& prefix) {
    const AdjointStats st = solution_stats(sol, grid);
    rep.add_metric(prefix + "_sup_psi_sq", st.sup_psi_sq);
    rep.add_metric(prefix + "_int_K_sq", st.int_K_sq);
    rep.add_metric(prefix + "_sup_Q_sq", st.sup_Q_sq);
    rep.add_metric(prefix + "_int_R_sq", st.int_R_sq);
}

// Comparison family of singular controls used by the certificates: the
// candidate's own control, a uniform ramp of equal mass, and (when the
// total mass is unconstrained) the zero control. The greedy single-cell
// comparator is appended by the gap routines themselves.
std::vector<std::pair<std::string, SingularControl>> default_eta_family(
    const RunContext& ctx, const std::optional<Vec>& mass_constraint) {
    std::vector<std::pair<std::string, SingularControl>> fam;
    fam.emplace_back("candidate", ctx.candidate.eta);
    if (mass_constraint) {
        fam.emplace_back("ramp",
                         SingularControl::ramp(ctx.grid, ctx.noise.n_paths,
                                               *mass_constraint));
    } else {
        fam.emplace_back("zero", SingularControl::zero(ctx.grid,
                                                       ctx.noise.n_paths,
                                                       ctx.problem.dim_m));
    }
    return fam;
}

// The candidate's total mass binds the comparison family whenever it is
// positive; a massless candidate competes against unconstrained controls.
std::optional<Vec> mass_constraint_of(const RunContext& ctx) {
    const Vec mass = ctx.candidate.eta.total_mass(0);
    if (mass.maxCoeff() > 0.0 &&
        ctx.candidate.eta.deterministic_across_paths())
        return mass;
    return std::nullopt;
}

std::vector<ControlPair> constant_family(const RunContext& ctx,
                                         const RunConfig& cfg) {
    std::vector<ControlPair> family;
    const auto m = static_cast<Eigen::Index>(ctx.problem.dim_m);
    for (double c : parse_family_spec(cfg.family)) {
        std::ostringstream label;
        label << "const:" << Report::format_double(c);
        family.emplace_back(
            RegularControl::constant(ctx.grid, ctx.noise.n_paths,
                                     Vec::Constant(m, c), ctx.problem.a1),
            ctx.candidate.eta, label.str());
    }
    family.emplace_back(ctx.candidate.u, ctx.candidate.eta, "candidate");
    return family;
}

void maybe_dump(const RunConfig& cfg, const RunContext& ctx,
                const StateEnsemble& states, const AdjointSolution* adjoints) {
    if (cfg.dump_paths.empty())
        return;
    {
        std::ofstream os(cfg.dump_paths + "_states.csv");
        if (!os)
            throw std::invalid_argument("dump: cannot write '" +
                                        cfg.dump_paths + "_states.csv'");
        dump_states_csv(os, ctx.candidate, states);
    }
    if (adjoints) {
        std::ofstream os(cfg.dump_paths + "_adjoints.csv");
        dump_adjoints_csv(os, ctx.grid, *adjoints);
    }
}

// pass/fail aggregation for --strict; "info" lines never count.
struct VerdictTally {
    bool any_fail = false;
    bool hypotheses_failed = false;

    std::string record(bool ok) {
        if (!ok)
            any_fail = true;
        return ok ? "pass" : "fail";
    }
    std::string overall() const {
        if (hypotheses_failed)
            return "hypotheses_not_met";
        return any_fail ? "fail" : "pass";
    }
    int exit_code(bool strict) const {
        if (!strict)
            return 0;
        if (hypotheses_failed)
            return 2;
        return any_fail ? 1 : 0;
    }
};

void add_certificates(Report& rep, VerdictTally& tally, const RunConfig& cfg,
                      const RunContext& ctx, const StateEnsemble& states,
                      const AdjointSolution& adjoints,
                      const std::string& prefix) {
    CertificateConfig cert;
    cert.epsilon = cfg.epsilon;
    cert.delta = cfg.delta;
    cert.big_c = cfg.big_c;
    cert.u_grid_points = cfg.ugrid;
    cert.validate();

    const std::optional<Vec> mass = mass_constraint_of(ctx);
    const auto eta_family = default_eta_family(ctx, mass);

    const RegularGap reg = necessary_regular_gap(ctx.problem, ctx.candidate,
                                                 states, adjoints, cert);
    rep.add_residual(prefix + "necessary_regular_gap", reg.gap, reg.std_error,
                     cert.necessary_threshold(),
                     tally.record(passes(reg.gap, cert.necessary_threshold(),
                                         reg.std_error)));
    rep.add_metric(prefix + "regular_gap_best_u", reg.best_u(0));
    rep.add_series(prefix + "pointwise_deficit", reg.pointwise_deficit);

    const SingularGap sing =
        necessary_singular_gap(ctx.problem, ctx.candidate, states, adjoints,
                               eta_family, mass, cert);
    rep.add_residual(prefix + "necessary_singular_gap", sing.gap,
                     sing.std_error, cert.necessary_threshold(),
                     tally.record(!sing.unbounded &&
                                  passes(sing.gap, cert.necessary_threshold(),
                                         sing.std_error)));

    const SupportViolation sup =
        support_violation(ctx.problem, ctx.candidate, states, adjoints, cert);
    rep.add_residual(prefix + "support_violation", sup.value, sup.std_error,
                     sup.threshold, "info");

    const SufficientCheck suff =
        sufficient_check(ctx.problem, ctx.candidate, states, adjoints, reg,
                         eta_family, mass, cert);
    rep.add_hypothesis(prefix + "hamiltonian_concave_and_h_convex",
                       suff.hypotheses_ok);
    if (!suff.hypotheses_ok) {
        tally.hypotheses_failed = true;
        rep.add_note(prefix + "sufficient check skipped: " +
                     suff.hypothesis_note);
        return;
    }
    rep.add_residual(prefix + "sufficient_regular", suff.regular_residual,
                     suff.regular_std_error, cfg.epsilon,
                     tally.record(suff.regular_ok));
    rep.add_residual(prefix + "sufficient_singular", suff.singular_residual,
                     suff.singular_std_error,
                     cert.sufficient_singular_threshold(),
                     tally.record(suff.singular_ok));
    rep.add_residual(prefix + "combined_eps_optimality", suff.combined_residual,
                     suff.regular_std_error + suff.singular_std_error,
                     suff.combined_threshold, "info");
    if (suff.regular_ok && suff.singular_ok)
        rep.add_note(prefix + "cost gap bounded by " +
                     Report::format_double(suff.implied_bound) +
                     " (C sqrt(eps)) under the stated hypotheses");
}

void add_near_optimality(Report& rep, VerdictTally& tally,
                         const RunConfig& cfg, const RunContext& ctx) {
    const double threshold = cfg.big_c * std::pow(cfg.epsilon, cfg.delta);
    const NearOptimality near = near_optimality_gap(
        ctx.problem, ctx.candidate, constant_family(ctx, cfg), ctx.noise,
        threshold);
    rep.add_metric("candidate_cost", near.candidate_cost);
    rep.add_metric("value_estimate", near.value_estimate);
    rep.add_param("value_best_control", near.best_control);
    rep.add_residual("near_optimality_gap", near.gap, near.std_error,
                     near.threshold, tally.record(near.within_bound));
}

int run_simulate(const RunConfig& cfg, Report& rep) {
    RunContext ctx = build_context(cfg);
    const StateEnsemble states = simulate(ctx.problem, ctx.candidate, ctx.noise);
    const CostEstimate est = cost(ctx.problem, ctx.candidate, states);
    add_cost_metrics(rep, est, "cost");
    maybe_dump(cfg, ctx, states, nullptr);
    rep.set_overall("none");
    return 0;
}

int run_adjoint(const RunConfig& cfg, Report& rep) {
    RunContext ctx = build_context(cfg);
    const StateEnsemble states = simulate(ctx.problem, ctx.candidate, ctx.noise);
    RegressionConfig reg_cfg;
    reg_cfg.basis_degree = cfg.degree;
    reg_cfg.ridge = cfg.ridge;

    AdjointSolution sol;
    if (cfg.backend == "closed_form") {
        sol = solve_adjoints_closed_form(ctx.problem, ctx.candidate, states,
                                         ctx.noise);
    } else if (cfg.backend == "regression") {
        sol = solve_adjoints(ctx.problem, ctx.candidate, states, ctx.noise,
                             reg_cfg);
    } else if (cfg.backend == "both") {
        sol = solve_adjoints(ctx.problem, ctx.candidate, states, ctx.noise,
                             reg_cfg);
        const AdjointSolution closed = solve_adjoints_closed_form(
            ctx.problem, ctx.candidate, states, ctx.noise);
        double max_psi = 0.0, max_q = 0.0;
        for (std::size_t p = 0; p < cfg.paths; ++p) {
            for (std::size_t i = 0; i < ctx.grid.n_nodes(); ++i) {
                max_psi = std::max(max_psi, (sol.first.psi.vec(p, i) -
                                             closed.first.psi.vec(p, i))
                                                .norm());
                max_q = std::max(max_q, (sol.second.Q.vec(p, i) -
                                         closed.second.Q.vec(p, i))
                                            .norm());
            }
        }
        rep.add_metric("backend_max_psi_diff", max_psi);
        rep.add_metric("backend_max_Q_diff", max_q);
    } else {
        throw std::invalid_argument("unknown adjoint backend '" + cfg.backend +
                                    "'");
    }
    rep.add_param("backend", cfg.backend);
    add_adjoint_stats(rep, sol, ctx.grid, "adjoint");
    maybe_dump(cfg, ctx, states, &sol);
    rep.set_overall("none");
    return 0;
}

int run_certify(const RunConfig& cfg, Report& rep) {
    RunContext ctx = build_context(cfg);
    const StateEnsemble states = simulate(ctx.problem, ctx.candidate, ctx.noise);

    AdjointSolution sol;
    if (cfg.backend == "closed_form") {
        sol = solve_adjoints_closed_form(ctx.problem, ctx.candidate, states,
                                         ctx.noise);
    } else if (cfg.backend == "regression") {
        RegressionConfig reg_cfg;
        reg_cfg.basis_degree = cfg.degree;
        reg_cfg.ridge = cfg.ridge;
        sol = solve_adjoints(ctx.problem, ctx.candidate, states, ctx.noise,
                             reg_cfg);
    } else {
        throw std::invalid_argument("certify: backend must be regression or closed_form");
    }
    rep.add_param("backend", cfg.backend);
    rep.add_param("epsilon", cfg.epsilon);
    rep.add_param("delta", cfg.delta);
    rep.add_param("bigc", cfg.big_c);

    VerdictTally tally;
    add_certificates(rep, tally, cfg, ctx, states, sol, "");
    add_near_optimality(rep, tally, cfg, ctx);
    maybe_dump(cfg, ctx, states, &sol);
    rep.set_overall(tally.overall());
    return tally.exit_code(cfg.strict);
}

int run_example1(const RunConfig& cfg, Report& rep) {
    RunConfig local = cfg;
    local.problem = "example1";
    if (local.control.empty())
        local.control = "ueps";

    RunContext ctx = build_context(local);
    rep.add_param("epsilon", local.epsilon);
    rep.add_param("delta", local.delta);
    rep.add_param("bigc", local.big_c);

    const StateEnsemble states = simulate(ctx.problem, ctx.candidate, ctx.noise);
    const CostEstimate est = cost(ctx.problem, ctx.candidate, states);
    add_cost_metrics(rep, est, "cost");

    RegressionConfig reg_cfg;
    reg_cfg.basis_degree = local.degree;
    reg_cfg.ridge = local.ridge;
    const AdjointSolution regression =
        solve_adjoints(ctx.problem, ctx.candidate, states, ctx.noise, reg_cfg);
    const AdjointSolution closed = solve_adjoints_closed_form(
        ctx.problem, ctx.candidate, states, ctx.noise);

    // regression backend against the closed-form reference; for the default
    // candidate this is psi = (1 - sqrt(eps)) W + 1, K = 1 - sqrt(eps),
    // (Q, R) = (1, 0)
    double q_err = 0.0, r_max = 0.0, psi_sq_sum = 0.0;
    double k_sum = 0.0, k_ref_sum = 0.0;
    std::size_t k_count = 0;
    for (std::size_t p = 0; p < local.paths; ++p) {
        for (std::size_t i = 0; i < ctx.grid.n_nodes(); ++i) {
            q_err = std::max(q_err, std::abs(regression.second.Q.at(p, i, 0) -
                                             closed.second.Q.at(p, i, 0)));
            r_max = std::max(r_max, std::abs(regression.second.R.at(p, i, 0)));
            const double diff = regression.first.psi.at(p, i, 0) -
                                closed.first.psi.at(p, i, 0);
            psi_sq_sum += diff * diff;
            if (i < ctx.grid.n_steps) {
                k_sum += regression.first.K.at(p, i, 0);
                k_ref_sum += closed.first.K.at(p, i, 0);
                ++k_count;
            }
        }
    }
    const double psi_rmse = std::sqrt(
        psi_sq_sum / static_cast<double>(local.paths * ctx.grid.n_nodes()));
    rep.add_metric("q_max_abs_err", q_err);
    rep.add_metric("r_max_abs", r_max);
    rep.add_metric("psi_rmse", psi_rmse);
    rep.add_metric("k_mean", k_sum / static_cast<double>(k_count));
    rep.add_metric("k_mean_ref", k_ref_sum / static_cast<double>(k_count));

    // E int (K - 1)^2 dt for both backends
    auto k_price = [&](const AdjointSolution& sol) {
        std::vector<double> per_path(local.paths, 0.0);
        for (std::size_t p = 0; p < local.paths; ++p) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ctx.grid.n_steps; ++i) {
                const double d = sol.first.K.at(p, i, 0) - 1.0;
                acc += ctx.grid.dt() * d * d;
            }
            per_path[p] = acc;
        }
        return mean(per_path);
    };
    rep.add_metric("k_minus_one_sq_closed", k_price(closed));
    rep.add_metric("k_minus_one_sq_regression", k_price(regression));

    VerdictTally tally;
    add_certificates(rep, tally, local, ctx, states, closed, "closed_");
    add_certificates(rep, tally, local, ctx, states, regression, "regression_");
    add_near_optimality(rep, tally, local, ctx);
    maybe_dump(local, ctx, states, &regression);
    rep.set_overall(tally.overall());
    return tally.exit_code(local.strict);
}

int run_deviation(const RunConfig& cfg, Report& rep) {
    RunContext ctx = build_context(cfg);
    rep.add_param("alpha", cfg.alpha);
    rep.add_param("beta", cfg.beta);

    // perturbation-support ladder: the comparison control differs from the
    // candidate exactly on [s, s + span). The replacement value is the box
    // corner farthest from the candidate so the controls really differ.
    const auto m = static_cast<Eigen::Index>(ctx.problem.dim_m);
    Vec other(m);
    {
        const Eigen::Map<const Vec> first = ctx.candidate.u.value(0, 0);
        for (Eigen::Index c = 0; c < m; ++c)
            other(c) = (first(c) - ctx.problem.a1.lo(c) >=
                        ctx.problem.a1.hi(c) - first(c))
                           ? ctx.problem.a1.lo(c)
                           : ctx.problem.a1.hi(c);
    }
    const double horizon = ctx.grid.end - ctx.grid.start;
    double prev_lhs = 0.0;
    bool monotone = true;
    std::vector<double> ratios;
    for (int level = 3; level >= 0; --level) {
        const double span = horizon / static_cast<double>(1 << level);
        PathArray values = ctx.candidate.u.values();
        for (std::size_t p = 0; p < values.n_paths(); ++p)
            for (std::size_t i = 0; i < ctx.grid.n_steps; ++i)
                if (ctx.grid.node(i) < ctx.grid.start + span)
                    values.vec(p, i) = other;
        RegularControl perturbed = RegularControl::from_values(
            ctx.grid, std::move(values), ctx.problem.a1);
        ControlPair pair_b(perturbed, ctx.candidate.eta, "ladder");
        const StateDeviation dev = estimate_state_deviation(
            ctx.problem, ctx.candidate, pair_b, ctx.noise, cfg.beta);
        const double ratio =
            dev.lhs_moment / std::pow(dev.d1, cfg.alpha * cfg.beta);
        ratios.push_back(ratio);
        std::ostringstream name;
        name << "ladder_d1_" << Report::format_double(dev.d1);
        rep.add_metric(name.str() + "_lhs", dev.lhs_moment);
        rep.add_metric(name.str() + "_ratio", ratio);
        if (level < 3 && dev.lhs_moment < prev_lhs)
            monotone = false;
        prev_lhs = dev.lhs_moment;
    }
    double rmin = ratios[0], rmax = ratios[0];
    for (double r : ratios) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    rep.add_metric("ladder_ratio_spread", rmax / rmin);
    rep.add_hypothesis("ladder_monotone", monotone);

    RegressionConfig reg_cfg;
    reg_cfg.basis_degree = cfg.degree;
    reg_cfg.ridge = cfg.ridge;
    const double beta_adj = (cfg.beta > 1.0 && cfg.beta < 2.0) ? cfg.beta : 1.5;
    RegularControl vb = RegularControl::constant(
        ctx.grid, cfg.paths, 0.5 * (ctx.problem.a1.lo + ctx.problem.a1.hi),
        ctx.problem.a1);
    ControlPair pair_b(vb, ctx.candidate.eta, "midpoint");
    const AdjointDeviation adev =
        estimate_adjoint_deviation(ctx.problem, ctx.candidate, pair_b,
                                   ctx.noise, reg_cfg, cfg.alpha, beta_adj);
    rep.add_metric("adjoint_first_order_dev", adev.first_order);
    rep.add_metric("adjoint_second_order_dev", adev.second_order);
    rep.add_metric("adjoint_d1_pow", adev.d1_pow);
    rep.set_overall("none");
    return 0;
}

} // namespace

RunResult run(const RunConfig& input, std::ostream& diagnostics) {
    RunResult result;
    RunConfig cfg = input;
    try {
        if (!cfg.config_file.empty())
            apply_config_file(cfg, cfg.config_file);

        Report rep(cfg.command);
        rep.set_hash(cfg.hash());
        add_common_params(rep, cfg);

        int code = 0;
        if (cfg.command == "simulate")
            code = run_simulate(cfg, rep);
        else if (cfg.command == "adjoint")
            code = run_adjoint(cfg, rep);
        else if (cfg.command == "certify")
            code = run_certify(cfg, rep);
        else if (cfg.command == "example1")
            code = run_example1(cfg, rep);
        else if (cfg.command == "deviation")
            code = run_deviation(cfg, rep);
        else
            throw std::invalid_argument("unknown command '" + cfg.command + "'");

        result.report_text = rep.serialize();
        if (cfg.out.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(cfg.hash()));
            result.report_path = "reports/" + cfg.command + "-" + buf + ".txt";
        } else {
            result.report_path = cfg.out;
        }
        const std::filesystem::path out_path(result.report_path);
        if (out_path.has_parent_path())
            std::filesystem::create_directories(out_path.parent_path());
        std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::invalid_argument("cannot write report to '" +
                                        result.report_path + "'");
        os << result.report_text;
        os.close();

        diagnostics << "report: " << result.report_path << "\n";
        result.exit_code = code;
        return result;
    } catch (const std::invalid_argument& e) {
        diagnostics << "error: " << e.what() << "\n";
        result.exit_code = 3;
        return result;
    } catch (const std::exception& e) {
        diagnostics << "error: " << e.what() << "\n";
        result.exit_code = 1;
        return result;
    }
}

} // namespace nearopt
