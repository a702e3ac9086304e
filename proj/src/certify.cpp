#include "nearopt/certify.hpp"

#include "nearopt/numeric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nearopt {
namespace {

// script_H with the frame-constant pieces (q-slot, Q) hoisted out of the
// evaluation loop; one frame is swept over the whole control grid.
struct FrameEvaluator {
    const ProblemSpec* problem;
    HamiltonianFrame frame;
    Mat q_eff;

    FrameEvaluator(const ProblemSpec& prob, HamiltonianFrame fr)
        : problem(&prob), frame(std::move(fr)) {
        const Mat sigma_ref =
            prob.sigma(frame.t, frame.x_ref, frame.u_ref);
        q_eff = frame.K - frame.Q * sigma_ref;
    }

    double operator()(const Vec& u) const {
        const Vec fv = problem->f(frame.t, frame.x_ref, u);
        const Mat sv = problem->sigma(frame.t, frame.x_ref, u);
        double quad = 0.0;
        for (Eigen::Index j = 0; j < sv.cols(); ++j)
            quad += sv.col(j).dot(frame.Q * sv.col(j));
        return -frame.psi.dot(fv) - (q_eff.array() * sv.array()).sum() -
               problem->ell(frame.t, frame.x_ref, u) - 0.5 * quad;
    }
};

// Path-average singular integrand k_j(t_i) + (G^T psi)_j per (cell, comp).
Mat average_singular_integrand(const ProblemSpec& problem,
                               const StateEnsemble& states,
                               const AdjointSolution& adjoints) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const auto m = static_cast<Eigen::Index>(problem.dim_m);

    Mat avg(static_cast<Eigen::Index>(grid.n_steps), m);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const Vec kv = problem.k(t);
        const Mat gv = problem.G(t);
        Vec acc = Vec::Zero(m);
        for (std::size_t p = 0; p < paths; ++p)
            acc += kv + gv.transpose() * Vec(adjoints.first.psi.vec(p, i));
        avg.row(static_cast<Eigen::Index>(i)) =
            (acc / static_cast<double>(paths)).transpose();
    }
    return avg;
}

// Per-path value of E int (k + G* psi) d eta for a given singular control.
std::vector<double> singular_integral_per_path(const ProblemSpec& problem,
                                               const StateEnsemble& states,
                                               const AdjointSolution& adjoints,
                                               const SingularControl& eta) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();

    std::vector<double> out(paths, 0.0);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const Vec kv = problem.k(t);
        const Mat gv = problem.G(t);
        for (std::size_t p = 0; p < paths; ++p) {
            const Vec integrand =
                kv + gv.transpose() * Vec(adjoints.first.psi.vec(p, i));
            out[p] += integrand.dot(eta.increment(p, i));
        }
    }
    return out;
}

std::vector<double> price_integral_per_path(const ProblemSpec& problem,
                                            const TimeGrid& grid,
                                            const SingularControl& eta) {
    std::vector<double> out(eta.n_paths(), 0.0);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const Vec kv = problem.k(grid.node(i));
        for (std::size_t p = 0; p < eta.n_paths(); ++p)
            out[p] += kv.dot(eta.increment(p, i));
    }
    return out;
}

// All mass at the argmin cell per component, honoring the cap or the
// total-mass constraint.
SingularControl greedy_comparator(const ProblemSpec& problem,
                                  const TimeGrid& grid, std::size_t paths,
                                  const Mat& avg_integrand,
                                  const std::optional<Vec>& mass_constraint,
                                  bool& unbounded) {
    const auto m = static_cast<Eigen::Index>(problem.dim_m);
    PathArray inc(paths, grid.n_steps, problem.dim_m);
    unbounded = false;

    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::Index best_cell = 0;
        double best_val = avg_integrand(0, c);
        for (Eigen::Index i = 1; i < avg_integrand.rows(); ++i) {
            if (avg_integrand(i, c) < best_val) {
                best_val = avg_integrand(i, c);
                best_cell = i;
            }
        }
        double mass = 0.0;
        if (mass_constraint) {
            mass = (*mass_constraint)(c);
        } else if (best_val < 0.0) {
            if (!problem.a2_cap) {
                unbounded = true;
                continue;
            }
            mass = (*problem.a2_cap)(c);
        }
        if (problem.a2_cap)
            mass = std::min(mass, (*problem.a2_cap)(c));
        for (std::size_t p = 0; p < paths; ++p)
            inc.at(p, static_cast<std::size_t>(best_cell),
                   static_cast<std::size_t>(c)) = mass;
    }
    return SingularControl::from_increments(grid, std::move(inc));
}

} // namespace

void CertificateConfig::validate() const {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("certificate: epsilon must be positive");
    if (!(delta > 0.0) || delta > 1.0 / 3.0 + 1e-12)
        throw std::invalid_argument(
            "certificate: delta must lie in (0, 1/3]");
    if (!(big_c > 0.0))
        throw std::invalid_argument("certificate: threshold constant C must be positive");
    if (u_grid_points < 2)
        throw std::invalid_argument("certificate: u grid needs at least 2 points");
}

double CertificateConfig::necessary_threshold() const {
    return big_c * std::pow(epsilon, delta);
}

double CertificateConfig::sufficient_singular_threshold() const {
    return big_c * std::sqrt(epsilon);
}

RegularControl spike_perturb(const RegularControl& u, double t0, double theta,
                             const Vec& v, const Box& a1) {
    if (theta < 0.0)
        throw std::invalid_argument("spike_perturb: theta must be nonnegative");
    const TimeGrid& grid = u.grid();
    if (t0 < grid.start || t0 + theta > grid.end)
        throw std::invalid_argument("spike_perturb: window outside horizon");
    if (!a1.contains(v))
        throw std::invalid_argument("spike_perturb: value outside the control domain");

    PathArray values = u.values();
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        if (grid.node(i) >= t0 && grid.node(i + 1) <= t0 + theta) {
            for (std::size_t p = 0; p < u.n_paths(); ++p)
                values.vec(p, i) = v;
        }
    }
    return RegularControl::from_values(grid, std::move(values), u.domain());
}

SingularControl convex_perturb_singular(const SingularControl& eta,
                                        const SingularControl& xi,
                                        double theta) {
    if (theta < 0.0 || theta > 1.0)
        throw std::invalid_argument("convex_perturb_singular: theta outside [0,1]");
    if (eta.grid() != xi.grid() || !eta.increments().same_shape(xi.increments()))
        throw std::invalid_argument("convex_perturb_singular: shape mismatch");

    PathArray inc = eta.increments();
    for (std::size_t p = 0; p < eta.n_paths(); ++p)
        for (std::size_t i = 0; i < eta.grid().n_steps; ++i)
            for (std::size_t c = 0; c < eta.dim(); ++c)
                inc.at(p, i, c) = (1.0 - theta) * eta.increments().at(p, i, c) +
                                  theta * xi.increments().at(p, i, c);
    return SingularControl::from_increments(eta.grid(), std::move(inc));
}

std::vector<Vec> control_grid(const Box& a1, std::size_t points_per_dim,
                              std::size_t max_total) {
    const std::size_t m = a1.dim();
    std::size_t per_dim = points_per_dim;
    // cap the product combinatorially
    auto total_of = [&](std::size_t k) {
        double tot = 1.0;
        for (std::size_t c = 0; c < m; ++c)
            tot *= static_cast<double>(k);
        return tot;
    };
    while (per_dim > 2 && total_of(per_dim) > static_cast<double>(max_total))
        --per_dim;

    std::vector<Vec> grid;
    std::vector<std::size_t> idx(m, 0);
    while (true) {
        Vec u(static_cast<Eigen::Index>(m));
        for (std::size_t c = 0; c < m; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            if (per_dim == 1) {
                u(ci) = a1.lo(ci);
            } else if (idx[c] == per_dim - 1) {
                u(ci) = a1.hi(ci); // endpoint exact
            } else {
                u(ci) = a1.lo(ci) + (a1.hi(ci) - a1.lo(ci)) *
                                        static_cast<double>(idx[c]) /
                                        static_cast<double>(per_dim - 1);
            }
        }
        grid.push_back(std::move(u));
        std::size_t c = 0;
        while (c < m && ++idx[c] == per_dim) {
            idx[c] = 0;
            ++c;
        }
        if (c == m)
            break;
    }
    return grid;
}

RegularGap necessary_regular_gap(const ProblemSpec& problem,
                                 const ControlPair& candidate,
                                 const StateEnsemble& states,
                                 const AdjointSolution& adjoints,
                                 const CertificateConfig& cfg) {
    cfg.validate();
    const std::vector<Vec> grid_points =
        control_grid(problem.a1, cfg.u_grid_points, cfg.max_u_grid_total);
    if (grid_points.empty())
        throw std::invalid_argument("necessary_regular_gap: empty control grid");

    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const std::size_t n_grid = grid_points.size();
    const double dt = grid.dt();

    std::vector<double> cand_per_path(paths, 0.0);
    std::vector<double> cand_node_means(grid.n_steps, 0.0);
    // per-grid-point accumulators: time integral per path, mean per node
    std::vector<std::vector<double>> grid_per_path(
        n_grid, std::vector<double>(paths, 0.0));
    std::vector<std::vector<double>> grid_node_means(
        n_grid, std::vector<double>(grid.n_steps, 0.0));

    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        double cand_sum = 0.0;
        for (std::size_t p = 0; p < paths; ++p) {
            const FrameEvaluator eval(
                problem, frame_at(problem, states, candidate, adjoints, p, i));
            const double vc = eval(eval.frame.u_ref);
            cand_per_path[p] += dt * vc;
            cand_sum += vc;
            for (std::size_t g = 0; g < n_grid; ++g) {
                const double v = eval(grid_points[g]);
                grid_per_path[g][p] += dt * v;
                grid_node_means[g][i] += v;
            }
        }
        cand_node_means[i] = cand_sum / static_cast<double>(paths);
        for (std::size_t g = 0; g < n_grid; ++g)
            grid_node_means[g][i] /= static_cast<double>(paths);
    }

    RegularGap out;
    out.candidate_value = mean(cand_per_path);
    out.per_u.reserve(n_grid);
    out.pointwise_deficit.assign(grid.n_steps, 0.0);

    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t g = 0; g < n_grid; ++g) {
        const double value = mean(grid_per_path[g]);
        out.per_u.emplace_back(grid_points[g], value);
        if (value > best_value) {
            best_value = value;
            best_idx = g;
        }
    }

    out.best_u = grid_points[best_idx];
    out.gap = best_value - out.candidate_value;
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        double sup = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < n_grid; ++g)
            sup = std::max(sup, grid_node_means[g][i]);
        out.pointwise_deficit[i] = sup - cand_node_means[i];
    }

    std::vector<double> diff(paths);
    for (std::size_t p = 0; p < paths; ++p)
        diff[p] = grid_per_path[best_idx][p] - cand_per_path[p];
    out.std_error = standard_error(diff);
    return out;
}

SingularGap necessary_singular_gap(
    const ProblemSpec& problem, const ControlPair& candidate,
    const StateEnsemble& states, const AdjointSolution& adjoints,
    const std::vector<std::pair<std::string, SingularControl>>& family,
    const std::optional<Vec>& total_mass_constraint,
    const CertificateConfig& cfg) {
    cfg.validate();
    if (family.empty())
        throw std::invalid_argument("necessary_singular_gap: empty comparison family");
    const std::size_t paths = states.x.n_paths();

    const std::vector<double> cand_per_path =
        singular_integral_per_path(problem, states, adjoints, candidate.eta);

    SingularGap out;
    out.candidate_value = mean(cand_per_path);

    const Mat avg = average_singular_integrand(problem, states, adjoints);
    bool unbounded = false;
    const SingularControl greedy = greedy_comparator(
        problem, states.grid, paths, avg, total_mass_constraint, unbounded);

    std::vector<std::pair<std::string, const SingularControl*>> entries;
    for (const auto& [label, eta] : family)
        entries.emplace_back(label, &eta);
    entries.emplace_back("greedy", &greedy);

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_per_path;
    for (const auto& [label, eta] : entries) {
        std::vector<double> per_path =
            singular_integral_per_path(problem, states, adjoints, *eta);
        const double value = mean(per_path);
        out.per_family.emplace_back(label, value);
        if (value < best) {
            best = value;
            out.best_label = label;
            best_per_path = std::move(per_path);
        }
    }

    out.unbounded = unbounded;
    out.family_min = best;
    if (unbounded) {
        out.gap = std::numeric_limits<double>::infinity();
        out.std_error = 0.0;
        return out;
    }
    out.gap = out.candidate_value - best;
    std::vector<double> diff(paths);
    for (std::size_t p = 0; p < paths; ++p)
        diff[p] = cand_per_path[p] - best_per_path[p];
    out.std_error = standard_error(diff);
    return out;
}

SupportViolation support_violation(const ProblemSpec& problem,
                                   const ControlPair& candidate,
                                   const StateEnsemble& states,
                                   const AdjointSolution& adjoints,
                                   const CertificateConfig& cfg) {
    cfg.validate();
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const double cut = -cfg.big_c * std::sqrt(cfg.epsilon);

    std::vector<double> per_path(paths, 0.0);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const Vec kv = problem.k(t);
        const Mat gv = problem.G(t);
        for (std::size_t p = 0; p < paths; ++p) {
            const Vec integrand =
                kv + gv.transpose() * Vec(adjoints.first.psi.vec(p, i));
            for (Eigen::Index c = 0; c < integrand.size(); ++c) {
                if (integrand(c) >= cut)
                    per_path[p] += integrand(c) *
                                   candidate.eta.increments().at(
                                       p, i, static_cast<std::size_t>(c));
            }
        }
    }

    SupportViolation out;
    out.value = mean(per_path);
    out.std_error = standard_error(per_path);
    out.threshold = cfg.necessary_threshold();
    return out;
}

namespace {

// Concavity of (x,u) -> H(t,x,u,psi,K) along coordinate directions of a
// sampled frame, via nonpositive second differences.
bool hamiltonian_concave_spot_check(const ProblemSpec& problem,
                                    const StateEnsemble& states,
                                    const ControlPair& candidate,
                                    const AdjointSolution& adjoints,
                                    std::string& note) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const std::size_t probe_paths = std::min<std::size_t>(paths, 4);
    const std::size_t probe_nodes = std::min<std::size_t>(grid.n_steps, 5);

    for (std::size_t pi = 0; pi < probe_paths; ++pi) {
        const std::size_t p = pi * (paths / probe_paths);
        for (std::size_t ni = 0; ni < probe_nodes; ++ni) {
            const std::size_t i = ni * (grid.n_steps / probe_nodes);
            const HamiltonianFrame fr =
                frame_at(problem, states, candidate, adjoints, p, i);
            auto value = [&](const Vec& x, const Vec& u) {
                return hamiltonian(problem, fr.t, x, u, fr.psi, fr.K);
            };
            const double base = value(fr.x_ref, fr.u_ref);
            const double tol = 1e-6 * (1.0 + std::abs(base));

            for (std::size_t c = 0; c < problem.dim_n; ++c) {
                const double h =
                    0.05 * (1.0 + std::abs(fr.x_ref(static_cast<Eigen::Index>(c))));
                Vec xp = fr.x_ref, xm = fr.x_ref;
                xp(static_cast<Eigen::Index>(c)) += h;
                xm(static_cast<Eigen::Index>(c)) -= h;
                const double second =
                    value(xp, fr.u_ref) - 2.0 * base + value(xm, fr.u_ref);
                if (second > tol) {
                    note = "H not concave in x at sampled frame";
                    return false;
                }
            }
            for (std::size_t c = 0; c < problem.dim_m; ++c) {
                const auto ci = static_cast<Eigen::Index>(c);
                const double h =
                    0.25 * std::max(1e-3, problem.a1.hi(ci) - problem.a1.lo(ci));
                Vec up = fr.u_ref, um = fr.u_ref;
                up(ci) += h;
                um(ci) -= h;
                const double second =
                    value(fr.x_ref, up) - 2.0 * base + value(fr.x_ref, um);
                if (second > tol) {
                    note = "H not concave in u at sampled frame";
                    return false;
                }
            }
        }
    }
    return true;
}

bool terminal_cost_convex_spot_check(const ProblemSpec& problem,
                                     const StateEnsemble& states,
                                     std::string& note) {
    const std::size_t paths = states.x.n_paths();
    const std::size_t probe = std::min<std::size_t>(paths, 16);
    for (std::size_t pi = 0; pi < probe; ++pi) {
        const std::size_t p = pi * (paths / probe);
        const Vec x = states.x.vec(p, states.grid.n_steps);
        const double base = problem.h(x);
        const double tol = 1e-6 * (1.0 + std::abs(base));
        for (std::size_t c = 0; c < problem.dim_n; ++c) {
            const double h =
                0.1 * (1.0 + std::abs(x(static_cast<Eigen::Index>(c))));
            Vec xp = x, xm = x;
            xp(static_cast<Eigen::Index>(c)) += h;
            xm(static_cast<Eigen::Index>(c)) -= h;
            const double second = problem.h(xp) - 2.0 * base + problem.h(xm);
            if (second < -tol) {
                note = "terminal cost not convex at sampled point";
                return false;
            }
        }
    }
    return true;
}

} // namespace

SufficientCheck sufficient_check(
    const ProblemSpec& problem, const ControlPair& candidate,
    const StateEnsemble& states, const AdjointSolution& adjoints,
    const RegularGap& regular,
    const std::vector<std::pair<std::string, SingularControl>>& eta_family,
    const std::optional<Vec>& total_mass_constraint,
    const CertificateConfig& cfg) {
    cfg.validate();

    SufficientCheck out;
    std::string note;
    if (!hamiltonian_concave_spot_check(problem, states, candidate, adjoints,
                                        note) ||
        !terminal_cost_convex_spot_check(problem, states, note)) {
        out.hypotheses_ok = false;
        out.hypothesis_note = note;
        return out;
    }
    out.hypotheses_ok = true;

    out.regular_residual = regular.gap;
    out.regular_std_error = regular.std_error;
    out.regular_ok =
        passes(out.regular_residual, cfg.epsilon, out.regular_std_error);

    // price-only comparison E int k d(eta - eta^eps)
    const std::vector<double> cand_price =
        price_integral_per_path(problem, states.grid, candidate.eta);
    const double cand_value = mean(cand_price);

    // greedy on the deterministic price integrand
    Mat price(static_cast<Eigen::Index>(states.grid.n_steps),
              static_cast<Eigen::Index>(problem.dim_m));
    for (std::size_t i = 0; i < states.grid.n_steps; ++i)
        price.row(static_cast<Eigen::Index>(i)) =
            problem.k(states.grid.node(i)).transpose();
    bool unbounded = false;
    const SingularControl greedy =
        greedy_comparator(problem, states.grid, states.x.n_paths(), price,
                          total_mass_constraint, unbounded);

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_per_path;
    auto consider = [&](const SingularControl& eta) {
        std::vector<double> pp =
            price_integral_per_path(problem, states.grid, eta);
        const double v = mean(pp);
        if (v < best) {
            best = v;
            best_per_path = std::move(pp);
        }
    };
    for (const auto& [label, eta] : eta_family) {
        (void)label;
        consider(eta);
    }
    consider(greedy);

    if (unbounded) {
        out.singular_residual = std::numeric_limits<double>::infinity();
        out.singular_ok = false;
    } else {
        out.singular_residual = cand_value - best;
        std::vector<double> diff(cand_price.size());
        for (std::size_t p = 0; p < diff.size(); ++p)
            diff[p] = cand_price[p] - best_per_path[p];
        out.singular_std_error = standard_error(diff);
        out.singular_ok =
            passes(out.singular_residual, cfg.sufficient_singular_threshold(),
                   out.singular_std_error);
    }

    out.combined_residual = out.regular_residual + out.singular_residual;
    out.combined_threshold =
        (cfg.epsilon / cfg.big_c) * (cfg.epsilon / cfg.big_c);
    out.combined_ok =
        passes(out.combined_residual, out.combined_threshold,
               out.regular_std_error + out.singular_std_error);
    out.implied_bound = cfg.sufficient_singular_threshold();
    return out;
}

NearOptimality near_optimality_gap(const ProblemSpec& problem,
                                   const ControlPair& candidate,
                                   const std::vector<ControlPair>& family,
                                   const NoiseEnsemble& noise,
                                   double threshold) {
    if (family.empty())
        throw std::invalid_argument("near_optimality_gap: empty control family");

    const StateEnsemble cand_states = simulate(problem, candidate, noise);
    const CostEstimate cand_cost = cost(problem, candidate, cand_states);
    const ValueEstimate value = estimate_value(problem, family, noise);

    NearOptimality out;
    out.candidate_cost = cand_cost.mean;
    out.value_estimate = value.best_cost;
    out.gap = std::abs(cand_cost.mean - value.best_cost);
    out.best_control = value.best_control;

    const std::vector<double>& best_pp =
        value.costs[value.best_index].per_path;
    std::vector<double> diff(cand_cost.per_path.size());
    for (std::size_t p = 0; p < diff.size(); ++p)
        diff[p] = cand_cost.per_path[p] - best_pp[p];
    out.std_error = standard_error(diff);
    out.threshold = threshold;
    out.within_bound = passes(out.gap, threshold, out.std_error);
    return out;
}

} // namespace nearopt
