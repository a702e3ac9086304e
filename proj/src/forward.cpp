#include "nearopt/forward.hpp"

#include "nearopt/metrics.hpp"
#include "nearopt/numeric.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nearopt {
namespace {

void check_compatible(const ProblemSpec& problem, const ControlPair& pair,
                      const NoiseEnsemble& noise) {
    if (pair.u.grid() != noise.grid)
        throw std::invalid_argument("simulate: controls and noise on different grids");
    if (pair.u.n_paths() != noise.n_paths)
        throw std::invalid_argument("simulate: path count mismatch");
    if (pair.u.dim() != problem.dim_m)
        throw std::invalid_argument("simulate: control dimension mismatch");
    if (noise.dim_l != problem.dim_l)
        throw std::invalid_argument("simulate: noise dimension mismatch");
}

[[noreturn]] void throw_nonfinite(double t, const Vec& x, const Vec& u) {
    std::ostringstream os;
    os << "simulate: non-finite coefficient output at t=" << t << ", x=[";
    for (Eigen::Index i = 0; i < x.size(); ++i)
        os << (i ? "," : "") << x(i);
    os << "], u=[";
    for (Eigen::Index i = 0; i < u.size(); ++i)
        os << (i ? "," : "") << u(i);
    os << "]";
    throw std::runtime_error(os.str());
}

} // namespace

StateEnsemble simulate(const ProblemSpec& problem, const ControlPair& pair,
                       const NoiseEnsemble& noise) {
    check_compatible(problem, pair, noise);

    const TimeGrid& grid = noise.grid;
    const std::size_t paths = noise.n_paths;
    const double dt = grid.dt();

    StateEnsemble out;
    out.grid = grid;
    out.problem_name = problem.name;
    out.control_label = pair.label;
    out.noise_seed = noise.seed;
    out.x = PathArray(paths, grid.n_nodes(), problem.dim_n);

    for (std::size_t p = 0; p < paths; ++p) {
        Vec x = problem.y;
        out.x.vec(p, 0) = x;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            const double t = grid.node(i);
            const Vec x_plus = x + problem.G(t) * pair.eta.increment(p, i);
            const Eigen::Map<const Vec> u = pair.u.value(p, i);
            const Vec drift = problem.f(t, x_plus, u);
            const Mat diffusion = problem.sigma(t, x_plus, u);
            x = x_plus + drift * dt + diffusion * noise.dW.vec(p, i);
            if (!x.allFinite())
                throw_nonfinite(t, x_plus, u);
            out.x.vec(p, i + 1) = x;
        }
    }
    return out;
}

CostEstimate cost(const ProblemSpec& problem, const ControlPair& pair,
                  const StateEnsemble& states) {
    if (states.x.n_paths() != pair.u.n_paths() ||
        states.grid != pair.u.grid())
        throw std::invalid_argument("cost: states/controls shape mismatch");

    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const double dt = grid.dt();

    std::vector<double> term(paths), run(paths), sing(paths), total(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        term[p] = problem.h(states.x.vec(p, grid.n_steps));
        double r = 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            const double t = grid.node(i);
            const Vec x_plus = Vec(states.x.vec(p, i)) +
                               problem.G(t) * pair.eta.increment(p, i);
            r += dt * problem.ell(t, x_plus, pair.u.value(p, i));
            s += problem.k(t).dot(pair.eta.increment(p, i));
        }
        run[p] = r;
        sing[p] = s;
        total[p] = term[p] + r + s;
    }

    CostEstimate est;
    est.n_paths = paths;
    est.terminal = mean(term);
    est.running = mean(run);
    est.singular = mean(sing);
    est.mean = est.terminal + est.running + est.singular;
    est.std_error = standard_error(total);
    est.per_path = std::move(total);
    return est;
}

ValueEstimate estimate_value(const ProblemSpec& problem,
                             const std::vector<ControlPair>& family,
                             const NoiseEnsemble& noise) {
    if (family.empty())
        throw std::invalid_argument("estimate_value: empty control family");

    ValueEstimate out;
    out.costs.reserve(family.size());
    for (const ControlPair& pair : family) {
        const StateEnsemble states = simulate(problem, pair, noise);
        out.costs.push_back(cost(problem, pair, states));
        out.family.push_back(pair.label);
    }
    out.best_index = 0;
    out.best_cost = out.costs[0].mean;
    for (std::size_t i = 1; i < out.costs.size(); ++i) {
        if (out.costs[i].mean < out.best_cost) {
            out.best_cost = out.costs[i].mean;
            out.best_index = i;
        }
    }
    out.best_control = out.family[out.best_index];
    return out;
}

StateDeviation estimate_state_deviation(const ProblemSpec& problem,
                                        const ControlPair& a,
                                        const ControlPair& b,
                                        const NoiseEnsemble& noise,
                                        double beta) {
    if (!(beta > 0.0))
        throw std::invalid_argument("estimate_state_deviation: beta must be positive");

    const StateEnsemble xa = simulate(problem, a, noise);
    const StateEnsemble xb = simulate(problem, b, noise);

    const std::size_t paths = noise.n_paths;
    std::vector<double> sup_pow(paths, 0.0);
    for (std::size_t p = 0; p < paths; ++p) {
        double best = 0.0;
        for (std::size_t i = 0; i < xa.grid.n_nodes(); ++i) {
            const double diff = (xa.x.vec(p, i) - xb.x.vec(p, i)).norm();
            best = std::max(best, diff);
        }
        sup_pow[p] = std::pow(best, 2.0 * beta);
    }

    StateDeviation dev;
    dev.lhs_moment = mean(sup_pow);
    dev.d1 = d1(a.u, b.u);
    dev.d2 = d2(a.eta, b.eta);
    dev.beta = beta;
    return dev;
}

void dump_states_csv(std::ostream& os, const ControlPair& pair,
                     const StateEnsemble& states) {
    const TimeGrid& grid = states.grid;
    const std::size_t n = states.x.dim();
    const std::size_t m = pair.u.dim();

    os << "path,step,t";
    for (std::size_t c = 0; c < n; ++c)
        os << ",x" << c;
    for (std::size_t c = 0; c < m; ++c)
        os << ",u" << c;
    for (std::size_t c = 0; c < m; ++c)
        os << ",eta" << c;
    os << "\n";

    const PathArray cum = pair.eta.cumulative_paths();
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        os << buf;
    };
    for (std::size_t p = 0; p < states.x.n_paths(); ++p) {
        for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
            const std::size_t cell = (i < grid.n_steps) ? i : grid.n_steps - 1;
            os << p << "," << i << ",";
            put(grid.node(i));
            for (std::size_t c = 0; c < n; ++c) {
                os << ",";
                put(states.x.at(p, i, c));
            }
            for (std::size_t c = 0; c < m; ++c) {
                os << ",";
                put(pair.u.values().at(p, cell, c));
            }
            for (std::size_t c = 0; c < m; ++c) {
                os << ",";
                put(cum.at(p, i, c));
            }
            os << "\n";
        }
    }
}

} // namespace nearopt
