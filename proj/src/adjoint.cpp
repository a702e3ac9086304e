#include "nearopt/adjoint.hpp"

#include "nearopt/numeric.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nearopt {
namespace {

// Multi-indices of total degree <= degree over dim variables.
std::vector<std::vector<int>> monomial_exponents(std::size_t dim, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(dim, 0);
    // counts exponent tuples recursively, lexicographic in total degree
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos,
                                                    int remaining) {
        if (pos == dim) {
            out.push_back(current);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            current[pos] = e;
            rec(pos + 1, remaining - e);
        }
        current[pos] = 0;
    };
    rec(0, degree);
    return out;
}

// Per-step least-squares projector on a standardized polynomial basis of
// the state. Zero-variance components fall back to the constant column, so
// degenerate ensembles reduce to plain means.
class StepRegression {
public:
    StepRegression(const PathArray& x, std::size_t node, int degree,
                   double ridge) {
        const std::size_t paths = x.n_paths();
        const std::size_t dim = x.dim();
        const auto exps = monomial_exponents(dim, degree);
        const auto basis = static_cast<Eigen::Index>(exps.size());

        Vec mu = Vec::Zero(static_cast<Eigen::Index>(dim));
        Vec sd = Vec::Ones(static_cast<Eigen::Index>(dim));
        for (std::size_t c = 0; c < dim; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < paths; ++p)
                s += x.at(p, node, c);
            const double m = s / static_cast<double>(paths);
            double ss = 0.0;
            for (std::size_t p = 0; p < paths; ++p) {
                const double d = x.at(p, node, c) - m;
                ss += d * d;
            }
            const double v = ss / static_cast<double>(paths);
            mu(static_cast<Eigen::Index>(c)) = m;
            sd(static_cast<Eigen::Index>(c)) =
                v > 1e-300 ? std::sqrt(v) : 1.0;
        }

        phi_.resize(static_cast<Eigen::Index>(paths), basis);
        for (std::size_t p = 0; p < paths; ++p) {
            for (Eigen::Index b = 0; b < basis; ++b) {
                double v = 1.0;
                for (std::size_t c = 0; c < dim; ++c) {
                    const int e = exps[static_cast<std::size_t>(b)][c];
                    if (e == 0)
                        continue;
                    const double z = (x.at(p, node, c) -
                                      mu(static_cast<Eigen::Index>(c))) /
                                     sd(static_cast<Eigen::Index>(c));
                    for (int q = 0; q < e; ++q)
                        v *= z;
                }
                phi_(static_cast<Eigen::Index>(p), b) = v;
            }
        }

        Mat normal = phi_.transpose() * phi_;
        normal.diagonal().array() += ridge * static_cast<double>(paths);
        llt_.compute(normal);
        if (llt_.info() != Eigen::Success) {
            Eigen::JacobiSVD<Mat> svd(normal);
            const double smax = svd.singularValues()(0);
            const double smin =
                svd.singularValues()(svd.singularValues().size() - 1);
            std::ostringstream os;
            os << "adjoint regression: singular normal matrix at node " << node
               << " (condition number "
               << (smin > 0.0 ? smax / smin
                              : std::numeric_limits<double>::infinity())
               << ")";
            throw std::runtime_error(os.str());
        }
    }

    // Fitted values Phi * theta at the sample points.
    Vec fit(const Vec& target) const {
        const Vec theta = llt_.solve(phi_.transpose() * target);
        return phi_ * theta;
    }

private:
    Mat phi_;
    Eigen::LLT<Mat> llt_;
};

Vec column_from(const PathArray& arr, std::size_t node, std::size_t comp) {
    Vec out(static_cast<Eigen::Index>(arr.n_paths()));
    for (std::size_t p = 0; p < arr.n_paths(); ++p)
        out(static_cast<Eigen::Index>(p)) = arr.at(p, node, comp);
    return out;
}

[[noreturn]] void throw_nonfinite_driver(double t, std::size_t path) {
    std::ostringstream os;
    os << "adjoint solve: non-finite driver output at t=" << t << ", path "
       << path;
    throw std::runtime_error(os.str());
}

struct ClosedFormRegistry {
    std::map<std::string, ClosedFormAdjoint> fns;
};

ClosedFormRegistry& closed_forms();

void require_deterministic(const ControlPair& pair, const char* problem) {
    if (!pair.u.deterministic_across_paths() ||
        !pair.eta.deterministic_across_paths())
        throw std::invalid_argument(
            std::string("closed-form adjoint for ") + problem +
            " requires deterministic controls");
}

AdjointSolution closed_form_example1(const ProblemSpec& problem,
                                     const ControlPair& pair,
                                     const StateEnsemble& states,
                                     const NoiseEnsemble& noise) {
    require_deterministic(pair, "example1");
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    (void)problem;

    const double eta_total = pair.eta.total_mass(0)(0);

    AdjointSolution sol;
    sol.first.backend = sol.second.backend = "closed_form";
    sol.first.psi = PathArray(paths, grid.n_nodes(), 1);
    sol.first.K = PathArray(paths, grid.n_nodes(), 1);
    sol.second.Q = PathArray(paths, grid.n_nodes(), 1, 1.0);
    sol.second.R = PathArray(paths, grid.n_nodes(), 1, 0.0);

    for (std::size_t p = 0; p < paths; ++p) {
        double stoch = 0.0; // int_0^t u dW along the path
        sol.first.psi.at(p, 0, 0) = stoch + eta_total;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            const double u = pair.u.values().at(0, i, 0);
            sol.first.K.at(p, i, 0) = u;
            stoch += u * noise.increment(p, i, 0);
            sol.first.psi.at(p, i + 1, 0) = stoch + eta_total;
        }
        sol.first.K.at(p, grid.n_steps, 0) =
            sol.first.K.at(p, grid.n_steps - 1, 0);
    }
    return sol;
}

AdjointSolution closed_form_zero(const ProblemSpec&, const ControlPair& pair,
                                 const StateEnsemble& states,
                                 const NoiseEnsemble&) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    (void)pair;
    AdjointSolution sol;
    sol.first.backend = sol.second.backend = "closed_form";
    sol.first.psi = PathArray(paths, grid.n_nodes(), 1);
    sol.first.K = PathArray(paths, grid.n_nodes(), 1);
    sol.second.Q = PathArray(paths, grid.n_nodes(), 1);
    sol.second.R = PathArray(paths, grid.n_nodes(), 1);
    return sol;
}

// dx = a x dt + s dW with terminal gradient c: psi_t = c e^{a (T-t)}, K = 0.
AdjointSolution closed_form_linear(const ProblemSpec& problem,
                                   const ControlPair&,
                                   const StateEnsemble& states,
                                   const NoiseEnsemble&) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const double a = problem.derivs.f_x(0.0, problem.y, problem.a1.lo)(0, 0);
    const double c = problem.derivs.h_x(problem.y)(0);

    AdjointSolution sol;
    sol.first.backend = sol.second.backend = "closed_form";
    sol.first.psi = PathArray(paths, grid.n_nodes(), 1);
    sol.first.K = PathArray(paths, grid.n_nodes(), 1);
    sol.second.Q = PathArray(paths, grid.n_nodes(), 1);
    sol.second.R = PathArray(paths, grid.n_nodes(), 1);
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
        const double v = c * std::exp(a * (grid.end - grid.node(i)));
        for (std::size_t p = 0; p < paths; ++p)
            sol.first.psi.at(p, i, 0) = v;
    }
    return sol;
}

// dx = a x dt + s dW with terminal Hessian c:
//   psi_t = c x_t e^{2a(T-t)}, K_t = c s e^{2a(T-t)},
//   Q_t = c e^{2a(T-t)}, R = 0.
AdjointSolution closed_form_linear_quad(const ProblemSpec& problem,
                                        const ControlPair&,
                                        const StateEnsemble& states,
                                        const NoiseEnsemble&) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const double a = problem.derivs.f_x(0.0, problem.y, problem.a1.lo)(0, 0);
    const double c = problem.derivs.h_xx(problem.y)(0, 0);
    const double s = problem.sigma(0.0, problem.y, problem.a1.lo)(0, 0);

    AdjointSolution sol;
    sol.first.backend = sol.second.backend = "closed_form";
    sol.first.psi = PathArray(paths, grid.n_nodes(), 1);
    sol.first.K = PathArray(paths, grid.n_nodes(), 1);
    sol.second.Q = PathArray(paths, grid.n_nodes(), 1);
    sol.second.R = PathArray(paths, grid.n_nodes(), 1);
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
        const double decay = std::exp(2.0 * a * (grid.end - grid.node(i)));
        for (std::size_t p = 0; p < paths; ++p) {
            sol.first.psi.at(p, i, 0) = c * states.x.at(p, i, 0) * decay;
            sol.first.K.at(p, i, 0) = c * s * decay;
            sol.second.Q.at(p, i, 0) = c * decay;
        }
    }
    return sol;
}

ClosedFormRegistry& closed_forms() {
    static ClosedFormRegistry reg;
    static std::once_flag flag;
    std::call_once(flag, [] {
        reg.fns["example1"] = closed_form_example1;
        reg.fns["zero"] = closed_form_zero;
        reg.fns["linear"] = closed_form_linear;
        reg.fns["linear_quad"] = closed_form_linear_quad;
    });
    return reg;
}

} // namespace

Mat adjoint_K(const FirstOrderAdjoint& a, std::size_t p, std::size_t i,
              std::size_t dim_l) {
    const std::size_t n = a.psi.dim();
    Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_l));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim_l; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                a.K.at(p, i, r * dim_l + c);
    return out;
}

Mat adjoint_Q(const SecondOrderAdjoint& a, std::size_t p, std::size_t i) {
    const auto n = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(a.Q.dim()))));
    Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                a.Q.at(p, i, r * n + c);
    return out;
}

MatList adjoint_R(const SecondOrderAdjoint& a, std::size_t p, std::size_t i,
                  std::size_t dim_l) {
    const std::size_t n2 = a.R.dim() / dim_l;
    const auto n = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(n2))));
    MatList out;
    out.reserve(dim_l);
    for (std::size_t j = 0; j < dim_l; ++j) {
        Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                m(static_cast<Eigen::Index>(r),
                  static_cast<Eigen::Index>(c)) =
                    a.R.at(p, i, (j * n + r) * n + c);
        out.push_back(std::move(m));
    }
    return out;
}

FirstOrderAdjoint solve_first_order(const ProblemSpec& problem,
                                    const ControlPair& pair,
                                    const StateEnsemble& states,
                                    const NoiseEnsemble& noise,
                                    const RegressionConfig& cfg) {
    if (cfg.basis_degree < 0 || cfg.ridge < 0.0)
        throw std::invalid_argument("RegressionConfig: invalid parameters");

    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const std::size_t n = problem.dim_n;
    const std::size_t l = problem.dim_l;
    const double dt = grid.dt();

    FirstOrderAdjoint adj;
    adj.backend = "regression";
    adj.psi = PathArray(paths, grid.n_nodes(), n);
    adj.K = PathArray(paths, grid.n_nodes(), n * l);

    // terminal condition, exact pathwise
    for (std::size_t p = 0; p < paths; ++p)
        adj.psi.vec(p, grid.n_steps) =
            problem.derivs.h_x(states.x.vec(p, grid.n_steps));

    for (std::size_t i = grid.n_steps; i-- > 0;) {
        const double t = grid.node(i);
        const StepRegression reg(states.x, i, cfg.basis_degree, cfg.ridge);

        // conditional means of psi_{i+1}
        std::vector<Vec> psi_hat(n);
        for (std::size_t r = 0; r < n; ++r)
            psi_hat[r] = reg.fit(column_from(adj.psi, i + 1, r));

        // K extraction from the increment covariance
        std::vector<Vec> k_hat(n * l);
        for (std::size_t r = 0; r < n; ++r) {
            Vec next = column_from(adj.psi, i + 1, r);
            if (cfg.cv_extraction)
                next -= psi_hat[r];
            for (std::size_t c = 0; c < l; ++c) {
                Vec target(static_cast<Eigen::Index>(paths));
                for (std::size_t p = 0; p < paths; ++p)
                    target(static_cast<Eigen::Index>(p)) =
                        next(static_cast<Eigen::Index>(p)) *
                        noise.increment(p, i, c) / dt;
                k_hat[r * l + c] = reg.fit(target);
            }
        }

        for (std::size_t p = 0; p < paths; ++p) {
            Vec ph(static_cast<Eigen::Index>(n));
            for (std::size_t r = 0; r < n; ++r)
                ph(static_cast<Eigen::Index>(r)) =
                    psi_hat[r](static_cast<Eigen::Index>(p));
            Mat Km(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < l; ++c)
                    Km(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(c)) =
                        k_hat[r * l + c](static_cast<Eigen::Index>(p));

            const Eigen::Map<const Vec> x = states.x.vec(p, i);
            const Eigen::Map<const Vec> u = pair.u.value(p, i);
            const Mat fx = problem.derivs.f_x(t, x, u);
            const MatList sx = problem.derivs.sigma_x(t, x, u);
            const Vec lx = problem.derivs.ell_x(t, x, u);

            Vec drift = fx.transpose() * ph + lx;
            for (std::size_t j = 0; j < l; ++j)
                drift += sx[j].transpose() * Km.col(static_cast<Eigen::Index>(j));

            const Vec psi_i = ph + dt * drift;
            if (!psi_i.allFinite())
                throw_nonfinite_driver(t, p);
            adj.psi.vec(p, i) = psi_i;
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < l; ++c)
                    adj.K.at(p, i, r * l + c) =
                        Km(static_cast<Eigen::Index>(r),
                           static_cast<Eigen::Index>(c));
        }
    }

    // terminal node repeats the last cell integrand
    for (std::size_t p = 0; p < paths; ++p)
        for (std::size_t c = 0; c < n * l; ++c)
            adj.K.at(p, grid.n_steps, c) = adj.K.at(p, grid.n_steps - 1, c);
    return adj;
}

SecondOrderAdjoint solve_second_order(const ProblemSpec& problem,
                                      const ControlPair& pair,
                                      const StateEnsemble& states,
                                      const NoiseEnsemble& noise,
                                      const FirstOrderAdjoint& first,
                                      const RegressionConfig& cfg) {
    const TimeGrid& grid = states.grid;
    const std::size_t paths = states.x.n_paths();
    const std::size_t n = problem.dim_n;
    const std::size_t l = problem.dim_l;
    const double dt = grid.dt();

    SecondOrderAdjoint adj;
    adj.backend = "regression";
    adj.Q = PathArray(paths, grid.n_nodes(), n * n);
    adj.R = PathArray(paths, grid.n_nodes(), l * n * n);

    for (std::size_t p = 0; p < paths; ++p) {
        const Mat hxx = problem.derivs.h_xx(states.x.vec(p, grid.n_steps));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                adj.Q.at(p, grid.n_steps, r * n + c) =
                    hxx(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c));
    }

    for (std::size_t i = grid.n_steps; i-- > 0;) {
        const double t = grid.node(i);
        const StepRegression reg(states.x, i, cfg.basis_degree, cfg.ridge);

        std::vector<Vec> q_hat(n * n);
        for (std::size_t e = 0; e < n * n; ++e)
            q_hat[e] = reg.fit(column_from(adj.Q, i + 1, e));

        std::vector<Vec> r_hat(l * n * n);
        for (std::size_t e = 0; e < n * n; ++e) {
            Vec next = column_from(adj.Q, i + 1, e);
            if (cfg.cv_extraction)
                next -= q_hat[e];
            for (std::size_t j = 0; j < l; ++j) {
                Vec target(static_cast<Eigen::Index>(paths));
                for (std::size_t p = 0; p < paths; ++p)
                    target(static_cast<Eigen::Index>(p)) =
                        next(static_cast<Eigen::Index>(p)) *
                        noise.increment(p, i, j) / dt;
                r_hat[j * n * n + e] = reg.fit(target);
            }
        }

        for (std::size_t p = 0; p < paths; ++p) {
            Mat Qh(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    Qh(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(c)) =
                        q_hat[r * n + c](static_cast<Eigen::Index>(p));
            MatList Rh(l, Mat::Zero(static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(n)));
            for (std::size_t j = 0; j < l; ++j)
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c)
                        Rh[j](static_cast<Eigen::Index>(r),
                              static_cast<Eigen::Index>(c)) =
                            r_hat[j * n * n + r * n + c](
                                static_cast<Eigen::Index>(p));

            const Eigen::Map<const Vec> x = states.x.vec(p, i);
            const Eigen::Map<const Vec> u = pair.u.value(p, i);
            const Mat fx = problem.derivs.f_x(t, x, u);
            const MatList sx = problem.derivs.sigma_x(t, x, u);

            // Gamma from the frozen first-order solution at this node
            Mat gamma = problem.derivs.ell_xx(t, x, u);
            const MatList fxx = problem.derivs.f_xx(t, x, u);
            const MatList sxx = problem.derivs.sigma_xx(t, x, u);
            for (std::size_t r = 0; r < n; ++r) {
                gamma += first.psi.at(p, i, r) * fxx[r];
                for (std::size_t j = 0; j < l; ++j)
                    gamma += first.K.at(p, i, r * l + j) * sxx[r * l + j];
            }

            Mat drift = fx.transpose() * Qh + Qh * fx + gamma;
            for (std::size_t j = 0; j < l; ++j)
                drift += sx[j].transpose() * Qh * sx[j] +
                         sx[j].transpose() * Rh[j] + Rh[j] * sx[j];

            Mat Qi = Qh + dt * drift;
            Qi = 0.5 * (Qi + Qi.transpose()).eval();
            if (!Qi.allFinite())
                throw_nonfinite_driver(t, p);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    adj.Q.at(p, i, r * n + c) =
                        Qi(static_cast<Eigen::Index>(r),
                           static_cast<Eigen::Index>(c));
            for (std::size_t j = 0; j < l; ++j)
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c)
                        adj.R.at(p, i, (j * n + r) * n + c) =
                            Rh[j](static_cast<Eigen::Index>(r),
                                  static_cast<Eigen::Index>(c));
        }
    }

    for (std::size_t p = 0; p < paths; ++p)
        for (std::size_t c = 0; c < l * n * n; ++c)
            adj.R.at(p, grid.n_steps, c) = adj.R.at(p, grid.n_steps - 1, c);
    return adj;
}

AdjointSolution solve_adjoints(const ProblemSpec& problem,
                               const ControlPair& pair,
                               const StateEnsemble& states,
                               const NoiseEnsemble& noise,
                               const RegressionConfig& cfg) {
    AdjointSolution sol;
    sol.first = solve_first_order(problem, pair, states, noise, cfg);
    sol.second =
        solve_second_order(problem, pair, states, noise, sol.first, cfg);
    return sol;
}

void register_closed_form_adjoint(const std::string& problem_name,
                                  ClosedFormAdjoint fn) {
    closed_forms().fns[problem_name] = std::move(fn);
}

bool has_closed_form_adjoint(const std::string& problem_name) {
    return closed_forms().fns.count(problem_name) > 0;
}

AdjointSolution solve_adjoints_closed_form(const ProblemSpec& problem,
                                           const ControlPair& pair,
                                           const StateEnsemble& states,
                                           const NoiseEnsemble& noise) {
    auto it = closed_forms().fns.find(problem.name);
    if (it == closed_forms().fns.end())
        throw std::invalid_argument("no closed-form adjoint backend for '" +
                                    problem.name + "'");
    return it->second(problem, pair, states, noise);
}

AdjointStats solution_stats(const AdjointSolution& sol, const TimeGrid& grid) {
    const std::size_t paths = sol.first.psi.n_paths();
    const double dt = grid.dt();

    std::vector<double> sup_psi(paths), int_k(paths), sup_q(paths),
        int_r(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        double sp = 0.0, sq = 0.0, ik = 0.0, ir = 0.0;
        for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
            sp = std::max(sp, sol.first.psi.vec(p, i).squaredNorm());
            sq = std::max(sq, sol.second.Q.vec(p, i).squaredNorm());
        }
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            ik += dt * sol.first.K.vec(p, i).squaredNorm();
            ir += dt * sol.second.R.vec(p, i).squaredNorm();
        }
        sup_psi[p] = sp;
        sup_q[p] = sq;
        int_k[p] = ik;
        int_r[p] = ir;
    }

    AdjointStats st;
    st.sup_psi_sq = mean(sup_psi);
    st.int_K_sq = mean(int_k);
    st.sup_Q_sq = mean(sup_q);
    st.int_R_sq = mean(int_r);
    st.finite = std::isfinite(st.sup_psi_sq) && std::isfinite(st.int_K_sq) &&
                std::isfinite(st.sup_Q_sq) && std::isfinite(st.int_R_sq);
    return st;
}

AdjointDeviation estimate_adjoint_deviation(
    const ProblemSpec& problem, const ControlPair& a, const ControlPair& b,
    const NoiseEnsemble& noise, const RegressionConfig& cfg, double alpha,
    double beta) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("estimate_adjoint_deviation: alpha in (0,1) required");
    if (!(beta > 0.0))
        throw std::invalid_argument("estimate_adjoint_deviation: beta must be positive");

    const StateEnsemble xa = simulate(problem, a, noise);
    const StateEnsemble xb = simulate(problem, b, noise);
    const AdjointSolution sa = solve_adjoints(problem, a, xa, noise, cfg);
    const AdjointSolution sb = solve_adjoints(problem, b, xb, noise, cfg);

    const TimeGrid& grid = noise.grid;
    const std::size_t paths = noise.n_paths;
    const double dt = grid.dt();

    std::vector<double> first_dev(paths), second_dev(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        double f1 = 0.0, f2 = 0.0;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            const double psi_d =
                (sa.first.psi.vec(p, i) - sb.first.psi.vec(p, i)).norm();
            const double k_d =
                (sa.first.K.vec(p, i) - sb.first.K.vec(p, i)).norm();
            const double q_d =
                (sa.second.Q.vec(p, i) - sb.second.Q.vec(p, i)).norm();
            const double r_d =
                (sa.second.R.vec(p, i) - sb.second.R.vec(p, i)).norm();
            f1 += dt * (std::pow(psi_d, beta) + std::pow(k_d, beta));
            f2 += dt * (std::pow(q_d, beta) + std::pow(r_d, beta));
        }
        first_dev[p] = f1;
        second_dev[p] = f2;
    }

    AdjointDeviation dev;
    dev.first_order = mean(first_dev);
    dev.second_order = mean(second_dev);
    dev.d1 = d1(a.u, b.u);
    dev.d1_pow = std::pow(dev.d1, alpha * beta / 2.0);
    dev.alpha = alpha;
    dev.beta = beta;
    return dev;
}

WeightEnsemble make_weights(const AdjointSolution& sol) {
    const std::size_t paths = sol.first.psi.n_paths();
    const std::size_t nodes = sol.first.psi.n_nodes();

    WeightEnsemble w;
    w.varsigma = PathArray(paths, nodes, 1);
    for (std::size_t p = 0; p < paths; ++p)
        for (std::size_t i = 0; i < nodes; ++i)
            w.varsigma.at(p, i, 0) = 1.0 + sol.first.psi.vec(p, i).norm() +
                                     sol.first.K.vec(p, i).norm() +
                                     sol.second.Q.vec(p, i).norm() +
                                     sol.second.R.vec(p, i).norm();
    return w;
}

void dump_adjoints_csv(std::ostream& os, const TimeGrid& grid,
                       const AdjointSolution& sol) {
    const std::size_t n = sol.first.psi.dim();
    const std::size_t nl = sol.first.K.dim();
    const std::size_t nn = sol.second.Q.dim();
    const std::size_t lnn = sol.second.R.dim();

    os << "path,step,t";
    for (std::size_t c = 0; c < n; ++c)
        os << ",psi" << c;
    for (std::size_t c = 0; c < nl; ++c)
        os << ",K" << c;
    for (std::size_t c = 0; c < nn; ++c)
        os << ",Q" << c;
    for (std::size_t c = 0; c < lnn; ++c)
        os << ",R" << c;
    os << "\n";

    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        os << buf;
    };
    for (std::size_t p = 0; p < sol.first.psi.n_paths(); ++p) {
        for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
            os << p << "," << i << ",";
            put(grid.node(i));
            for (std::size_t c = 0; c < n; ++c) {
                os << ",";
                put(sol.first.psi.at(p, i, c));
            }
            for (std::size_t c = 0; c < nl; ++c) {
                os << ",";
                put(sol.first.K.at(p, i, c));
            }
            for (std::size_t c = 0; c < nn; ++c) {
                os << ",";
                put(sol.second.Q.at(p, i, c));
            }
            for (std::size_t c = 0; c < lnn; ++c) {
                os << ",";
                put(sol.second.R.at(p, i, c));
            }
            os << "\n";
        }
    }
}

} // namespace nearopt
