#include "nearopt/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nearopt {

double hamiltonian(const ProblemSpec& problem, double t, const Vec& x,
                   const Vec& u, const Vec& p, const Mat& q) {
    if (p.size() != static_cast<Eigen::Index>(problem.dim_n))
        throw std::invalid_argument("hamiltonian: costate dimension mismatch");
    const Vec fv = problem.f(t, x, u);
    const Mat sv = problem.sigma(t, x, u);
    if (q.rows() != sv.rows() || q.cols() != sv.cols())
        throw std::invalid_argument("hamiltonian: q shape mismatch");
    return -p.dot(fv) - (q.array() * sv.array()).sum() - problem.ell(t, x, u);
}

HamiltonianFrame frame_at(const ProblemSpec& problem,
                          const StateEnsemble& states, const ControlPair& pair,
                          const AdjointSolution& adjoints, std::size_t path,
                          std::size_t node) {
    HamiltonianFrame fr;
    fr.t = states.grid.node(node);
    fr.x_ref = states.x.vec(path, node);
    const std::size_t cell =
        node < states.grid.n_steps ? node : states.grid.n_steps - 1;
    fr.u_ref = pair.u.value(path, cell);
    fr.psi = adjoints.first.psi.vec(path, node);
    fr.K = adjoint_K(adjoints.first, path, node, problem.dim_l);
    fr.Q = adjoint_Q(adjoints.second, path, node);
    return fr;
}

double script_H(const ProblemSpec& problem, const HamiltonianFrame& frame,
                const Vec& u) {
    const Mat sigma_ref = problem.sigma(frame.t, frame.x_ref, frame.u_ref);
    const Mat q_eff = frame.K - frame.Q * sigma_ref;
    const Mat sigma_u = problem.sigma(frame.t, frame.x_ref, u);
    double quad = 0.0;
    for (Eigen::Index j = 0; j < sigma_u.cols(); ++j)
        quad += sigma_u.col(j).dot(frame.Q * sigma_u.col(j));
    return hamiltonian(problem, frame.t, frame.x_ref, u, frame.psi, q_eff) -
           0.5 * quad;
}

GradientInterval clarke_interval(const std::function<double(double)>& fn,
                                 double x, double half_width_hint) {
    const double scale = half_width_hint > 0.0
                             ? half_width_hint
                             : 1e-6 * (1.0 + std::abs(x));
    const double f0 = fn(x);
    if (!std::isfinite(f0))
        throw std::runtime_error("clarke_interval: non-finite sample");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k) {
        const double h = scale / static_cast<double>(1 << k);
        const double qf = (fn(x + h) - f0) / h;
        const double qb = (f0 - fn(x - h)) / h;
        if (!std::isfinite(qf) || !std::isfinite(qb))
            throw std::runtime_error("clarke_interval: non-finite sample");
        lo = std::min(lo, std::min(qf, qb));
        hi = std::max(hi, std::max(qf, qb));
    }

    GradientInterval out;
    const double merge_tol = 1e-5 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    if (hi - lo <= merge_tol) {
        // widest stencil: cancellation noise scales with 1/h
        const double central = (fn(x + scale) - fn(x - scale)) / (2.0 * scale);
        out.lower = Vec::Constant(1, central);
        out.upper = Vec::Constant(1, central);
    } else {
        out.lower = Vec::Constant(1, lo);
        out.upper = Vec::Constant(1, hi);
    }
    return out;
}

TildeH tilde_H(const ProblemSpec& problem, const HamiltonianFrame& frame,
               const Vec& u, const Vec& u_bar, double epsilon,
               double varsigma) {
    if (varsigma < 1.0)
        throw std::invalid_argument("tilde_H: weight below 1");
    if (epsilon < 0.0)
        throw std::invalid_argument("tilde_H: epsilon must be nonnegative");

    const double penalty_scale = std::sqrt(epsilon) * varsigma;
    auto value_of = [&](const Vec& uu) {
        return script_H(problem, frame, uu) -
               penalty_scale * (uu - u_bar).norm();
    };

    TildeH out;
    out.value = value_of(u);
    const auto m = static_cast<Eigen::Index>(problem.dim_m);
    out.interval.lower = Vec::Zero(m);
    out.interval.upper = Vec::Zero(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        auto sliced = [&](double z) {
            Vec uu = u;
            uu(c) = z;
            return value_of(uu);
        };
        const GradientInterval gi = clarke_interval(sliced, u(c));
        out.interval.lower(c) = gi.lower(0);
        out.interval.upper(c) = gi.upper(0);
    }
    return out;
}

} // namespace nearopt
