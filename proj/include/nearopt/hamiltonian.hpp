#pragma once

#include "nearopt/adjoint.hpp"
#include "nearopt/problem.hpp"

#include <functional>

namespace nearopt {

// H(t,x,u,p,q) = -p.f - <q,sigma> - ell with <q,sigma> the entrywise
// contraction sum_{ij} q_ij sigma_ij.
double hamiltonian(const ProblemSpec& problem, double t, const Vec& x,
                   const Vec& u, const Vec& p, const Mat& q);

// Frozen costate frame along a reference pair at one (path, node).
struct HamiltonianFrame {
    double t = 0.0;
    Vec x_ref;
    Vec u_ref;
    Vec psi;
    Mat K; // n x l
    Mat Q; // n x n
};

HamiltonianFrame frame_at(const ProblemSpec& problem,
                          const StateEnsemble& states, const ControlPair& pair,
                          const AdjointSolution& adjoints, std::size_t path,
                          std::size_t node);

// Second-order corrected functional evaluated in the frame:
//   H(t, x_ref, u, psi, K - Q sigma(t, x_ref, u_ref))
//     - 1/2 sum_j sigma_j(t, x_ref, u)^T Q sigma_j(t, x_ref, u).
double script_H(const ProblemSpec& problem, const HamiltonianFrame& frame,
                const Vec& u);

// Componentwise interval enclosure of a generalized gradient.
struct GradientInterval {
    Vec lower;
    Vec upper;

    bool contains_zero(double tol = 0.0) const {
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (lower(i) > tol || upper(i) < -tol)
                return false;
        return true;
    }
    bool is_singleton(double tol = 1e-9) const {
        return ((upper - lower).array().abs() <= tol).all();
    }
};

// Interval of one-sided difference quotients of a locally Lipschitz scalar
// function, sampled at eight shrinking scales below the hint width. At
// points where the quotients agree the symmetric difference is returned as
// a singleton; at kinks the [min, max] envelope is returned, which encloses
// the generalized gradient (conservatively for nearby kinks).
GradientInterval clarke_interval(const std::function<double(double)>& fn,
                                 double x, double half_width_hint = 0.0);

struct TildeH {
    double value = 0.0;
    GradientInterval interval;
};

// Penalized functional script_H(u) - sqrt(eps) varsigma |u - u_bar| and its
// componentwise gradient interval at u.
TildeH tilde_H(const ProblemSpec& problem, const HamiltonianFrame& frame,
               const Vec& u, const Vec& u_bar, double epsilon,
               double varsigma);

} // namespace nearopt
