#pragma once

#include "nearopt/forward.hpp"
#include "nearopt/metrics.hpp"
#include "nearopt/problem.hpp"

#include <iosfwd>

namespace nearopt {

// Costate pair (psi, K) on grid nodes. psi at the final node equals
// h_x(x_T) pathwise. K lives on cells; the terminal node repeats the last
// cell so both arrays share one shape. K entries are stored row-major as
// (r, c) -> r*dim_l + c.
struct FirstOrderAdjoint {
    PathArray psi; // (paths, n_nodes, n)
    PathArray K;   // (paths, n_nodes, n*l)
    std::string backend;
};

// Second-order pair (Q, R). Q at the final node equals h_xx(x_T) pathwise
// and is symmetrized after every backward step. Q entries: (r,c) -> r*n + c.
// R entries: (j, r, c) -> (j*n + r)*n + c, one n x n block per noise
// component.
struct SecondOrderAdjoint {
    PathArray Q; // (paths, n_nodes, n*n)
    PathArray R; // (paths, n_nodes, l*n*n)
    std::string backend;
};

struct AdjointSolution {
    FirstOrderAdjoint first;
    SecondOrderAdjoint second;
};

Mat adjoint_K(const FirstOrderAdjoint& a, std::size_t p, std::size_t i,
              std::size_t dim_l);
Mat adjoint_Q(const SecondOrderAdjoint& a, std::size_t p, std::size_t i);
MatList adjoint_R(const SecondOrderAdjoint& a, std::size_t p, std::size_t i,
                  std::size_t dim_l);

// Least-squares Monte Carlo configuration for the backward solves.
//
// Conditional expectations are fitted on a standardized polynomial basis of
// the state. K and R are extracted by regressing the product of the next
// value with dW/dt on the same basis; with cv_extraction the next value is
// first centered by its fitted conditional mean, which leaves the estimated
// expectation unchanged (E[dW | x_i] = 0) and removes the dominant noise
// term.
struct RegressionConfig {
    int basis_degree = 2;
    double ridge = 1e-8;
    bool cv_extraction = true;
};

FirstOrderAdjoint solve_first_order(const ProblemSpec& problem,
                                    const ControlPair& pair,
                                    const StateEnsemble& states,
                                    const NoiseEnsemble& noise,
                                    const RegressionConfig& cfg);

SecondOrderAdjoint solve_second_order(const ProblemSpec& problem,
                                      const ControlPair& pair,
                                      const StateEnsemble& states,
                                      const NoiseEnsemble& noise,
                                      const FirstOrderAdjoint& first,
                                      const RegressionConfig& cfg);

AdjointSolution solve_adjoints(const ProblemSpec& problem,
                               const ControlPair& pair,
                               const StateEnsemble& states,
                               const NoiseEnsemble& noise,
                               const RegressionConfig& cfg);

// Closed-form backends, registered per problem name. Built-ins cover
// example1, zero, linear and linear_quad (restricted to deterministic
// controls where required).
using ClosedFormAdjoint = std::function<AdjointSolution(
    const ProblemSpec&, const ControlPair&, const StateEnsemble&,
    const NoiseEnsemble&)>;

void register_closed_form_adjoint(const std::string& problem_name,
                                  ClosedFormAdjoint fn);
bool has_closed_form_adjoint(const std::string& problem_name);
AdjointSolution solve_adjoints_closed_form(const ProblemSpec& problem,
                                           const ControlPair& pair,
                                           const StateEnsemble& states,
                                           const NoiseEnsemble& noise);

// A-priori moment statistics reported with every solution.
struct AdjointStats {
    double sup_psi_sq = 0.0; // E sup_t |psi|^2
    double int_K_sq = 0.0;   // E int |K|^2 dt
    double sup_Q_sq = 0.0;   // E sup_t |Q|^2
    double int_R_sq = 0.0;   // E int |R|^2 dt
    bool finite = false;
};

AdjointStats solution_stats(const AdjointSolution& sol, const TimeGrid& grid);

// Integrated costate deviations between two admissible pairs under common
// noise, together with d1(u_a, u_b)^(alpha beta / 2) for ratio tests.
struct AdjointDeviation {
    double first_order = 0.0;  // E int (|psi-psi'|^b + |K-K'|^b) dt
    double second_order = 0.0; // E int (|Q-Q'|^b + |R-R'|^b) dt
    double d1 = 0.0;
    double d1_pow = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

AdjointDeviation estimate_adjoint_deviation(
    const ProblemSpec& problem, const ControlPair& a, const ControlPair& b,
    const NoiseEnsemble& noise, const RegressionConfig& cfg, double alpha,
    double beta);

// varsigma = 1 + |psi| + |K| + |Q| + |R| per (path, node).
WeightEnsemble make_weights(const AdjointSolution& sol);

// Same layout as the state dump: one row per (path, node) with the costate
// entries flattened in storage order.
void dump_adjoints_csv(std::ostream& os, const TimeGrid& grid,
                       const AdjointSolution& sol);

} // namespace nearopt
