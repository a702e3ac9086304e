#pragma once

#include "nearopt/controls.hpp"
#include "nearopt/problem.hpp"

#include <iosfwd>
#include <vector>

namespace nearopt {

// Simulated state paths. Node values are the left limits of the state: the
// singular atom of cell i fires at the cell's left endpoint, after the
// previous cell's diffusion step, so x at node i carries the atoms of cells
// 0..i-1 only (matching the left-continuous cumulative control).
struct StateEnsemble {
    PathArray x; // (paths, n_nodes, n)
    TimeGrid grid;
    std::string problem_name;
    std::string control_label;
    std::uint64_t noise_seed = 0;
};

// Euler scheme for the controlled state. Coefficients of cell i are
// evaluated at the post-atom state x_i + G(t_i) deta_i.
StateEnsemble simulate(const ProblemSpec& problem, const ControlPair& pair,
                       const NoiseEnsemble& noise);

struct CostEstimate {
    double mean = 0.0;      // terminal + running + singular (exact identity)
    double std_error = 0.0; // from per-path totals
    std::size_t n_paths = 0;
    double terminal = 0.0;
    double running = 0.0;
    double singular = 0.0;
    std::vector<double> per_path;
};

CostEstimate cost(const ProblemSpec& problem, const ControlPair& pair,
                  const StateEnsemble& states);

struct ValueEstimate {
    double best_cost = 0.0;
    std::size_t best_index = 0;
    std::string best_control;
    std::vector<std::string> family;
    std::vector<CostEstimate> costs;
};

// Minimizes the estimated cost over a finite control family under common
// noise. Ties break to the first index.
ValueEstimate estimate_value(const ProblemSpec& problem,
                             const std::vector<ControlPair>& family,
                             const NoiseEnsemble& noise);

struct StateDeviation {
    double lhs_moment = 0.0; // E sup_t |x^a - x^b|^(2 beta), sup over nodes
    double d1 = 0.0;
    double d2 = 0.0;
    double beta = 1.0;
};

StateDeviation estimate_state_deviation(const ProblemSpec& problem,
                                        const ControlPair& a,
                                        const ControlPair& b,
                                        const NoiseEnsemble& noise,
                                        double beta);

// One row per (path, node): path, step, t, x components, u components
// (cells; the terminal row repeats the last cell), cumulative eta.
void dump_states_csv(std::ostream& os, const ControlPair& pair,
                     const StateEnsemble& states);

} // namespace nearopt
