#pragma once

#include "nearopt/adjoint.hpp"
#include "nearopt/forward.hpp"
#include "nearopt/hamiltonian.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nearopt {

// Threshold parameters for the certificate residuals. The constants C are
// user inputs; residuals are always reported raw alongside the verdicts.
struct CertificateConfig {
    double epsilon = 0.04;
    double delta = 1.0 / 3.0;
    double big_c = 1.0;
    std::size_t u_grid_points = 101;   // per component
    std::size_t max_u_grid_total = 20001;

    void validate() const;
    double necessary_threshold() const; // C eps^delta
    double sufficient_singular_threshold() const; // C sqrt(eps)
};

// Verdicts add 3 standard errors of slack so Monte Carlo noise cannot flip
// a true pass into a fail.
inline bool passes(double residual, double threshold, double std_error) {
    return residual <= threshold + 3.0 * std_error;
}

// Strong perturbation: the control equals v on every cell contained in
// [t0, t0+theta] and is unchanged elsewhere. Containment (rather than
// overlap) keeps d1(result, u) <= theta exact for unaligned windows.
RegularControl spike_perturb(const RegularControl& u, double t0, double theta,
                             const Vec& v, const Box& a1);

// Convex perturbation eta + theta (xi - eta), theta in [0,1], applied to
// the per-cell increments.
SingularControl convex_perturb_singular(const SingularControl& eta,
                                        const SingularControl& xi,
                                        double theta);

// Finite evaluation grid over the box A1 (endpoints included). The total
// point count is capped combinatorially for multi-dimensional domains.
std::vector<Vec> control_grid(const Box& a1, std::size_t points_per_dim,
                              std::size_t max_total);

struct RegularGap {
    double gap = 0.0;       // sup_grid E int script_H(u) - E int script_H(u^eps)
    double std_error = 0.0; // paired, at the maximizing grid point
    double candidate_value = 0.0;
    Vec best_u;
    std::vector<std::pair<Vec, double>> per_u;  // grid value breakdown
    std::vector<double> pointwise_deficit;      // per-node supremum deficit
};

RegularGap necessary_regular_gap(const ProblemSpec& problem,
                                 const ControlPair& candidate,
                                 const StateEnsemble& states,
                                 const AdjointSolution& adjoints,
                                 const CertificateConfig& cfg);

struct SingularGap {
    double gap = 0.0; // E int (k + G* psi) d eta^eps  -  family infimum
    double std_error = 0.0;
    double candidate_value = 0.0;
    double family_min = 0.0;
    std::string best_label;
    std::vector<std::pair<std::string, double>> per_family;
    bool unbounded = false; // uncapped domain with negative integrand
};

// Family members are compared under the candidate's costate. A greedy
// single-cell comparator (all mass at the cell with the smallest
// path-average integrand, honoring the cap and the optional total-mass
// constraint) is always appended; with no constraint and an uncapped
// domain the greedy mass is zero unless the integrand dips negative, in
// which case the infimum is unbounded and reported as such.
SingularGap necessary_singular_gap(
    const ProblemSpec& problem, const ControlPair& candidate,
    const StateEnsemble& states, const AdjointSolution& adjoints,
    const std::vector<std::pair<std::string, SingularControl>>& family,
    const std::optional<Vec>& total_mass_constraint,
    const CertificateConfig& cfg);

struct SupportViolation {
    double value = 0.0; // E int (k + G* psi) 1_B d eta^eps
    double std_error = 0.0;
    double threshold = 0.0; // compared against C eps^delta, reported only
};

// B is the set where the singular integrand sits above -C sqrt(eps),
// applied componentwise.
SupportViolation support_violation(const ProblemSpec& problem,
                                   const ControlPair& candidate,
                                   const StateEnsemble& states,
                                   const AdjointSolution& adjoints,
                                   const CertificateConfig& cfg);

struct SufficientCheck {
    bool hypotheses_ok = false;
    std::string hypothesis_note;
    double regular_residual = 0.0;  // compared against epsilon
    double regular_std_error = 0.0;
    bool regular_ok = false;
    double singular_residual = 0.0; // k-price part, against C sqrt(eps)
    double singular_std_error = 0.0;
    bool singular_ok = false;
    double combined_residual = 0.0;  // against (eps/C)^2
    double combined_threshold = 0.0;
    bool combined_ok = false;
    double implied_bound = 0.0; // C sqrt(eps) cost-gap claim when both hold
};

// Concavity of H in (x,u) and convexity of h are spot-checked on sampled
// frames before the residuals are issued; a failed spot-check yields
// hypotheses_ok = false and no verdict claim.
SufficientCheck sufficient_check(
    const ProblemSpec& problem, const ControlPair& candidate,
    const StateEnsemble& states, const AdjointSolution& adjoints,
    const RegularGap& regular,
    const std::vector<std::pair<std::string, SingularControl>>& eta_family,
    const std::optional<Vec>& total_mass_constraint,
    const CertificateConfig& cfg);

struct NearOptimality {
    double candidate_cost = 0.0;
    double value_estimate = 0.0;
    double gap = 0.0; // |J(candidate) - value estimate|
    double std_error = 0.0; // paired against the best family member
    std::string best_control;
    double threshold = 0.0;
    bool within_bound = false;
};

NearOptimality near_optimality_gap(const ProblemSpec& problem,
                                   const ControlPair& candidate,
                                   const std::vector<ControlPair>& family,
                                   const NoiseEnsemble& noise,
                                   double threshold);

} // namespace nearopt
