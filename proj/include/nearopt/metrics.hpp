#pragma once

#include "nearopt/controls.hpp"

namespace nearopt {

// Per-(path,node) weights, each >= 1, used by the weighted control metric.
struct WeightEnsemble {
    PathArray varsigma; // (paths, n_nodes, 1)
};

// Product-measure distance on regular controls: the (P x dt)-measure of the
// set where the controls disagree. Disagreement is exact bitwise comparison;
// controls are constructed objects, not measured data.
double d1(const RegularControl& u, const RegularControl& v);

// Sup-distance on singular controls: sqrt(E sup_t |eta_t - xi_t|^2), the
// supremum taken over grid nodes of the cumulative paths.
double d2(const SingularControl& eta, const SingularControl& xi);

// Sum metric on control pairs.
double control_distance(const ControlPair& a, const ControlPair& b);

// Weighted L1 distance E int varsigma_t |u_t - v_t| dt. Throws if a weight
// is below 1 (corrupt input).
double weighted_d1(const RegularControl& u, const RegularControl& v,
                   const WeightEnsemble& weights);

} // namespace nearopt
