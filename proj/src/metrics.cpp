#include "nearopt/metrics.hpp"

#include "nearopt/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace nearopt {
namespace {

void require_same_shape(const PathArray& a, const PathArray& b,
                        const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

} // namespace

double d1(const RegularControl& u, const RegularControl& v) {
    require_same_shape(u.values(), v.values(), "d1");
    if (u.grid() != v.grid())
        throw std::invalid_argument("d1: grid mismatch");

    const std::size_t paths = u.n_paths();
    const std::size_t steps = u.grid().n_steps;
    const std::size_t m = u.dim();

    // Integer cell count with a single final rounding: the measure is
    // (T - s) * count / (paths * steps). Rounding once keeps window
    // bounds exact (rounding is monotone in the exact cell fraction).
    std::size_t count = 0;
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t i = 0; i < steps; ++i) {
            bool differs = false;
            for (std::size_t c = 0; c < m; ++c) {
                if (u.values().at(p, i, c) != v.values().at(p, i, c)) {
                    differs = true;
                    break;
                }
            }
            if (differs)
                ++count;
        }
    }
    return (u.grid().end - u.grid().start) *
           (static_cast<double>(count) /
            static_cast<double>(paths * steps));
}

double d2(const SingularControl& eta, const SingularControl& xi) {
    require_same_shape(eta.increments(), xi.increments(), "d2");
    if (eta.grid() != xi.grid())
        throw std::invalid_argument("d2: grid mismatch");

    const std::size_t paths = eta.n_paths();
    const std::size_t m = eta.dim();
    const std::size_t steps = eta.grid().n_steps;

    std::vector<double> sup_sq(paths, 0.0);
    Vec diff = Vec::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t p = 0; p < paths; ++p) {
        diff.setZero();
        double best = 0.0; // node 0 difference is identically zero
        for (std::size_t i = 0; i < steps; ++i) {
            diff += eta.increment(p, i) - xi.increment(p, i);
            best = std::max(best, diff.squaredNorm());
        }
        sup_sq[p] = best;
    }
    return std::sqrt(mean(sup_sq));
}

double control_distance(const ControlPair& a, const ControlPair& b) {
    return d1(a.u, b.u) + d2(a.eta, b.eta);
}

double weighted_d1(const RegularControl& u, const RegularControl& v,
                   const WeightEnsemble& weights) {
    require_same_shape(u.values(), v.values(), "weighted_d1");
    const std::size_t paths = u.n_paths();
    const std::size_t steps = u.grid().n_steps;
    if (weights.varsigma.n_paths() != paths ||
        weights.varsigma.n_nodes() < steps)
        throw std::invalid_argument("weighted_d1: weight shape mismatch");

    const double dt = u.grid().dt();
    std::vector<double> per_path(paths, 0.0);
    for (std::size_t p = 0; p < paths; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
            const double w = weights.varsigma.at(p, i, 0);
            if (w < 1.0)
                throw std::invalid_argument("weighted_d1: weight below 1 detected");
            acc += dt * w * (u.value(p, i) - v.value(p, i)).norm();
        }
        per_path[p] = acc;
    }
    return mean(per_path);
}

} // namespace nearopt
