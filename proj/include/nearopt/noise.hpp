#pragma once

#include "nearopt/path_array.hpp"
#include "nearopt/time_grid.hpp"

#include <cstdint>

namespace nearopt {

// Brownian increments on a time grid, one block per path.
//
// Increments are produced by a counter-based generator keyed on
// (seed, path, draw index), so any (path, step, component) entry is
// reproducible in isolation and paths can be filled in parallel without
// an ordering dependence. Identical seeds give bit-identical ensembles.
struct NoiseEnsemble {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t dim_l = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    PathArray dW; // (n_paths, n_steps, dim_l), N(0, dt) entries

    double increment(std::size_t p, std::size_t step, std::size_t c) const {
        return dW.at(p, step, c);
    }
};

// With antithetic=true, path 2k+1 is the negation of path 2k.
NoiseEnsemble sample_noise(const TimeGrid& grid, std::size_t n_paths,
                           std::size_t dim_l, std::uint64_t seed,
                           bool antithetic = false);

namespace detail {
// Standard normal draw for (seed, path, index); used by the sampler and
// available to tests probing the generation contract.
double gaussian_draw(std::uint64_t seed, std::uint64_t path,
                     std::uint64_t index);
} // namespace detail

} // namespace nearopt
