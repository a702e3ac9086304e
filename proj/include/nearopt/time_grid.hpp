#pragma once

#include <cstddef>
#include <stdexcept>

namespace nearopt {

// Uniform partition of [start, end] into n_steps cells [t_i, t_{i+1}).
struct TimeGrid {
    double start = 0.0;
    double end = 1.0;
    std::size_t n_steps = 1;

    TimeGrid() = default;

    TimeGrid(double s, double t, std::size_t steps)
        : start(s), end(t), n_steps(steps) {
        if (!(t > s))
            throw std::invalid_argument("TimeGrid: end must exceed start");
        if (steps == 0)
            throw std::invalid_argument("TimeGrid: n_steps must be positive");
    }

    double dt() const { return (end - start) / static_cast<double>(n_steps); }

    std::size_t n_nodes() const { return n_steps + 1; }

    // node(n_steps) returns end exactly.
    double node(std::size_t i) const {
        if (i >= n_steps)
            return end;
        return start + dt() * static_cast<double>(i);
    }

    // Index of the cell [t_i, t_{i+1}) containing t, clamped to valid cells.
    std::size_t cell_containing(double t) const {
        if (t <= start)
            return 0;
        if (t >= end)
            return n_steps - 1;
        auto i = static_cast<std::size_t>((t - start) / dt());
        if (i >= n_steps)
            i = n_steps - 1;
        return i;
    }

    bool operator==(const TimeGrid& o) const {
        return start == o.start && end == o.end && n_steps == o.n_steps;
    }
    bool operator!=(const TimeGrid& o) const { return !(*this == o); }
};

} // namespace nearopt
