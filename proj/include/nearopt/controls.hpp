#pragma once

#include "nearopt/noise.hpp"
#include "nearopt/path_array.hpp"
#include "nearopt/time_grid.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>

namespace nearopt {

// Closed axis-aligned box in R^m.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec l, Vec h);

    std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
    bool contains(const Vec& v, double tol = 0.0) const;
    Vec project(const Vec& v) const;
};

// Piecewise-constant control on grid cells, valued in a box domain.
// Adaptedness is structural: constructors only ever expose the noise
// prefix strictly before the cell being filled.
class RegularControl {
public:
    // Filter sees (path, step, increments of steps 0..step-1, flattened
    // step-major then component) and returns the cell value.
    using Filter = std::function<Vec(std::size_t path, std::size_t step,
                                     std::span<const double> past)>;

    static RegularControl constant(const TimeGrid& grid, std::size_t n_paths,
                                   const Vec& value, const Box& domain);
    static RegularControl deterministic(
        const TimeGrid& grid, std::size_t n_paths,
        const std::function<Vec(double)>& value_at, const Box& domain);
    static RegularControl adapted(const NoiseEnsemble& noise, std::size_t dim_m,
                                  const Filter& filter, const Box& domain);
    // Takes ownership of per-cell values; entries are projected into the
    // domain like every other constructor.
    static RegularControl from_values(const TimeGrid& grid, PathArray values,
                                      const Box& domain);

    const TimeGrid& grid() const { return grid_; }
    const Box& domain() const { return domain_; }
    const PathArray& values() const { return values_; }
    PathArray& values() { return values_; }
    std::size_t n_paths() const { return values_.n_paths(); }
    std::size_t dim() const { return values_.dim(); }

    Eigen::Map<const Vec> value(std::size_t p, std::size_t step) const {
        return values_.vec(p, step);
    }

    // True when every path carries the same cell values (bitwise).
    bool deterministic_across_paths() const;

private:
    RegularControl(const TimeGrid& grid, PathArray values, Box domain)
        : grid_(grid), values_(std::move(values)), domain_(std::move(domain)) {}

    TimeGrid grid_;
    PathArray values_; // (paths, n_steps, m)
    Box domain_;
};

// Nondecreasing singular control stored as nonnegative per-cell atoms.
// The cumulative path is continuous on the left: eta at node i sums the
// increments of cells 0..i-1, so eta(start) = 0 and eta(end) is the
// total mass.
class SingularControl {
public:
    static SingularControl zero(const TimeGrid& grid, std::size_t n_paths,
                                std::size_t dim_m);
    // All mass in the cell containing t0.
    static SingularControl atom(const TimeGrid& grid, std::size_t n_paths,
                                const Vec& mass, double t0);
    // Mass spread uniformly over the cells.
    static SingularControl ramp(const TimeGrid& grid, std::size_t n_paths,
                                const Vec& total_mass);
    // Validates shape and nonnegativity of every increment.
    static SingularControl from_increments(const TimeGrid& grid,
                                           PathArray increments);

    const TimeGrid& grid() const { return grid_; }
    const PathArray& increments() const { return increments_; }
    std::size_t n_paths() const { return increments_.n_paths(); }
    std::size_t dim() const { return increments_.dim(); }

    Eigen::Map<const Vec> increment(std::size_t p, std::size_t step) const {
        return increments_.vec(p, step);
    }

    double cumulative(std::size_t p, std::size_t node, std::size_t c) const;
    // (paths, n_nodes, m) array of cumulative values.
    PathArray cumulative_paths() const;
    Vec total_mass(std::size_t p) const;

    bool deterministic_across_paths() const;

private:
    SingularControl(const TimeGrid& grid, PathArray increments)
        : grid_(grid), increments_(std::move(increments)) {}

    TimeGrid grid_;
    PathArray increments_; // (paths, n_steps, m), entries >= 0
};

struct ControlPair {
    RegularControl u;
    SingularControl eta;
    std::string label;

    ControlPair(RegularControl u_, SingularControl eta_, std::string label_);
};

} // namespace nearopt
