#include "nearopt/controls.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace nearopt {

Box::Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size())
        throw std::invalid_argument("Box: lo/hi dimension mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(lo(i) <= hi(i)))
            throw std::invalid_argument(
                "Box: lo must not exceed hi (box must be a nonempty convex set)");
        if (!std::isfinite(lo(i)) || !std::isfinite(hi(i)))
            throw std::invalid_argument("Box: bounds must be finite");
    }
}

bool Box::contains(const Vec& v, double tol) const {
    if (v.size() != lo.size())
        return false;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (v(i) < lo(i) - tol || v(i) > hi(i) + tol)
            return false;
    }
    return true;
}

Vec Box::project(const Vec& v) const {
    Vec out = v;
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        out(i) = std::min(std::max(out(i), lo(i)), hi(i));
    return out;
}

RegularControl RegularControl::constant(const TimeGrid& grid,
                                        std::size_t n_paths, const Vec& value,
                                        const Box& domain) {
    if (static_cast<std::size_t>(value.size()) != domain.dim())
        throw std::invalid_argument("RegularControl: value/domain dimension mismatch");
    const Vec v = domain.project(value);
    PathArray arr(n_paths, grid.n_steps, domain.dim());
    for (std::size_t p = 0; p < n_paths; ++p)
        for (std::size_t i = 0; i < grid.n_steps; ++i)
            arr.vec(p, i) = v;
    return RegularControl(grid, std::move(arr), domain);
}

RegularControl RegularControl::deterministic(
    const TimeGrid& grid, std::size_t n_paths,
    const std::function<Vec(double)>& value_at, const Box& domain) {
    PathArray arr(n_paths, grid.n_steps, domain.dim());
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        Vec v = value_at(grid.node(i));
        if (static_cast<std::size_t>(v.size()) != domain.dim())
            throw std::invalid_argument("RegularControl: callback dimension mismatch");
        v = domain.project(v);
        for (std::size_t p = 0; p < n_paths; ++p)
            arr.vec(p, i) = v;
    }
    return RegularControl(grid, std::move(arr), domain);
}

RegularControl RegularControl::adapted(const NoiseEnsemble& noise,
                                       std::size_t dim_m, const Filter& filter,
                                       const Box& domain) {
    if (dim_m != domain.dim())
        throw std::invalid_argument("RegularControl: filter/domain dimension mismatch");
    const TimeGrid& grid = noise.grid;
    PathArray arr(noise.n_paths, grid.n_steps, dim_m);
    for (std::size_t p = 0; p < noise.n_paths; ++p) {
        const double* base = &noise.dW.raw()[p * grid.n_steps * noise.dim_l];
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            // Only increments of cells 0..i-1 are visible.
            std::span<const double> past(base, i * noise.dim_l);
            Vec v = filter(p, i, past);
            if (static_cast<std::size_t>(v.size()) != dim_m)
                throw std::invalid_argument("RegularControl: filter dimension mismatch");
            arr.vec(p, i) = domain.project(v);
        }
    }
    return RegularControl(grid, std::move(arr), domain);
}

RegularControl RegularControl::from_values(const TimeGrid& grid,
                                           PathArray values,
                                           const Box& domain) {
    if (values.n_nodes() != grid.n_steps || values.dim() != domain.dim())
        throw std::invalid_argument("RegularControl: values shape mismatch");
    for (std::size_t p = 0; p < values.n_paths(); ++p)
        for (std::size_t i = 0; i < grid.n_steps; ++i)
            values.vec(p, i) = domain.project(values.vec(p, i));
    return RegularControl(grid, std::move(values), domain);
}

bool RegularControl::deterministic_across_paths() const {
    const std::size_t m = dim();
    for (std::size_t p = 1; p < n_paths(); ++p)
        for (std::size_t i = 0; i < grid_.n_steps; ++i)
            for (std::size_t c = 0; c < m; ++c)
                if (values_.at(p, i, c) != values_.at(0, i, c))
                    return false;
    return true;
}

SingularControl SingularControl::zero(const TimeGrid& grid,
                                      std::size_t n_paths, std::size_t dim_m) {
    return SingularControl(grid, PathArray(n_paths, grid.n_steps, dim_m));
}

SingularControl SingularControl::atom(const TimeGrid& grid,
                                      std::size_t n_paths, const Vec& mass,
                                      double t0) {
    for (Eigen::Index c = 0; c < mass.size(); ++c)
        if (mass(c) < 0.0)
            throw std::invalid_argument("SingularControl: mass must be nonnegative");
    if (t0 < grid.start || t0 > grid.end)
        throw std::invalid_argument("SingularControl: atom time outside horizon");
    PathArray arr(n_paths, grid.n_steps, static_cast<std::size_t>(mass.size()));
    const std::size_t cell = grid.cell_containing(t0);
    for (std::size_t p = 0; p < n_paths; ++p)
        arr.vec(p, cell) = mass;
    return SingularControl(grid, std::move(arr));
}

SingularControl SingularControl::ramp(const TimeGrid& grid,
                                      std::size_t n_paths,
                                      const Vec& total_mass) {
    for (Eigen::Index c = 0; c < total_mass.size(); ++c)
        if (total_mass(c) < 0.0)
            throw std::invalid_argument("SingularControl: mass must be nonnegative");
    const Vec per_cell = total_mass / static_cast<double>(grid.n_steps);
    PathArray arr(n_paths, grid.n_steps,
                  static_cast<std::size_t>(total_mass.size()));
    for (std::size_t p = 0; p < n_paths; ++p)
        for (std::size_t i = 0; i < grid.n_steps; ++i)
            arr.vec(p, i) = per_cell;
    return SingularControl(grid, std::move(arr));
}

SingularControl SingularControl::from_increments(const TimeGrid& grid,
                                                 PathArray increments) {
    if (increments.n_nodes() != grid.n_steps)
        throw std::invalid_argument("SingularControl: increments must have one entry per cell");
    for (double v : increments.raw())
        if (!(v >= 0.0))
            throw std::invalid_argument("SingularControl: negative increment");
    return SingularControl(grid, std::move(increments));
}

double SingularControl::cumulative(std::size_t p, std::size_t node,
                                   std::size_t c) const {
    double s = 0.0;
    for (std::size_t j = 0; j < node; ++j)
        s += increments_.at(p, j, c);
    return s;
}

PathArray SingularControl::cumulative_paths() const {
    PathArray out(n_paths(), grid_.n_nodes(), dim());
    for (std::size_t p = 0; p < n_paths(); ++p) {
        for (std::size_t c = 0; c < dim(); ++c) {
            double s = 0.0;
            out.at(p, 0, c) = 0.0;
            for (std::size_t i = 0; i < grid_.n_steps; ++i) {
                s += increments_.at(p, i, c);
                out.at(p, i + 1, c) = s;
            }
        }
    }
    return out;
}

Vec SingularControl::total_mass(std::size_t p) const {
    Vec s = Vec::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < grid_.n_steps; ++i)
        s += increment(p, i);
    return s;
}

bool SingularControl::deterministic_across_paths() const {
    const std::size_t m = dim();
    for (std::size_t p = 1; p < n_paths(); ++p)
        for (std::size_t i = 0; i < grid_.n_steps; ++i)
            for (std::size_t c = 0; c < m; ++c)
                if (increments_.at(p, i, c) != increments_.at(0, i, c))
                    return false;
    return true;
}

ControlPair::ControlPair(RegularControl u_, SingularControl eta_,
                         std::string label_)
    : u(std::move(u_)), eta(std::move(eta_)), label(std::move(label_)) {
    if (u.grid() != eta.grid())
        throw std::invalid_argument("ControlPair: controls on different grids");
    if (u.n_paths() != eta.n_paths())
        throw std::invalid_argument("ControlPair: controls on different ensembles");
    if (u.dim() != eta.dim())
        throw std::invalid_argument("ControlPair: control dimension mismatch");
}

} // namespace nearopt
