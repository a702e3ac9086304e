#pragma once

#include "nearopt/controls.hpp"
#include "nearopt/path_array.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nearopt {

using MatList = std::vector<Mat>;

// First and second state derivatives of the problem coefficients, plus the
// control derivatives used by smoothness spot-checks.
//
// Shapes (n = state, m = control, l = noise dimension):
//   f_x      n x n Jacobian, (r,c) = d f_r / d x_c
//   sigma_x  l entries, entry j is the n x n Jacobian of the j-th column
//   ell_x    length-n gradient
//   f_xx     n entries, entry r is the Hessian of f_r
//   sigma_xx n*l entries, entry r*l+j is the Hessian of sigma(r,j)
//   ell_xx   n x n Hessian
//   h_x/h_xx terminal-cost gradient and Hessian
//   f_u      n x m; sigma_u l entries of n x m; ell_u length-m gradient
struct DerivativeBundle {
    enum class Mode { Analytic, FiniteDifference };
    Mode mode = Mode::Analytic;

    std::function<Mat(double, const Vec&, const Vec&)> f_x;
    std::function<MatList(double, const Vec&, const Vec&)> sigma_x;
    std::function<Vec(double, const Vec&, const Vec&)> ell_x;
    std::function<MatList(double, const Vec&, const Vec&)> f_xx;
    std::function<MatList(double, const Vec&, const Vec&)> sigma_xx;
    std::function<Mat(double, const Vec&, const Vec&)> ell_xx;
    std::function<Vec(const Vec&)> h_x;
    std::function<Mat(const Vec&)> h_xx;
    std::function<Mat(double, const Vec&, const Vec&)> f_u;
    std::function<MatList(double, const Vec&, const Vec&)> sigma_u;
    std::function<Vec(double, const Vec&, const Vec&)> ell_u;
};

// Control problem data: dynamics, costs, singular gain and price, control
// domains, initial state and the derivative bundle. Coefficients are code
// callbacks; only numeric parameters come from configuration.
struct ProblemSpec {
    std::string name;
    std::size_t dim_n = 1;
    std::size_t dim_m = 1;
    std::size_t dim_l = 1;

    std::function<Vec(double, const Vec&, const Vec&)> f;     // drift, R^n
    std::function<Mat(double, const Vec&, const Vec&)> sigma; // n x l
    std::function<double(double, const Vec&, const Vec&)> ell;
    std::function<double(const Vec&)> h;
    std::function<Mat(double)> G; // n x m
    std::function<Vec(double)> k; // R^m, componentwise >= 0

    Box a1;                      // regular-control domain
    std::optional<Vec> a2_cap;   // cumulative cap per component; unset = [0,inf)
    Vec y;                       // initial state

    DerivativeBundle derivs;
};

// Central-difference bundle built from the coefficient callbacks.
DerivativeBundle finite_difference_bundle(
    const std::function<Vec(double, const Vec&, const Vec&)>& f,
    const std::function<Mat(double, const Vec&, const Vec&)>& sigma,
    const std::function<double(double, const Vec&, const Vec&)>& ell,
    const std::function<double(const Vec&)>& h, std::size_t dim_n,
    std::size_t dim_m, std::size_t dim_l);

// Shape and sign checks on sampled points; throws std::invalid_argument
// with a distinct message per violation.
void validate_problem(const ProblemSpec& spec);

using ProblemParams = std::map<std::string, double>;
using ProblemFactory = std::function<ProblemSpec(const ProblemParams&)>;

// Name-keyed registry of problems. Built-ins are registered on first use:
//   example1     the one-dimensional worked example (parameter epsilon)
//   zero         all coefficients zero
//   linear       f = a x, sigma = s, h = c x          (params a, c, sigma, y)
//   linear_quad  f = a x, sigma = s, h = c x^2 / 2    (params a, c, sigma, y)
class ProblemRegistry {
public:
    static ProblemRegistry& instance();

    void add_factory(const std::string& name, ProblemFactory factory);
    void add(const std::string& name, const ProblemSpec& spec);
    bool contains(const std::string& name) const;
    ProblemSpec make(const std::string& name,
                     const ProblemParams& params = {}) const;
    std::vector<std::string> names() const;

private:
    ProblemRegistry() = default;
    std::map<std::string, ProblemFactory> factories_;
};

ProblemSpec make_problem(const std::string& name,
                         const ProblemParams& params = {});

// Built-in problem specs (also reachable through the registry).
ProblemSpec make_example1();
ProblemSpec make_zero_problem();
ProblemSpec make_linear_problem(double a, double c, double sigma_const,
                                double y0);
ProblemSpec make_linear_quad_problem(double a, double c, double sigma_const,
                                     double y0);

} // namespace nearopt
