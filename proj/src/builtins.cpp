#include "nearopt/problem.hpp"

namespace nearopt {

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

} // namespace

// One-dimensional worked example: dx = u dW + d eta, x_0 = 0, terminal cost
// x^2/2, running cost -u, no singular price. u in [0,1], eta capped at 1.
ProblemSpec make_example1() {
    ProblemSpec s;
    s.name = "example1";
    s.dim_n = s.dim_m = s.dim_l = 1;
    s.f = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    s.sigma = [](double, const Vec&, const Vec& u) {
        return Mat::Constant(1, 1, u(0));
    };
    s.ell = [](double, const Vec&, const Vec& u) { return -u(0); };
    s.h = [](const Vec& x) { return 0.5 * x(0) * x(0); };
    s.G = [](double) { return Mat::Constant(1, 1, 1.0); };
    s.k = [](double) { return Vec::Zero(1); };
    s.a1 = Box(scalar(0.0), scalar(1.0));
    s.a2_cap = scalar(1.0);
    s.y = Vec::Zero(1);

    DerivativeBundle d;
    d.mode = DerivativeBundle::Mode::Analytic;
    d.f_x = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.sigma_x = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_x = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    d.f_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.sigma_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_xx = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.h_x = [](const Vec& x) { return x; };
    d.h_xx = [](const Vec&) { return Mat::Constant(1, 1, 1.0); };
    d.f_u = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.sigma_u = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Constant(1, 1, 1.0)};
    };
    d.ell_u = [](double, const Vec&, const Vec&) {
        return Vec::Constant(1, -1.0);
    };
    s.derivs = d;
    return s;
}

ProblemSpec make_zero_problem() {
    ProblemSpec s;
    s.name = "zero";
    s.dim_n = s.dim_m = s.dim_l = 1;
    s.f = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    s.sigma = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    s.ell = [](double, const Vec&, const Vec&) { return 0.0; };
    s.h = [](const Vec&) { return 0.0; };
    s.G = [](double) { return Mat::Constant(1, 1, 1.0); };
    s.k = [](double) { return Vec::Zero(1); };
    s.a1 = Box(scalar(-1.0), scalar(1.0));
    s.a2_cap = std::nullopt;
    s.y = Vec::Zero(1);

    DerivativeBundle d;
    d.mode = DerivativeBundle::Mode::Analytic;
    d.f_x = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.sigma_x = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_x = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    d.f_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.sigma_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_xx = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.h_x = [](const Vec&) { return Vec::Zero(1); };
    d.h_xx = [](const Vec&) { return Mat::Zero(1, 1); };
    d.f_u = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.sigma_u = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_u = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    s.derivs = d;
    return s;
}

namespace {

// Shared scaffold for the scalar linear benchmarks dx = a x dt + s dW.
ProblemSpec linear_base(const char* name, double a, double sigma_const,
                        double y0) {
    ProblemSpec s;
    s.name = name;
    s.dim_n = s.dim_m = s.dim_l = 1;
    s.f = [a](double, const Vec& x, const Vec&) {
        return Vec::Constant(1, a * x(0));
    };
    s.sigma = [sigma_const](double, const Vec&, const Vec&) {
        return Mat::Constant(1, 1, sigma_const);
    };
    s.ell = [](double, const Vec&, const Vec&) { return 0.0; };
    s.G = [](double) { return Mat::Constant(1, 1, 1.0); };
    s.k = [](double) { return Vec::Zero(1); };
    s.a1 = Box(scalar(-1.0), scalar(1.0));
    s.a2_cap = std::nullopt;
    s.y = Vec::Constant(1, y0);

    DerivativeBundle d;
    d.mode = DerivativeBundle::Mode::Analytic;
    d.f_x = [a](double, const Vec&, const Vec&) {
        return Mat::Constant(1, 1, a);
    };
    d.sigma_x = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_x = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    d.f_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.sigma_xx = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_xx = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.f_u = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    d.sigma_u = [](double, const Vec&, const Vec&) {
        return MatList{Mat::Zero(1, 1)};
    };
    d.ell_u = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    s.derivs = d;
    return s;
}

} // namespace

ProblemSpec make_linear_problem(double a, double c, double sigma_const,
                                double y0) {
    ProblemSpec s = linear_base("linear", a, sigma_const, y0);
    s.h = [c](const Vec& x) { return c * x(0); };
    s.derivs.h_x = [c](const Vec&) { return Vec::Constant(1, c); };
    s.derivs.h_xx = [](const Vec&) { return Mat::Zero(1, 1); };
    return s;
}

ProblemSpec make_linear_quad_problem(double a, double c, double sigma_const,
                                     double y0) {
    ProblemSpec s = linear_base("linear_quad", a, sigma_const, y0);
    s.h = [c](const Vec& x) { return 0.5 * c * x(0) * x(0); };
    s.derivs.h_x = [c](const Vec& x) { return Vec::Constant(1, c * x(0)); };
    s.derivs.h_xx = [c](const Vec&) { return Mat::Constant(1, 1, c); };
    return s;
}

} // namespace nearopt
