#include "nearopt/problem.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace nearopt {
namespace {

double step_for(double x, double base) { return base * (1.0 + std::abs(x)); }

constexpr double kFirstOrderStep = 1e-5;
constexpr double kSecondOrderStep = 1e-4;

void ensure_finite(const Mat& m, const char* what) {
    if (!m.allFinite())
        throw std::runtime_error(std::string("non-finite derivative output: ") + what);
}

} // namespace

DerivativeBundle finite_difference_bundle(
    const std::function<Vec(double, const Vec&, const Vec&)>& f,
    const std::function<Mat(double, const Vec&, const Vec&)>& sigma,
    const std::function<double(double, const Vec&, const Vec&)>& ell,
    const std::function<double(const Vec&)>& h, std::size_t dim_n,
    std::size_t dim_m, std::size_t dim_l) {
    const auto n = static_cast<Eigen::Index>(dim_n);
    const auto m = static_cast<Eigen::Index>(dim_m);
    const auto l = static_cast<Eigen::Index>(dim_l);

    DerivativeBundle d;
    d.mode = DerivativeBundle::Mode::FiniteDifference;

    d.f_x = [f, n](double t, const Vec& x, const Vec& u) {
        Mat J(n, n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double hs = step_for(x(c), kFirstOrderStep);
            Vec xp = x, xm = x;
            xp(c) += hs;
            xm(c) -= hs;
            J.col(c) = (f(t, xp, u) - f(t, xm, u)) / (2.0 * hs);
        }
        return J;
    };

    d.sigma_x = [sigma, n, l](double t, const Vec& x, const Vec& u) {
        MatList out(static_cast<std::size_t>(l), Mat::Zero(n, n));
        for (Eigen::Index c = 0; c < n; ++c) {
            const double hs = step_for(x(c), kFirstOrderStep);
            Vec xp = x, xm = x;
            xp(c) += hs;
            xm(c) -= hs;
            const Mat diff = (sigma(t, xp, u) - sigma(t, xm, u)) / (2.0 * hs);
            for (Eigen::Index j = 0; j < l; ++j)
                out[static_cast<std::size_t>(j)].col(c) = diff.col(j);
        }
        return out;
    };

    d.ell_x = [ell, n](double t, const Vec& x, const Vec& u) {
        Vec g(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double hs = step_for(x(c), kFirstOrderStep);
            Vec xp = x, xm = x;
            xp(c) += hs;
            xm(c) -= hs;
            g(c) = (ell(t, xp, u) - ell(t, xm, u)) / (2.0 * hs);
        }
        return g;
    };

    // Central second differences; mixed terms via the four-point stencil.
    auto hessian_of = [n](const std::function<double(const Vec&)>& g,
                          const Vec& x) {
        Mat H(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double hi = step_for(x(i), kSecondOrderStep);
            for (Eigen::Index j = i; j < n; ++j) {
                const double hj = step_for(x(j), kSecondOrderStep);
                if (i == j) {
                    Vec xp = x, xm = x;
                    xp(i) += hi;
                    xm(i) -= hi;
                    H(i, i) = (g(xp) - 2.0 * g(x) + g(xm)) / (hi * hi);
                } else {
                    Vec xpp = x, xpm = x, xmp = x, xmm = x;
                    xpp(i) += hi;
                    xpp(j) += hj;
                    xpm(i) += hi;
                    xpm(j) -= hj;
                    xmp(i) -= hi;
                    xmp(j) += hj;
                    xmm(i) -= hi;
                    xmm(j) -= hj;
                    H(i, j) = (g(xpp) - g(xpm) - g(xmp) + g(xmm)) /
                              (4.0 * hi * hj);
                    H(j, i) = H(i, j);
                }
            }
        }
        return H;
    };

    d.f_xx = [f, n, hessian_of](double t, const Vec& x, const Vec& u) {
        MatList out;
        out.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index r = 0; r < n; ++r) {
            auto comp = [&, r](const Vec& xx) { return f(t, xx, u)(r); };
            out.push_back(hessian_of(comp, x));
        }
        return out;
    };

    d.sigma_xx = [sigma, n, l, hessian_of](double t, const Vec& x,
                                           const Vec& u) {
        MatList out;
        out.reserve(static_cast<std::size_t>(n * l));
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index j = 0; j < l; ++j) {
                auto comp = [&, r, j](const Vec& xx) {
                    return sigma(t, xx, u)(r, j);
                };
                out.push_back(hessian_of(comp, x));
            }
        }
        return out;
    };

    d.ell_xx = [ell, hessian_of](double t, const Vec& x, const Vec& u) {
        auto comp = [&](const Vec& xx) { return ell(t, xx, u); };
        return hessian_of(comp, x);
    };

    d.h_x = [h, n](const Vec& x) {
        Vec g(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double hs = step_for(x(c), kFirstOrderStep);
            Vec xp = x, xm = x;
            xp(c) += hs;
            xm(c) -= hs;
            g(c) = (h(xp) - h(xm)) / (2.0 * hs);
        }
        return g;
    };

    d.h_xx = [h, hessian_of](const Vec& x) { return hessian_of(h, x); };

    d.f_u = [f, n, m](double t, const Vec& x, const Vec& u) {
        Mat J(n, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double hs = step_for(u(c), kFirstOrderStep);
            Vec up = u, um = u;
            up(c) += hs;
            um(c) -= hs;
            J.col(c) = (f(t, x, up) - f(t, x, um)) / (2.0 * hs);
        }
        return J;
    };

    d.sigma_u = [sigma, n, m, l](double t, const Vec& x, const Vec& u) {
        MatList out(static_cast<std::size_t>(l), Mat::Zero(n, m));
        for (Eigen::Index c = 0; c < m; ++c) {
            const double hs = step_for(u(c), kFirstOrderStep);
            Vec up = u, um = u;
            up(c) += hs;
            um(c) -= hs;
            const Mat diff = (sigma(t, x, up) - sigma(t, x, um)) / (2.0 * hs);
            for (Eigen::Index j = 0; j < l; ++j)
                out[static_cast<std::size_t>(j)].col(c) = diff.col(j);
        }
        return out;
    };

    d.ell_u = [ell, m](double t, const Vec& x, const Vec& u) {
        Vec g(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double hs = step_for(u(c), kFirstOrderStep);
            Vec up = u, um = u;
            up(c) += hs;
            um(c) -= hs;
            g(c) = (ell(t, x, up) - ell(t, x, um)) / (2.0 * hs);
        }
        return g;
    };

    return d;
}

void validate_problem(const ProblemSpec& spec) {
    if (spec.dim_n == 0 || spec.dim_m == 0 || spec.dim_l == 0)
        throw std::invalid_argument("problem: dimensions must be positive");
    if (spec.a1.dim() != spec.dim_m)
        throw std::invalid_argument("problem: A1 box dimension mismatch");
    if (static_cast<std::size_t>(spec.y.size()) != spec.dim_n)
        throw std::invalid_argument("problem: initial state dimension mismatch");
    if (spec.a2_cap) {
        if (static_cast<std::size_t>(spec.a2_cap->size()) != spec.dim_m)
            throw std::invalid_argument("problem: A2 cap dimension mismatch");
        for (Eigen::Index i = 0; i < spec.a2_cap->size(); ++i)
            if (!((*spec.a2_cap)(i) >= 0.0))
                throw std::invalid_argument("problem: A2 cap must be nonnegative");
    }

    const Vec u_mid = 0.5 * (spec.a1.lo + spec.a1.hi);
    const Vec& x0 = spec.y;
    for (int i = 0; i <= 16; ++i) {
        const double t = static_cast<double>(i) / 16.0;
        const Vec kv = spec.k(t);
        if (static_cast<std::size_t>(kv.size()) != spec.dim_m)
            throw std::invalid_argument("problem: k(t) dimension mismatch");
        for (Eigen::Index c = 0; c < kv.size(); ++c)
            if (kv(c) < 0.0)
                throw std::invalid_argument(
                    "problem: k has a negative component");
        const Mat gv = spec.G(t);
        if (gv.rows() != static_cast<Eigen::Index>(spec.dim_n) ||
            gv.cols() != static_cast<Eigen::Index>(spec.dim_m))
            throw std::invalid_argument("problem: G(t) shape mismatch");
        ensure_finite(gv, "G");
    }

    const Vec fv = spec.f(0.0, x0, u_mid);
    if (static_cast<std::size_t>(fv.size()) != spec.dim_n)
        throw std::invalid_argument("problem: drift dimension mismatch");
    const Mat sv = spec.sigma(0.0, x0, u_mid);
    if (sv.rows() != static_cast<Eigen::Index>(spec.dim_n) ||
        sv.cols() != static_cast<Eigen::Index>(spec.dim_l))
        throw std::invalid_argument("problem: diffusion shape mismatch");
    (void)spec.ell(0.0, x0, u_mid);
    (void)spec.h(x0);
}

ProblemRegistry& ProblemRegistry::instance() {
    static ProblemRegistry reg;
    static std::once_flag flag;
    std::call_once(flag, [] {
        reg.add_factory("example1",
                        [](const ProblemParams&) { return make_example1(); });
        reg.add_factory("zero", [](const ProblemParams&) {
            return make_zero_problem();
        });
        auto param_or = [](const ProblemParams& p, const std::string& key,
                           double fallback) {
            auto it = p.find(key);
            return it == p.end() ? fallback : it->second;
        };
        reg.add_factory("linear", [param_or](const ProblemParams& p) {
            return make_linear_problem(param_or(p, "a", 0.5), param_or(p, "c", 2.0),
                                       param_or(p, "sigma", 0.0),
                                       param_or(p, "y", 1.0));
        });
        reg.add_factory("linear_quad", [param_or](const ProblemParams& p) {
            return make_linear_quad_problem(
                param_or(p, "a", 0.5), param_or(p, "c", 2.0),
                param_or(p, "sigma", 0.0), param_or(p, "y", 1.0));
        });
    });
    return reg;
}

void ProblemRegistry::add_factory(const std::string& name,
                                  ProblemFactory factory) {
    if (factories_.count(name))
        throw std::invalid_argument("problem registry: duplicate name '" + name + "'");
    factories_[name] = std::move(factory);
}

void ProblemRegistry::add(const std::string& name, const ProblemSpec& spec) {
    validate_problem(spec);
    add_factory(name, [spec](const ProblemParams&) { return spec; });
}

bool ProblemRegistry::contains(const std::string& name) const {
    return factories_.count(name) > 0;
}

ProblemSpec ProblemRegistry::make(const std::string& name,
                                  const ProblemParams& params) const {
    auto it = factories_.find(name);
    if (it == factories_.end())
        throw std::invalid_argument("problem registry: unknown problem '" + name + "'");
    ProblemSpec spec = it->second(params);
    validate_problem(spec);
    return spec;
}

std::vector<std::string> ProblemRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(factories_.size());
    for (const auto& [name, _] : factories_)
        out.push_back(name);
    return out;
}

ProblemSpec make_problem(const std::string& name, const ProblemParams& params) {
    return ProblemRegistry::instance().make(name, params);
}

} // namespace nearopt
