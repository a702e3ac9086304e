#include "nearopt/runconfig.hpp"

#include "nearopt/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nearopt {
namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep))
        out.push_back(trim(item));
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config: invalid number for " + what +
                                    ": '" + s + "'");
    }
}

std::uint64_t to_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config: invalid integer for " + what +
                                    ": '" + s + "'");
    }
}

bool to_bool(const std::string& s, const std::string& what) {
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    throw std::invalid_argument("config: invalid boolean for " + what + ": '" +
                                s + "'");
}

} // namespace

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os << "alpha=" << Report::format_double(alpha) << "\n"
       << "antithetic=" << (antithetic ? "true" : "false") << "\n"
       << "backend=" << backend << "\n"
       << "beta=" << Report::format_double(beta) << "\n"
       << "bigc=" << Report::format_double(big_c) << "\n"
       << "command=" << command << "\n"
       << "control=" << control << "\n"
       << "degree=" << degree << "\n"
       << "delta=" << Report::format_double(delta) << "\n"
       << "epsilon=" << Report::format_double(epsilon) << "\n"
       << "eta=" << eta << "\n"
       << "family=" << family << "\n"
       << "grid.s=" << Report::format_double(grid_s) << "\n"
       << "grid.T=" << Report::format_double(grid_t) << "\n"
       << "paths=" << paths << "\n"
       << "problem=" << problem << "\n"
       << "problem_params=" << problem_params << "\n"
       << "ridge=" << Report::format_double(ridge) << "\n"
       << "seed=" << seed << "\n"
       << "steps=" << steps << "\n"
       << "strict=" << (strict ? "true" : "false") << "\n"
       << "ugrid=" << ugrid << "\n";
    return os.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open file '" + path + "'");

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos)
            line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' at line " +
                                        std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "command")
            cfg.command = value;
        else if (key == "problem")
            cfg.problem = value;
        else if (key == "problem_params")
            cfg.problem_params = value;
        else if (key == "grid.s")
            cfg.grid_s = to_double(value, key);
        else if (key == "grid.T")
            cfg.grid_t = to_double(value, key);
        else if (key == "steps")
            cfg.steps = static_cast<std::size_t>(to_u64(value, key));
        else if (key == "paths")
            cfg.paths = static_cast<std::size_t>(to_u64(value, key));
        else if (key == "seed")
            cfg.seed = to_u64(value, key);
        else if (key == "antithetic")
            cfg.antithetic = to_bool(value, key);
        else if (key == "epsilon")
            cfg.epsilon = to_double(value, key);
        else if (key == "delta")
            cfg.delta = to_double(value, key);
        else if (key == "bigc")
            cfg.big_c = to_double(value, key);
        else if (key == "ugrid")
            cfg.ugrid = static_cast<std::size_t>(to_u64(value, key));
        else if (key == "control")
            cfg.control = value;
        else if (key == "eta")
            cfg.eta = value;
        else if (key == "family")
            cfg.family = value;
        else if (key == "backend")
            cfg.backend = value;
        else if (key == "degree")
            cfg.degree = static_cast<int>(to_u64(value, key));
        else if (key == "ridge")
            cfg.ridge = to_double(value, key);
        else if (key == "alpha")
            cfg.alpha = to_double(value, key);
        else if (key == "beta")
            cfg.beta = to_double(value, key);
        else if (key == "out")
            cfg.out = value;
        else if (key == "dump_paths")
            cfg.dump_paths = value;
        else if (key == "strict")
            cfg.strict = to_bool(value, key);
        else
            throw std::invalid_argument("config: unknown key '" + key +
                                        "' at line " + std::to_string(lineno));
    }
}

RegularControl parse_control_spec(const std::string& spec,
                                  const ProblemSpec& problem,
                                  const TimeGrid& grid, std::size_t n_paths,
                                  double epsilon) {
    const auto m = static_cast<Eigen::Index>(problem.dim_m);
    if (spec.empty() || spec == "ueps") {
        if (epsilon < 0.0)
            throw std::invalid_argument("control spec: ueps needs epsilon >= 0");
        const Vec v = Vec::Constant(m, 1.0 - std::sqrt(epsilon));
        return RegularControl::constant(grid, n_paths, v, problem.a1);
    }
    if (spec == "zero")
        return RegularControl::constant(grid, n_paths, Vec::Zero(m),
                                        problem.a1);
    if (spec.rfind("const:", 0) == 0) {
        const auto parts = split(spec.substr(6), '|');
        if (parts.empty())
            throw std::invalid_argument("control spec: const needs a value");
        Vec v(m);
        if (parts.size() == 1) {
            v.setConstant(to_double(parts[0], "control value"));
        } else if (parts.size() == problem.dim_m) {
            for (std::size_t c = 0; c < parts.size(); ++c)
                v(static_cast<Eigen::Index>(c)) =
                    to_double(parts[c], "control value");
        } else {
            throw std::invalid_argument("control spec: component count mismatch");
        }
        return RegularControl::constant(grid, n_paths, v, problem.a1);
    }
    throw std::invalid_argument("control spec: unknown control '" + spec + "'");
}

SingularControl parse_eta_spec(const std::string& spec,
                               const ProblemSpec& problem,
                               const TimeGrid& grid, std::size_t n_paths) {
    const auto m = static_cast<Eigen::Index>(problem.dim_m);
    if (spec.empty() || spec == "zero")
        return SingularControl::zero(grid, n_paths, problem.dim_m);

    auto parse_kv = [&](const std::string& body) {
        std::map<std::string, double> kv;
        for (const std::string& item : split(body, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("eta spec: expected key=value in '" +
                                            item + "'");
            kv[trim(item.substr(0, eq))] =
                to_double(trim(item.substr(eq + 1)), "eta parameter");
        }
        return kv;
    };

    if (spec.rfind("atom:", 0) == 0) {
        const auto kv = parse_kv(spec.substr(5));
        const double t0 = kv.count("t") ? kv.at("t") : grid.start;
        const double mass = kv.count("mass") ? kv.at("mass") : 1.0;
        return SingularControl::atom(grid, n_paths, Vec::Constant(m, mass), t0);
    }
    if (spec.rfind("ramp:", 0) == 0) {
        const auto kv = parse_kv(spec.substr(5));
        const double mass = kv.count("mass") ? kv.at("mass") : 1.0;
        return SingularControl::ramp(grid, n_paths, Vec::Constant(m, mass));
    }
    throw std::invalid_argument("eta spec: unknown control '" + spec + "'");
}

std::vector<double> parse_family_spec(const std::string& spec) {
    std::vector<double> out;
    for (const std::string& item : split(spec, ',')) {
        if (item.empty())
            continue;
        out.push_back(to_double(item, "family value"));
    }
    return out;
}

ProblemParams parse_problem_params(const std::string& spec) {
    ProblemParams params;
    if (trim(spec).empty())
        return params;
    for (const std::string& item : split(spec, ',')) {
        if (item.empty())
            continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(
                "problem params: expected key=value in '" + item + "'");
        params[trim(item.substr(0, eq))] =
            to_double(trim(item.substr(eq + 1)), "problem parameter");
    }
    return params;
}

} // namespace nearopt
