#pragma once

#include "nearopt/controls.hpp"
#include "nearopt/problem.hpp"

#include <cstdint>
#include <string>

namespace nearopt {

// One run of the tool. Flags populate this struct; entries of an optional
// config file override flags, and flags override the defaults below.
struct RunConfig {
    std::string command = "example1"; // simulate|adjoint|certify|example1|deviation
    std::string problem = "example1";
    std::string problem_params; // "a=0.5,c=2,sigma=0.4,y=1"
    double grid_s = 0.0;
    double grid_t = 1.0;
    std::size_t steps = 100;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    bool antithetic = false;
    double epsilon = 0.04;
    double delta = 1.0 / 3.0;
    double big_c = 1.0;
    std::size_t ugrid = 101;
    std::string control;                 // "const:v[|v...]" | "ueps" | "zero"
    std::string eta = "atom:t=0,mass=1"; // "zero" | "atom:t=..,mass=.." | "ramp:mass=.."
    std::string family = "0,0.5,1";      // constant-control comparison family
    std::string backend = "regression";  // regression | closed_form | both
    int degree = 2;
    double ridge = 1e-8;
    double alpha = 0.5; // deviation command
    double beta = 1.0;  // deviation command
    std::string out;        // report path; default reports/<command>-<hash>.txt
    std::string dump_paths; // CSV path prefix, empty = no dump
    bool strict = false;
    std::string config_file;

    // Canonical key=value listing; hashing it names the report file.
    std::string canonical() const;
    std::uint64_t hash() const;
};

// key = value lines, '#' comments. Unknown keys are rejected.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Control spec parsing against a problem definition.
RegularControl parse_control_spec(const std::string& spec,
                                  const ProblemSpec& problem,
                                  const TimeGrid& grid, std::size_t n_paths,
                                  double epsilon);
SingularControl parse_eta_spec(const std::string& spec,
                               const ProblemSpec& problem,
                               const TimeGrid& grid, std::size_t n_paths);
std::vector<double> parse_family_spec(const std::string& spec);
ProblemParams parse_problem_params(const std::string& spec);

} // namespace nearopt
