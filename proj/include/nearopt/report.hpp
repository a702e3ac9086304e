#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nearopt {

// Structured-text run report. Line kinds:
//   param <name> <value>
//   metric <name> <value>
//   residual <name> value <v> std_error <se> threshold <thr> verdict <pass|fail|info>
//   hypothesis <name> <pass|fail>
//   note <text>
//   overall <pass|fail|hypotheses_not_met|none>
// Serialization is deterministic: identical runs produce identical bytes.
class Report {
public:
    explicit Report(std::string command) : command_(std::move(command)) {}

    void add_param(const std::string& name, const std::string& value);
    void add_param(const std::string& name, double value);
    void add_param(const std::string& name, std::uint64_t value);
    void add_metric(const std::string& name, double value);
    void add_residual(const std::string& name, double value, double std_error,
                      double threshold, const std::string& verdict);
    void add_series(const std::string& name, const std::vector<double>& values);
    void add_hypothesis(const std::string& name, bool pass);
    void add_note(const std::string& text);
    void set_overall(const std::string& verdict) { overall_ = verdict; }
    void set_hash(std::uint64_t h) { hash_ = h; }

    const std::string& overall() const { return overall_; }
    std::string serialize() const;

    static std::string format_double(double v);

private:
    std::string command_;
    std::uint64_t hash_ = 0;
    std::vector<std::string> lines_;
    std::string overall_ = "none";
};

std::uint64_t fnv1a64(const std::string& data);

} // namespace nearopt
