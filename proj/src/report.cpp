#include "nearopt/report.hpp"

#include <cstdio>
#include <sstream>

namespace nearopt {

std::string Report::format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void Report::add_param(const std::string& name, const std::string& value) {
    lines_.push_back("param " + name + " " + value);
}

void Report::add_param(const std::string& name, double value) {
    add_param(name, format_double(value));
}

void Report::add_param(const std::string& name, std::uint64_t value) {
    lines_.push_back("param " + name + " " + std::to_string(value));
}

void Report::add_metric(const std::string& name, double value) {
    lines_.push_back("metric " + name + " " + format_double(value));
}

void Report::add_residual(const std::string& name, double value,
                          double std_error, double threshold,
                          const std::string& verdict) {
    lines_.push_back("residual " + name + " value " + format_double(value) +
                     " std_error " + format_double(std_error) + " threshold " +
                     format_double(threshold) + " verdict " + verdict);
}

void Report::add_series(const std::string& name,
                        const std::vector<double>& values) {
    std::string line = "series " + name;
    for (double v : values) {
        line += " ";
        line += format_double(v);
    }
    lines_.push_back(std::move(line));
}

void Report::add_hypothesis(const std::string& name, bool pass) {
    lines_.push_back("hypothesis " + name + (pass ? " pass" : " fail"));
}

void Report::add_note(const std::string& text) {
    lines_.push_back("note " + text);
}

std::string Report::serialize() const {
    std::ostringstream os;
    os << "nearopt report v1\n";
    os << "command " << command_ << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_));
    os << "config_hash " << buf << "\n";
    for (const std::string& line : lines_)
        os << line << "\n";
    os << "overall " << overall_ << "\n";
    return os.str();
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace nearopt
