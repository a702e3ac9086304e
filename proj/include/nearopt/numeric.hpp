#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace nearopt {

// Fixed-shape pairwise reduction: the summation order depends only on the
// length, never on how work is scheduled, so results are bit-stable.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
    if (v.empty())
        return 0.0;
    return pairwise_sum(v) / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2)
        return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

inline double standard_error(std::span<const double> v) {
    if (v.empty())
        return 0.0;
    return sample_std(v) / std::sqrt(static_cast<double>(v.size()));
}

} // namespace nearopt
