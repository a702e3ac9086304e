#include "nearopt/noise.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nearopt {
namespace {

// Philox4x32-10 block cipher (Salmon et al. multipliers/Weyl constants).
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
            const std::array<std::uint32_t, 4> next = {
                std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0],
                std::uint32_t(p1),
                std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
                std::uint32_t(p0),
            };
            ctr = next;
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

// Uniform in the open interval (0,1) from two 32-bit words.
double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (std::uint64_t(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

struct GaussPair {
    double z0;
    double z1;
};

GaussPair box_muller(std::uint64_t seed, std::uint64_t path,
                     std::uint64_t pair_index) {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(pair_index), std::uint32_t(pair_index >> 32),
        std::uint32_t(path), std::uint32_t(path >> 32)};
    const std::array<std::uint32_t, 2> key = {std::uint32_t(seed),
                                              std::uint32_t(seed >> 32)};
    const auto w = Philox4x32::block(ctr, key);
    const double u1 = to_unit(w[0], w[1]);
    const double u2 = to_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

} // namespace

namespace detail {

double gaussian_draw(std::uint64_t seed, std::uint64_t path,
                     std::uint64_t index) {
    const GaussPair g = box_muller(seed, path, index / 2);
    return (index % 2 == 0) ? g.z0 : g.z1;
}

} // namespace detail

NoiseEnsemble sample_noise(const TimeGrid& grid, std::size_t n_paths,
                           std::size_t dim_l, std::uint64_t seed,
                           bool antithetic) {
    if (n_paths == 0)
        throw std::invalid_argument("sample_noise: n_paths must be >= 1");
    if (dim_l == 0)
        throw std::invalid_argument("sample_noise: dim_l must be >= 1");

    NoiseEnsemble out;
    out.grid = grid;
    out.n_paths = n_paths;
    out.dim_l = dim_l;
    out.seed = seed;
    out.antithetic = antithetic;
    out.dW = PathArray(n_paths, grid.n_steps, dim_l);

    const double sqrt_dt = std::sqrt(grid.dt());
    for (std::size_t p = 0; p < n_paths; ++p) {
        // Antithetic pairing reuses the even path's draws with flipped sign.
        const std::uint64_t src = antithetic ? (p - p % 2) : p;
        const double sign = (antithetic && p % 2 == 1) ? -1.0 : 1.0;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            for (std::size_t c = 0; c < dim_l; ++c) {
                const std::uint64_t idx = i * dim_l + c;
                out.dW.at(p, i, c) =
                    sign * sqrt_dt * detail::gaussian_draw(seed, src, idx);
            }
        }
    }
    return out;
}

} // namespace nearopt
