#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * Core numeric conventions shared by the whole library.
 *
 * Exponents are carried as *signed reciprocals*: an exponent p in (0,inf]
 * is represented by rho = 1/p in [0,inf), with rho = 0 meaning p = inf.
 * Negative reciprocals are admitted where the formulas produce them
 * (harmonic-type means of strictly positive data).  Working with 1/p keeps
 * every exponent identity in the library a plain affine computation and
 * makes the p = inf endpoint a regular value instead of a special case.
 */
namespace bfx {

constexpr double kInf = std::numeric_limits<double>::infinity();

/** 1/p for p in (0,inf]; p=inf maps to 0. */
inline double recip(double p) {
    if (p == kInf) return 0.0;
    if (!(p > 0.0)) throw std::invalid_argument("recip: exponent must be positive");
    return 1.0 / p;
}

/** p from 1/p; rho=0 maps to inf. */
inline double from_recip(double rho) {
    if (rho == 0.0) return kInf;
    return 1.0 / rho;
}

/** Reciprocal of the Hölder conjugate: 1/p' = 1 - 1/p. */
inline double conj_recip(double rho) { return 1.0 - rho; }

/** Relative error |a-b| / max(|a|,|b|,floor). */
inline double rel_err(double a, double b, double floor_ = 1e-300) {
    double denom = std::max({std::fabs(a), std::fabs(b), floor_});
    return std::fabs(a - b) / denom;
}

/**
 * Power mean of the values {f[c] : c in cells} with reciprocal exponent rho,
 * all cells carrying equal measure:
 *
 *   rho > 0 :  ( (1/|E|) sum |f_c|^{1/rho} )^{rho}
 *   rho = 0 :  max |f_c|                      (essential supremum)
 *   rho < 0 :  harmonic-type mean of strictly positive data; any zero value
 *              collapses the mean to 0.
 *
 * This is the cell-average <f>_{p,E} of the piecewise-constant model; cell
 * measures cancel because the grid is uniform.
 */
inline double power_mean(const std::vector<double>& f,
                         const std::vector<std::uint32_t>& cells, double rho) {
    if (cells.empty()) throw std::invalid_argument("power_mean: empty cell set");
    if (rho == 0.0) {
        double m = 0.0;
        for (auto c : cells) m = std::max(m, std::fabs(f[c]));
        return m;
    }
    double p = 1.0 / rho;
    if (rho < 0.0) {
        // Negative exponent: zeros dominate and force the mean to zero.
        for (auto c : cells)
            if (f[c] == 0.0) return 0.0;
    }
    // Scale by the max to keep the powers in range.
    double top = 0.0;
    for (auto c : cells) top = std::max(top, std::fabs(f[c]));
    if (top == 0.0) return 0.0;
    double acc = 0.0;
    for (auto c : cells) acc += std::pow(std::fabs(f[c]) / top, p);
    acc /= static_cast<double>(cells.size());
    return top * std::pow(acc, rho);
}

/** Deterministic RNG for seeded test batteries. */
inline std::mt19937_64 seeded_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/** Uniform draw in [lo, hi). */
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/** Strictly positive random vector with moderate dynamic range (log-uniform). */
inline std::vector<double> random_positive(std::mt19937_64& rng, std::size_t n,
                                           double log_lo = -1.5, double log_hi = 1.5) {
    std::vector<double> v(n);
    for (auto& x : v) x = std::exp(uniform(rng, log_lo, log_hi));
    return v;
}

}  // namespace bfx
