#pragma once

/**
 * Maximal operators over a basis of sets.
 *
 * maximal            -- M_p f = sup_{E in basis, E ∋ x} <f>_{p,E}, exact.
 * maximal_localized  -- sup restricted to basis sets contained in a given set.
 * fractional_maximal -- sup_Q |Q|^{lambda/d} <f>_{1,Q} 1_Q.
 * sharp_maximal      -- sup_Q inf_c <|f - c|>_{1,Q} 1_Q (optimal c = median).
 * op_norm_estimate   -- certified lower bound for ||M_p||_{X->X} with witness.
 * self_improve_series-- the series S = sum_k M^{k+1} f / rho^k dominating
 *                       M_q f, together with the measured constant and the
 *                       A_1-candidate weight w = sum_k M^k f / K^k.
 * rescaling_check    -- ||M_q f||_X^q / ||f||_X^q versus the same ratio
 *                       transported to X^q by g = |f|^q.
 */

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "basis.hpp"
#include "space.hpp"

namespace bfx {

/** M_p f over the basis: exact pointwise max of power means. p in (0, inf]. */
inline GridFunction maximal(const GridFunction& f, const Basis& basis,
                            double p = 1.0) {
    if (!(p > 0.0)) throw std::invalid_argument("maximal: p must be positive");
    const double rho = recip(p);
    GridFunction out(f.size(), 0.0);
    for (const auto& E : basis.sets) {
        const double avg = power_mean(f, E.cells, rho);
        for (auto cell : E.cells) out[cell] = std::max(out[cell], avg);
    }
    return out;
}

/** M^E_loc f = sup over basis sets F contained in E of <f>_{1,F} 1_F. */
inline GridFunction maximal_localized(const GridFunction& f, const Basis& basis,
                                      const BasisSet& E) {
    GridFunction out(f.size(), 0.0);
    for (const auto& F : basis.sets) {
        if (!F.subset_of(E)) continue;
        const double avg = power_mean(f, F.cells, 1.0);
        for (auto cell : F.cells) out[cell] = std::max(out[cell], avg);
    }
    return out;
}

/** M_lambda f = sup_Q |Q|^{lambda/d} <f>_{1,Q} 1_Q for lambda in (0, d). */
inline GridFunction fractional_maximal(const GridFunction& f, const Basis& basis,
                                       double lambda) {
    const double d = static_cast<double>(basis.grid.dim());
    if (!(lambda > 0.0) || !(lambda < d))
        throw std::invalid_argument("fractional_maximal: lambda outside (0, d)");
    GridFunction out(f.size(), 0.0);
    for (const auto& E : basis.sets) {
        const double val =
            std::pow(E.measure, lambda / d) * power_mean(f, E.cells, 1.0);
        for (auto cell : E.cells) out[cell] = std::max(out[cell], val);
    }
    return out;
}

namespace detail {
/**
 * inf_c <|f - c|>_{1,E} on uniform cells: the optimal c is a median of the
 * cell values; evaluate the mean deviation at that median exactly.
 */
inline double median_deviation(const GridFunction& f,
                               const std::vector<std::uint32_t>& cells) {
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (auto c : cells) vals.push_back(f[c]);
    std::sort(vals.begin(), vals.end());
    const double c0 = vals[(vals.size() - 1) / 2];
    double acc = 0.0;
    for (double v : vals) acc += std::fabs(v - c0);
    return acc / static_cast<double>(vals.size());
}
}  // namespace detail

/** M^# f = sup_Q inf_c <|f - c|>_{1,Q} 1_Q, inner infimum solved exactly. */
inline GridFunction sharp_maximal(const GridFunction& f, const Basis& basis) {
    GridFunction out(f.size(), 0.0);
    for (const auto& E : basis.sets) {
        const double val = detail::median_deviation(f, E.cells);
        for (auto cell : E.cells) out[cell] = std::max(out[cell], val);
    }
    return out;
}

struct OpNormConfig {
    int starts = 50;        // random ascent restarts
    int iters = 500;        // sweeps per restart
    double step0 = 0.5;     // initial multiplicative step
    double step_min = 1e-9; // anneal floor
    double safety = 1.0;    // multiplier applied by as_K()
    std::uint64_t seed = 7040191ULL;
};

/** Lower-bound estimate for ||M_p||_{X->X}; always >= 1 (constant witness). */
struct OpNormEstimate {
    double value = 1.0;
    double safety = 1.0;
    GridFunction witness;
    double as_K() const { return value * safety; }
};

/**
 * Certified lower bound for the operator norm of M_p on X over the given
 * basis: the best ratio ||M_p f||_X / ||f||_X over (a) indicators of basis
 * sets, (b) single-cell point masses, (c) multi-start multiplicative ascent
 * with step halving.  norm_basis defaults to the maximal-operator basis and
 * is what Morrey/Block norms range over.
 */
inline OpNormEstimate op_norm_estimate(const SpaceSpec& X, const Basis& basis,
                                       double p = 1.0, OpNormConfig cfg = {},
                                       const Basis* norm_basis = nullptr) {
    const Basis& nb = norm_basis != nullptr ? *norm_basis : basis;
    const std::size_t N = X.grid.cell_count();

    auto ratio = [&](const GridFunction& f) -> double {
        const double den = norm(X, f, nb);
        if (!(den > 0.0) || !std::isfinite(den)) return 0.0;
        const double num = norm(X, maximal(f, basis, p), nb);
        return num / den;
    };

    OpNormEstimate best;
    best.safety = cfg.safety;
    best.witness.assign(N, 1.0);
    best.value = std::max(1.0, ratio(best.witness));

    auto consider = [&](const GridFunction& f) {
        const double r = ratio(f);
        if (r > best.value) {
            best.value = r;
            best.witness = f;
        }
    };

    for (const auto& E : basis.sets) {
        GridFunction f(N, 0.0);
        for (auto cell : E.cells) f[cell] = 1.0;
        consider(f);
    }
    for (std::size_t i = 0; i < N; ++i) {
        GridFunction f(N, 0.0);
        f[i] = 1.0;
        consider(f);
    }

    std::mt19937_64 rng = seeded_rng(cfg.seed);
    for (int s = 0; s < cfg.starts; ++s) {
        GridFunction f(N);
        for (auto& x : f) x = std::pow(10.0, uniform(rng, -1.5, 1.5));
        double cur = ratio(f);
        double delta = cfg.step0;
        for (int it = 0; it < cfg.iters; ++it) {
            bool improved = false;
            for (std::size_t i = 0; i < N; ++i) {
                const double old = f[i];
                for (double fac : {1.0 + delta, 1.0 / (1.0 + delta)}) {
                    f[i] = old * fac;
                    const double r = ratio(f);
                    if (r > cur * (1.0 + 1e-13)) {
                        cur = r;
                        improved = true;
                        break;
                    }
                    f[i] = old;
                }
            }
            if (!improved) {
                delta *= 0.5;
                if (delta < cfg.step_min) break;
            }
        }
        consider(f);
    }
    return best;
}

/** Result of the quantitative self-improvement construction. */
struct SelfImproveResult {
    GridFunction mqf;     // M_q f
    GridFunction series;  // S = sum_{k>=0} M^{k+1} f / rho^k
    GridFunction weight;  // w = sum_{k>=0} M^k f / K^k
    double c2_star = 0.0; // smallest C with M_q f <= C * S pointwise
    double rho = 0.0;     // series ratio C1 * q'
    double K = 0.0;       // weight series ratio
    int terms = 0;        // terms summed before the 1e-12 tail cutoff
};

/**
 * Computes S = sum_k M^{k+1} f / (C1 q')^k and w = sum_k M^k f / K^k by
 * direct summation (each term contracts in sup norm since ||Mg||_inf <=
 * ||g||_inf, so the tail is geometric); K defaults to C1 q'.  Returns the
 * measured smallest C2* with M_q f <= C2* S pointwise.
 */
inline SelfImproveResult self_improve_series(const GridFunction& f,
                                             const Basis& basis, double q,
                                             double C1, double K = 0.0) {
    if (!(q > 1.0))
        throw std::invalid_argument("self_improve_series: q must exceed 1");
    const double qconj = from_recip(conj_recip(recip(q)));
    const double rho = C1 * qconj;
    if (!(rho > 1.0))
        throw std::invalid_argument(
            "self_improve_series: C1 q' <= 1, series diverges");
    if (K == 0.0) K = rho;
    if (!(K > 1.0))
        throw std::invalid_argument("self_improve_series: K <= 1, series diverges");

    SelfImproveResult res;
    res.rho = rho;
    res.K = K;
    res.mqf = maximal(f, basis, q);

    const std::size_t N = f.size();
    GridFunction g(N);
    for (std::size_t i = 0; i < N; ++i) g[i] = std::fabs(f[i]);

    res.weight = g;          // k = 0 term of w
    res.series.assign(N, 0.0);
    double fac_s = 1.0, fac_w = 1.0;
    for (int k = 0; k < 4000; ++k) {
        g = maximal(g, basis, 1.0);  // g = M^{k+1} f
        double top_s = 0.0, top_w = 0.0, cur_s = 0.0;
        fac_w /= K;
        for (std::size_t i = 0; i < N; ++i) {
            res.series[i] += fac_s * g[i];
            res.weight[i] += fac_w * g[i];
            top_s = std::max(top_s, fac_s * g[i]);
            top_w = std::max(top_w, fac_w * g[i]);
            cur_s = std::max(cur_s, res.series[i]);
        }
        fac_s /= rho;
        res.terms = k + 1;
        if (top_s <= 1e-12 * cur_s && top_w <= 1e-12 * cur_s) break;
    }

    double c2 = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        if (res.series[i] > 0.0) c2 = std::max(c2, res.mqf[i] / res.series[i]);
    res.c2_star = c2;
    return res;
}

/** Report of the M_q <-> X^q transport identity check. */
struct RescaleReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/**
 * For each test f: ||M_q f||_X^q / ||f||_X^q must equal
 * ||M(|f|^q)||_{X^q} / ||(|f|^q)||_{X^q}; the witness is transported by
 * g = |f|^q, so the two ratios agree up to pow() roundtrip error.
 */
inline RescaleReport rescaling_check(const SpaceSpec& X, const Basis& basis,
                                     double q,
                                     const std::vector<GridFunction>& fs,
                                     const Basis* norm_basis = nullptr) {
    const Basis& nb = norm_basis != nullptr ? *norm_basis : basis;
    const SpaceSpec Xq = concavified_space(X, q);
    RescaleReport rep;
    for (const auto& f : fs) {
        const double den_a = norm(X, f, nb);
        if (!(den_a > 0.0)) continue;
        const double a =
            std::pow(norm(X, maximal(f, basis, q), nb) / den_a, q);
        GridFunction g(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            g[i] = std::pow(std::fabs(f[i]), q);
        const double den_b = norm(Xq, g, nb);
        if (!(den_b > 0.0)) continue;
        const double b = norm(Xq, maximal(g, basis, 1.0), nb) / den_b;
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err(a, b));
        ++rep.checked;
    }
    return rep;
}

}  // namespace bfx
