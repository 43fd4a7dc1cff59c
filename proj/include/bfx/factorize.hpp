#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "bfx/space.hpp"

/**
 * Pointwise multiplicative factorizations.
 *
 * product_norm / product_norm_upper: the product-space norm
 *   ||f||_{X1 * ... * Xk} = inf { prod_j ||f_j||_{X_j} : |f| = prod_j |f_j| }
 * evaluated from above by coordinate descent on the log objective (which is
 * convex in the log-splitting variables), plus a random-direction polish to
 * escape kinks of non-smooth norms.  For a Koethe dual pair (X, X') the
 * Lozanovskii lower bound ||f||_{L^1} applies and is reported alongside.
 *
 * factorize: the split X = (X_{r,s})^{1/r-1/s} * L^s.  For (variable)
 * weighted Lebesgue spaces the split is exact in closed form:
 *   k = (|f| v / ||f||_X)^{p(.)/s},  h = |f| / k,
 * which gives ||k||_{L^s} = 1 and ||h||_Y = ||f||_X identically.  Other
 * families start from that profile and run the generic descent.
 */
namespace bfx {

namespace detail {

struct SplitState {
    std::vector<GridFunction> parts;
    std::vector<double> norms;
    double objective = 0.0;  // sum of log norms
    int sweeps = 0;
};

inline SplitState product_descent(const std::vector<const SpaceSpec*>& Xs,
                                  const GridFunction& f, double tol, int max_sweeps,
                                  std::uint64_t seed,
                                  const std::vector<GridFunction>* init = nullptr) {
    const std::size_t K = Xs.size();
    if (K < 2) throw std::invalid_argument("product_descent: need >= 2 factors");
    const Grid& grid = Xs[0]->grid;
    const std::size_t N = grid.cell_count();
    Basis cubes = cube_basis(grid, grid.n());

    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < N; ++i)
        if (f[i] != 0.0) act.push_back(i);

    SplitState st;
    st.parts.assign(K, GridFunction(N, 0.0));
    st.norms.assign(K, 0.0);
    if (act.empty()) return st;

    if (init != nullptr && init->size() == K) {
        st.parts = *init;
    } else {
        for (auto i : act) {
            const double a = std::pow(std::fabs(f[i]), 1.0 / double(K));
            for (std::size_t j = 0; j < K; ++j) st.parts[j][i] = a;
        }
    }
    // Make the last part the exact complement of the others.
    auto sync_last = [&]() {
        for (auto i : act) {
            double prod = 1.0;
            for (std::size_t j = 0; j + 1 < K; ++j) prod *= st.parts[j][i];
            st.parts[K - 1][i] = std::fabs(f[i]) / prod;
        }
    };
    sync_last();

    auto full_objective = [&]() {
        st.objective = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            st.norms[j] = norm(*Xs[j], st.parts[j], cubes);
            st.objective += std::log(st.norms[j]);
        }
    };
    full_objective();

    std::mt19937_64 rng(seed);
    double delta = 0.5;
    const double accept_slack = 1e-15;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        for (std::size_t j = 0; j + 1 < K; ++j) {
            for (auto i : act) {
                const double old_j = st.parts[j][i];
                const double old_last = st.parts[K - 1][i];
                for (double fac : {1.0 + delta, 1.0 / (1.0 + delta)}) {
                    st.parts[j][i] = old_j * fac;
                    st.parts[K - 1][i] = old_last / fac;
                    const double nj = norm(*Xs[j], st.parts[j], cubes);
                    const double nl = norm(*Xs[K - 1], st.parts[K - 1], cubes);
                    const double obj2 = st.objective - std::log(st.norms[j]) -
                                        std::log(st.norms[K - 1]) + std::log(nj) +
                                        std::log(nl);
                    if (obj2 < st.objective - accept_slack) {
                        st.objective = obj2;
                        st.norms[j] = nj;
                        st.norms[K - 1] = nl;
                        improved = true;
                        break;
                    }
                    st.parts[j][i] = old_j;
                    st.parts[K - 1][i] = old_last;
                }
            }
        }
        if (!improved) {
            delta *= 0.5;
            if (delta < 1e-7) break;
        }
    }
    st.sweeps = sweep;

    // Random-direction polish: multiplicative Rademacher moves to slide off
    // kinks (max/sup structure) that can stall pure coordinate descent.
    std::vector<std::vector<double>> dir(K - 1, std::vector<double>(act.size()));
    for (int round = 0; round < 200; ++round) {
        for (auto& dj : dir)
            for (auto& x : dj) x = (rng() & 1) ? 1.0 : -1.0;
        bool accepted = false;
        for (double step : {1e-2, 1e-3, 1e-4}) {
            auto trial = st.parts;
            for (std::size_t j = 0; j + 1 < K; ++j)
                for (std::size_t a = 0; a < act.size(); ++a)
                    trial[j][act[a]] *= std::exp(step * dir[j][a]);
            for (auto i : act) {
                double prod = 1.0;
                for (std::size_t j = 0; j + 1 < K; ++j) prod *= trial[j][i];
                trial[K - 1][i] = std::fabs(f[i]) / prod;
            }
            double obj2 = 0.0;
            std::vector<double> norms2(K);
            for (std::size_t j = 0; j < K; ++j) {
                norms2[j] = norm(*Xs[j], trial[j], cubes);
                obj2 += std::log(norms2[j]);
            }
            if (obj2 < st.objective - tol * std::max(1.0, std::fabs(st.objective))) {
                st.parts = std::move(trial);
                st.norms = std::move(norms2);
                st.objective = obj2;
                accepted = true;
                break;
            }
        }
        (void)accepted;
    }
    return st;
}

}  // namespace detail

inline double product_norm_upper(const std::vector<std::shared_ptr<const SpaceSpec>>& factors,
                                 const GridFunction& f) {
    std::vector<const SpaceSpec*> xs;
    xs.reserve(factors.size());
    for (const auto& sp : factors) xs.push_back(sp.get());
    detail::SplitState st = detail::product_descent(xs, f, 1e-8, 10000, 0x9e3779b9ULL);
    double prod = 1.0;
    bool zero = true;
    for (double n : st.norms) {
        if (n > 0.0) zero = false;
        prod *= n;
    }
    return zero ? 0.0 : prod;
}

struct ProductNormResult {
    double upper = 0.0;     // descent value of inf prod ||f_j||
    double lower_l1 = 0.0;  // ||f||_{L^1}: a true lower bound for dual pairs
    std::vector<GridFunction> parts;
};

/**
 * Product norm of |f| in X1 * X2 with both bounds reported.  `lower_l1` is
 * ||f||_{L^1}, which bounds the product norm from below exactly when
 * (X1, X2) is a Koethe dual pair (the Lozanovskii setting targeted here).
 */
inline ProductNormResult product_norm(const SpaceSpec& X1, const SpaceSpec& X2,
                                      const GridFunction& f, double tol = 1e-8,
                                      int max_sweeps = 10000) {
    std::vector<const SpaceSpec*> xs{&X1, &X2};
    detail::SplitState st = detail::product_descent(xs, f, tol, max_sweeps, 0x51f15eedULL);
    ProductNormResult out;
    out.parts = st.parts;
    out.upper = (st.norms[0] > 0.0 || st.norms[1] > 0.0) ? st.norms[0] * st.norms[1] : 0.0;
    const double m = X1.grid.cell_measure();
    for (double x : f) out.lower_l1 += m * std::fabs(x);
    return out;
}

struct FactorizeResult {
    GridFunction h, k;
    double norm_h = 0.0;  // ||h|| in Y = (X_{r,s})^{1/r-1/s}
    double norm_k = 0.0;  // ||k|| in L^s
    double target = 0.0;  // ||f||_X
    double product() const { return norm_h * norm_k; }
};

/**
 * Split |f| = h k with h in Y = (X_{r,s})^{1/r-1/s} and k in L^s so that
 * ||h||_Y ||k||_{L^s} is within (1 + tol_factor) of ||f||_X.  Closed form
 * (exact) for weighted and variable Lebesgue; generic descent otherwise.
 */
inline FactorizeResult factorize(const SpaceSpec& X, double r, double s,
                                 const GridFunction& f, double tol = 1e-8,
                                 int max_sweeps = 10000) {
    const double rr = recip(r), rs = recip(s);
    if (!(rr > rs)) throw std::invalid_argument("factorize: need 1/r > 1/s");
    const double beta = rr - rs;
    const std::size_t N = X.grid.cell_count();

    SpaceSpec Z = rescaled_space(X, r, s);
    SpaceSpec Y = (beta == 1.0) ? Z : concavified_space(std::move(Z), beta);
    SpaceSpec Ls = lebesgue_space(X.grid, s);

    FactorizeResult out;
    out.h.assign(N, 0.0);
    out.k.assign(N, 0.0);
    out.target = norm(X, f);
    if (out.target == 0.0) return out;

    const bool closed_form =
        X.family == Family::WeightedLebesgue || X.family == Family::VariableLebesgue;

    // Profile k = (|f| v / ||f||)^{p(.)/s}: exact for the Lebesgue families,
    // a warm start for the rest (using the primary exponent as proxy).
    const bool has_weight = X.weight.size() == N;
    auto profile = [&](double rp_cell, std::size_t i) {
        const double vi = has_weight ? X.weight[i] : 1.0;
        const double gi = std::fabs(f[i]) * vi / out.target;
        return rs == 0.0 ? 1.0 : std::pow(gi, rs / rp_cell);
    };
    for (std::size_t i = 0; i < N; ++i) {
        if (f[i] == 0.0) continue;
        double rp_cell = X.family == Family::VariableLebesgue ? X.rp_cells[i] : X.rp;
        if (rp_cell <= 0.0) {
            if (X.family == Family::VariableLebesgue)
                throw std::invalid_argument("factorize: variable exponent must be finite");
            rp_cell = 1.0;  // wrapper families: neutral warm-start exponent
        }
        out.k[i] = profile(rp_cell, i);
        out.h[i] = std::fabs(f[i]) / out.k[i];
    }

    if (!closed_form) {
        std::vector<const SpaceSpec*> xs{&Y, &Ls};
        std::vector<GridFunction> init{out.h, out.k};
        detail::SplitState st = detail::product_descent(xs, f, tol, max_sweeps,
                                                        0xfac70713ULL, &init);
        out.h = st.parts[0];
        out.k = st.parts[1];
    }
    out.norm_h = norm(Y, out.h);
    out.norm_k = norm(Ls, out.k);
    return out;
}

}  // namespace bfx
