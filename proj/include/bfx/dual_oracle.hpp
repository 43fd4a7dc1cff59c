#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bfx/space.hpp"

/**
 * Associate (Koethe dual) norms on the grid:
 *
 *   ||g||_{X'} = sup { integral(f g) : f >= 0, ||f||_X <= 1 }.
 *
 * Two independent evaluation routes are provided.
 *
 * kothe_dual_norm_reference -- exact per-family algorithms:
 *   - weighted Lebesgue: the Hölder closed form ||g/v||_{p'};
 *   - Lorentz: reduction to the decreasing cone along the order of
 *     |g|/v^p followed by pool-adjacent-violators (exact KKT solution);
 *   - variable Lebesgue: pointwise KKT profile with a scalar Lagrange
 *     multiplier located by bisection on the modular;
 *   - Morrey: a certified primal/dual convex solver for the per-cube power
 *     constraints (returns matching lower/upper brackets);
 *   - Block and admissible powers of Block: the closed-form partner space,
 *     which is grid-exact.
 *
 * kothe_dual_norm_oracle -- a family-agnostic lower bound: multiplicative
 * coordinate ascent on the ratio integral(f g)/||f||_X with multi-start.
 * The tests drive the oracle against the references.
 */
namespace bfx {

namespace detail {

/** ||g/v||_{p'} in signed-reciprocal form; handles p < 1 by concentration. */
inline double lebesgue_dual_norm(const Grid& grid, const GridFunction& g,
                                 const GridFunction& v, double rp) {
    const double rconj = conj_recip(rp);
    if (rconj >= 0.0) {
        GridFunction vinv(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) vinv[i] = 1.0 / v[i];
        return lebesgue_norm(grid, g, vinv, rconj);
    }
    // p < 1: the supremum concentrates on a single cell.
    const double m = grid.cell_measure();
    double best = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        best = std::max(best, std::fabs(g[i]) / v[i]);
    return std::pow(m, rconj) * best;
}

/**
 * Exact Lorentz associate norm, q in [1, inf).
 *
 * With c_i = m |g_i| and nu_i = m v_i^p, an optimizer can be taken
 * non-increasing along the order of c_i/nu_i.  On that cone the norm is
 * ||f||^q = sum_k a_k^q w_k with w_k = (p/q)(B_k^{q/p} - B_{k-1}^{q/p}),
 * B_k the nu-prefix sums, so the problem is a clean convex program whose
 * KKT solution is the pool-adjacent-violators fit of (c_k/w_k)^{1/(q-1)}.
 */
inline double lorentz_dual_norm(const Grid& grid, const GridFunction& g,
                                const GridFunction& v, double rp, double rq) {
    if (!(rq > 0.0 && rq <= 1.0))
        throw std::invalid_argument("lorentz_dual_norm: needs q in [1,inf)");
    const double p = 1.0 / rp, q = 1.0 / rq;
    const double m = grid.cell_measure();
    struct Atom {
        double c, nu;
    };
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] != 0.0) atoms.push_back({m * std::fabs(g[i]), m * std::pow(v[i], p)});
    if (atoms.empty()) return 0.0;
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.c * b.nu > b.c * a.nu; });

    const std::size_t K = atoms.size();
    std::vector<double> w(K), c(K);
    double B = 0.0, Bpow_prev = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        c[k] = atoms[k].c;
        B += atoms[k].nu;
        const double Bpow = std::pow(B, q / p);
        w[k] = (p / q) * (Bpow - Bpow_prev);
        Bpow_prev = Bpow;
    }

    if (q == 1.0) {
        // Linear norm on the cone: the extreme rays are prefix indicators.
        double best = 0.0, C = 0.0, W = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            C += c[k];
            W += w[k];
            best = std::max(best, C / W);
        }
        return best;
    }

    // Pool adjacent violators over blocks with value (C/W)^{1/(q-1)}.
    struct Blk {
        double C, W;
    };
    std::vector<Blk> stack;
    stack.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        stack.push_back({c[k], w[k]});
        while (stack.size() >= 2) {
            const Blk& top = stack[stack.size() - 1];
            const Blk& below = stack[stack.size() - 2];
            if (top.C * below.W >= below.C * top.W) {  // value(top) >= value(below)
                Blk merged{below.C + top.C, below.W + top.W};
                stack.pop_back();
                stack.back() = merged;
            } else {
                break;
            }
        }
    }
    // Ratio is scale invariant; compute block values in logs for safety.
    double lt_max = -kInf;
    std::vector<double> lt(stack.size());
    for (std::size_t b = 0; b < stack.size(); ++b) {
        lt[b] = std::log(stack[b].C / stack[b].W) / (q - 1.0);
        lt_max = std::max(lt_max, lt[b]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < stack.size(); ++b) {
        const double t = std::exp(lt[b] - lt_max);
        num += stack[b].C * t;
        den += stack[b].W * std::pow(t, q);
    }
    return num / std::pow(den, rq);
}

/**
 * Exact variable-exponent associate norm, p(.) in (1, inf) cellwise.
 * KKT: f_c = (|g_c| / (mu p_c v_c^{p_c}))^{1/(p_c-1)}; the multiplier mu is
 * pinned by modular(f) = 1 (strictly decreasing in mu), found by bisection.
 */
inline double variable_dual_norm(const Grid& grid, const GridFunction& g,
                                 const GridFunction& v, const std::vector<double>& rpc) {
    for (double r : rpc)
        if (!(r > 0.0 && r < 1.0))
            throw std::invalid_argument("variable_dual_norm: needs p(.) in (1,inf)");
    const double m = grid.cell_measure();
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] != 0.0) act.push_back(i);
    if (act.empty()) return 0.0;

    std::vector<double> lognum(act.size()), pm1(act.size()), pc(act.size()), logv(act.size());
    for (std::size_t k = 0; k < act.size(); ++k) {
        const std::size_t i = act[k];
        pc[k] = 1.0 / rpc[i];
        pm1[k] = pc[k] - 1.0;
        logv[k] = std::log(v[i]);
        lognum[k] = std::log(std::fabs(g[i])) - std::log(pc[k]) - pc[k] * logv[k];
    }
    auto modular = [&](double logmu) {
        double acc = 0.0;
        for (std::size_t k = 0; k < act.size(); ++k) {
            const double lf = (lognum[k] - logmu) / pm1[k];
            const double arg = std::clamp(pc[k] * (lf + logv[k]), -700.0, 700.0);
            acc += m * std::exp(arg);
        }
        return acc;
    };
    double lo = 0.0, hi = 0.0;
    if (modular(0.0) > 1.0) {
        hi = 2.0;
        while (modular(hi) > 1.0 && hi < 1e6) hi *= 2.0;
    } else {
        lo = -2.0;
        while (modular(lo) <= 1.0 && lo > -1e6) lo *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (modular(mid) > 1.0 ? lo : hi) = mid;
    }
    const double logmu = 0.5 * (lo + hi);
    double val = 0.0;
    for (std::size_t k = 0; k < act.size(); ++k) {
        const double lf = (lognum[k] - logmu) / pm1[k];
        val += m * std::exp(lf) * std::fabs(g[act[k]]);
    }
    return val;
}

}  // namespace detail

/**
 * Certified solution of the Morrey associate-norm program
 *
 *   maximize  sum_i c_i f_i,  c_i = m |g_i|,
 *   s.t.      A_Q(f) := sum_{i in Q} m (f_i v_i)^p <= t_Q := |Q|^{1 - p/q}
 *
 * for every cube Q of the basis (this is exactly ||f||_Morrey <= 1).
 * Lagrangian dual: with S_i = sum_{Q ni i} mu_Q,
 *   f*_i = (c_i / (p m v_i^p S_i))^{1/(p-1)},
 *   D(mu) = sum_Q mu_Q t_Q + (1/p') sum_i c_i f*_i  >=  optimum,
 * and f* / max_Q (A_Q/t_Q)^{1/p} is feasible, so primal and dual bracket the
 * value.  D is convex and smooth on mu >= 0, so it is minimized by exact
 * cyclic coordinate descent: dD/dmu_Q = t_Q - A_Q(f*(mu)) is increasing in
 * mu_Q, and the per-cube minimizer (the root of A_Q = t_Q, or 0 if already
 * slack) is located by bracketed bisection.  Coordinate descent alone can
 * zigzag between overlapping cubes (sublinear tail when p is close to 1), so
 * each sweep is followed by a damped Newton step on the supported
 * multipliers, using the explicit Hessian
 *   H_{Q,Q'} = p/(p-1) * sum_{i in Q cap Q'} m v_i^p f*_i^p / S_i,
 * accepted only when it decreases D.  `max_iter` counts sweeps.
 */
struct MorreyDualCertificate {
    double primal = 0.0;  // best feasible value: valid lower bound
    double dual = kInf;   // best dual value: valid upper bound
    GridFunction witness; // feasible f attaining `primal`
    int iterations = 0;
    double rel_gap() const {
        if (dual <= 0.0) return 0.0;
        return (dual - primal) / std::max(dual, 1e-300);
    }
};

inline MorreyDualCertificate morrey_dual_solve(const SpaceSpec& X, const GridFunction& g,
                                               const Basis& cubes, double rel_tol = 1e-10,
                                               int max_iter = 2000) {
    if (X.family != Family::Morrey)
        throw std::invalid_argument("morrey_dual_solve: Morrey space expected");
    if (!(X.rp > 0.0 && X.rp < 1.0))
        throw std::invalid_argument("morrey_dual_solve: needs p in (1,inf)");
    detail::check_fn(X, g);
    const double p = 1.0 / X.rp;
    const double pconj_r = 1.0 - X.rp;  // 1/p'
    const double m = X.grid.cell_measure();
    const std::size_t N = X.grid.cell_count();

    std::vector<double> c(N), vp(N);
    bool any = false;
    for (std::size_t i = 0; i < N; ++i) {
        c[i] = m * std::fabs(g[i]);
        vp[i] = std::pow(X.weight[i], p);
        any = any || c[i] > 0.0;
    }
    MorreyDualCertificate cert;
    cert.witness.assign(N, 0.0);
    if (!any) {
        cert.dual = 0.0;
        return cert;
    }

    const std::size_t QN = cubes.sets.size();
    std::vector<double> t(QN);
    for (std::size_t qi = 0; qi < QN; ++qi)
        t[qi] = std::pow(cubes.sets[qi].measure, 1.0 - p * X.rq);

    std::vector<double> S(N), fstar(N), A(QN), ratio(QN);
    // Evaluates dual value / primal recovery at mu; updates the certificate.
    auto eval = [&](const std::vector<double>& mu) -> double {
        std::fill(S.begin(), S.end(), 0.0);
        for (std::size_t qi = 0; qi < QN; ++qi) {
            if (mu[qi] == 0.0) continue;
            for (auto cell : cubes.sets[qi].cells) S[cell] += mu[qi];
        }
        double cf = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (c[i] > 0.0) {
                fstar[i] = std::pow(c[i] / (p * m * vp[i] * std::max(S[i], 1e-300)),
                                    1.0 / (p - 1.0));
                cf += c[i] * fstar[i];
            } else {
                fstar[i] = 0.0;
            }
        }
        double maxratio = 0.0;
        for (std::size_t qi = 0; qi < QN; ++qi) {
            double a = 0.0;
            for (auto cell : cubes.sets[qi].cells)
                a += m * vp[cell] * std::pow(fstar[cell], p);
            A[qi] = a;
            ratio[qi] = a / t[qi];
            maxratio = std::max(maxratio, ratio[qi]);
        }
        double D = pconj_r * cf;
        for (std::size_t qi = 0; qi < QN; ++qi) D += mu[qi] * t[qi];
        if (maxratio > 0.0) {
            const double scale = std::pow(maxratio, -1.0 / p);
            const double P = cf * scale;
            if (P > cert.primal) {
                cert.primal = P;
                for (std::size_t i = 0; i < N; ++i) cert.witness[i] = fstar[i] * scale;
            }
        }
        cert.dual = std::min(cert.dual, D);
        return D;
    };

    std::vector<double> mu(QN, 1.0);
    eval(mu);
    // Calibrate the uniform start so the largest constraint ratio is ~1.
    {
        double maxratio = 0.0;
        for (std::size_t qi = 0; qi < QN; ++qi) maxratio = std::max(maxratio, ratio[qi]);
        if (maxratio > 0.0 && std::isfinite(maxratio)) {
            const double gamma = std::pow(maxratio, (p - 1.0) / p);
            for (auto& x : mu) x *= gamma;
        }
    }

    // Exact cyclic coordinate descent on D.  S is kept incrementally in sync
    // with mu; eval() rebuilds it from scratch once per sweep, which also
    // refreshes the certificate and washes out accumulated rounding.
    const double pexp = p / (p - 1.0);
    std::vector<char> live(QN, 0);
    for (std::size_t qi = 0; qi < QN; ++qi)
        for (auto cell : cubes.sets[qi].cells)
            if (c[cell] > 0.0) {
                live[qi] = 1;
                break;
            }
    // Dense Cholesky solve of H x = r (overwrites both); false on breakdown.
    auto chol_solve = [](std::vector<double>& H, std::vector<double>& r,
                         std::size_t nn) -> bool {
        for (std::size_t i = 0; i < nn; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = H[i * nn + j];
                for (std::size_t k = 0; k < j; ++k) sum -= H[i * nn + k] * H[j * nn + k];
                if (i == j) {
                    if (!(sum > 0.0) || !std::isfinite(sum)) return false;
                    H[i * nn + i] = std::sqrt(sum);
                } else {
                    H[i * nn + j] = sum / H[j * nn + j];
                }
            }
        for (std::size_t i = 0; i < nn; ++i) {
            double s = r[i];
            for (std::size_t k = 0; k < i; ++k) s -= H[i * nn + k] * r[k];
            r[i] = s / H[i * nn + i];
        }
        for (std::size_t i = nn; i-- > 0;) {
            double s = r[i];
            for (std::size_t k = i + 1; k < nn; ++k) s -= H[k * nn + i] * r[k];
            r[i] = s / H[i * nn + i];
        }
        return true;
    };

    std::vector<std::size_t> support;
    std::vector<std::vector<std::size_t>> cell_sup(N);
    std::vector<double> H, rhs, mu_try(QN);
    double D = eval(mu);
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        cert.iterations = sweep + 1;
        if (cert.rel_gap() <= rel_tol) break;
        for (std::size_t qi = 0; qi < QN; ++qi) {
            const auto& cells = cubes.sets[qi].cells;
            const double old = mu[qi];
            if (!live[qi]) {
                if (old != 0.0) {
                    for (auto cell : cells) S[cell] -= old;
                    mu[qi] = 0.0;
                }
                continue;
            }
            // A_Q as a function of this cube's own multiplier x (the other
            // multipliers' contribution S_i - old is frozen at its current
            // value); strictly decreasing in x.
            auto Aq = [&](double x) {
                double a = 0.0;
                for (auto cell : cells) {
                    if (c[cell] == 0.0) continue;
                    const double s = std::max((S[cell] - old) + x, 1e-300);
                    a += m * vp[cell] * std::pow(c[cell] / (p * m * vp[cell] * s), pexp);
                }
                return a;
            };
            double x = 0.0;
            if (!(Aq(0.0) <= t[qi])) {
                double hi = old > 0.0 ? old : 1.0;
                int guard = 0;
                while (Aq(hi) > t[qi] && ++guard < 1100) hi *= 2.0;
                double lo = 0.0;
                for (int it = 0; it < 90; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (Aq(mid) > t[qi] ? lo : hi) = mid;
                }
                x = hi;
            }
            if (x != old) {
                for (auto cell : cells) S[cell] += x - old;
                mu[qi] = x;
            }
        }
        D = eval(mu);
        if (cert.rel_gap() <= rel_tol) break;

        // Damped Newton on the near-active multipliers (fresh state from the
        // eval above).  H = B^T diag(w) B has rank at most N, so the support
        // is chosen by constraint tightness (not by mu alone) and capped.
        auto attempt_newton = [&]() -> bool {
            double mumax = 0.0;
            for (std::size_t qi = 0; qi < QN; ++qi) mumax = std::max(mumax, mu[qi]);
            support.clear();
            for (std::size_t qi = 0; qi < QN; ++qi)
                if (live[qi] &&
                    (A[qi] > t[qi] * (1.0 - 1e-6) || mu[qi] > 1e-9 * mumax))
                    support.push_back(qi);
            if (support.size() > 3 * N) {
                std::sort(support.begin(), support.end(),
                          [&](std::size_t a, std::size_t b) {
                              return A[a] / t[a] > A[b] / t[b];
                          });
                support.resize(3 * N);
            }
            const std::size_t ns = support.size();
            if (ns == 0) return false;
            for (auto& lst : cell_sup) lst.clear();
            for (std::size_t a = 0; a < ns; ++a)
                for (auto cell : cubes.sets[support[a]].cells) cell_sup[cell].push_back(a);
            H.assign(ns * ns, 0.0);
            rhs.assign(ns, 0.0);
            const double pfac = p / (p - 1.0);
            bool finite = true;
            for (std::size_t i = 0; i < N && finite; ++i) {
                if (c[i] == 0.0 || cell_sup[i].empty()) continue;
                const double w =
                    pfac * m * vp[i] * std::pow(fstar[i], p) / std::max(S[i], 1e-300);
                finite = std::isfinite(w);
                for (auto a : cell_sup[i])
                    for (auto b : cell_sup[i]) H[a * ns + b] += w;
            }
            if (!finite) return false;
            double trace = 0.0;
            for (std::size_t a = 0; a < ns; ++a) trace += H[a * ns + a];
            if (!(trace > 0.0)) return false;
            const double ridge = 1e-11 * trace / static_cast<double>(ns);
            for (std::size_t a = 0; a < ns; ++a) {
                H[a * ns + a] += ridge;
                rhs[a] = A[support[a]] - t[support[a]];
            }
            if (!chol_solve(H, rhs, ns)) return false;
            for (double alpha = 1.0; alpha >= 1e-4; alpha *= 0.5) {
                mu_try = mu;
                for (std::size_t a = 0; a < ns; ++a)
                    mu_try[support[a]] = std::max(mu[support[a]] + alpha * rhs[a], 0.0);
                const double Dtry = eval(mu_try);
                if (Dtry < D) {
                    mu.swap(mu_try);
                    D = Dtry;
                    return true;
                }
            }
            D = eval(mu);  // restore state at the current point
            return false;
        };
        for (int rep = 0; rep < 6 && cert.rel_gap() > rel_tol; ++rep)
            if (!attempt_newton()) break;
        if (cert.rel_gap() <= rel_tol) break;
    }
    return cert;
}

/** Exact associate norm ||g||_{X'} by the per-family reference algorithm. */
inline double kothe_dual_norm_reference(const SpaceSpec& X, const GridFunction& g,
                                        const Basis* cubes_hint = nullptr) {
    detail::check_fn(X, g);
    switch (X.family) {
        case Family::WeightedLebesgue:
            return detail::lebesgue_dual_norm(X.grid, g, X.weight, X.rp);
        case Family::Lorentz:
            return detail::lorentz_dual_norm(X.grid, g, X.weight, X.rp, X.rq);
        case Family::VariableLebesgue:
            return detail::variable_dual_norm(X.grid, g, X.weight, X.rp_cells);
        case Family::Morrey: {
            std::optional<Basis> local;
            const Basis* cb = cubes_hint;
            if (cb == nullptr) {
                local.emplace(cube_basis(X.grid, X.grid.n()));
                cb = &*local;
            }
            MorreyDualCertificate cert = morrey_dual_solve(X, g, *cb);
            if (cert.rel_gap() > 1e-7)
                throw std::runtime_error(
                    "kothe_dual_norm_reference: Morrey solve did not certify");
            return cert.primal;
        }
        case Family::Block:
        case Family::Concavified: {
            // Closed-form partner space (grid-exact for these families).
            SpaceSpec dual = kothe_dual_spec(X);
            return cubes_hint ? norm(dual, g, *cubes_hint) : norm(dual, g);
        }
        case Family::WeightTwisted: {
            GridFunction h(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) h[i] = g[i] / X.twist[i];
            return kothe_dual_norm_reference(X.inner(), h, cubes_hint);
        }
        case Family::Rescaled:
            return kothe_dual_norm_reference(rescaled_space(X.inner(), X.r, X.s), g,
                                             cubes_hint);
        default:
            throw std::invalid_argument("kothe_dual_norm_reference: unsupported family");
    }
}

// ---------------------------------------------------------------------------
// Family-agnostic ascent oracle
// ---------------------------------------------------------------------------

struct DualOracleConfig {
    int starts = 6;          // total start vectors (warm starts count towards it)
    int sweeps = 160;        // coordinate sweeps per start
    double step0 = 0.5;      // initial multiplicative step
    double step_min = 1e-10; // stop once the annealed step is below this
    std::uint64_t seed = 20260815ULL;
    // Seed extra starts from |g| restricted to each basis cube and scale whole
    // cubes as coordinated moves.  Helps when the norm is a sup over cubes (a
    // tight cube pins all its cells jointly); costs extra norm evaluations,
    // so callers with expensive norms (e.g. Block) may switch it off.
    bool cube_moves = true;
    std::vector<GridFunction> warm_starts;
};

struct DualOracleResult {
    double value = 0.0;
    GridFunction witness;  // normalized to ||witness||_X = 1 when value > 0
};

namespace detail {
// True when evaluating norm(X, .) requires an inner dual solve (Block norms
// are computed as certified Morrey dual norms).  The ascent oracle uses this
// to keep its stall machinery lean when every evaluation is expensive.
inline bool norm_is_solver_backed(const SpaceSpec& X) {
    switch (X.family) {
        case Family::Block: return true;
        case Family::Weak:
        case Family::Concavified:
        case Family::Rescaled:
        case Family::WeightTwisted: return norm_is_solver_backed(X.inner());
        case Family::Product: {
            for (const auto& ptr : X.inners)
                if (norm_is_solver_backed(*ptr)) return true;
            return false;
        }
        default: return false;
    }
}
}  // namespace detail

inline DualOracleResult kothe_dual_norm_oracle(const SpaceSpec& X, const GridFunction& g,
                                               DualOracleConfig cfg = {},
                                               const Basis* cubes_hint = nullptr) {
    detail::check_fn(X, g);
    const std::size_t N = g.size();
    DualOracleResult best;
    best.witness.assign(N, 0.0);
    const double m = X.grid.cell_measure();

    std::vector<std::size_t> act;
    std::vector<double> c(N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
        if (g[i] != 0.0) {
            act.push_back(i);
            c[i] = m * std::fabs(g[i]);
        }
    if (act.empty()) return best;

    if (X.family == Family::WeightedLebesgue) {
        // Hölder extremizer in closed form.
        best.value = detail::lebesgue_dual_norm(X.grid, g, X.weight, X.rp);
        GridFunction f(N, 0.0);
        if (X.rp > 0.0 && X.rp < 1.0) {
            const double pconj = 1.0 / conj_recip(X.rp);
            for (auto i : act)
                f[i] = std::pow(std::fabs(g[i]) / X.weight[i], pconj - 1.0) / X.weight[i];
        } else if (X.rp == 0.0) {  // p = inf: f = 1/v
            for (auto i : act) f[i] = 1.0 / X.weight[i];
        } else {  // p <= 1: concentrate on the best cell
            std::size_t ibest = act[0];
            for (auto i : act)
                if (std::fabs(g[i]) / X.weight[i] > std::fabs(g[ibest]) / X.weight[ibest])
                    ibest = i;
            f[ibest] = 1.0 / X.weight[ibest];
        }
        const double nf = norm(X, f);
        if (nf > 0.0)
            for (auto& x : f) x /= nf;
        best.witness = std::move(f);
        return best;
    }

    std::optional<Basis> local;
    const Basis* cb = cubes_hint;
    if (cb == nullptr) {
        local.emplace(cube_basis(X.grid, X.grid.n()));
        cb = &*local;
    }

    auto ratio = [&](const GridFunction& f) -> double {
        double num = 0.0;
        for (auto i : act) num += c[i] * f[i];
        if (!(num > 0.0)) return 0.0;
        const double den = norm(X, f, *cb);
        return den > 0.0 ? num / den : 0.0;
    };

    const bool costly = detail::norm_is_solver_backed(X);
    if (costly) {
        cfg.sweeps = std::min(cfg.sweeps, 60);
        cfg.cube_moves = false;
    }
    const bool cube_moves = cfg.cube_moves && cb->sets.size() <= 512;

    std::vector<GridFunction> starts = cfg.warm_starts;
    auto push_profile = [&](double e) {
        GridFunction f(N, 0.0);
        for (auto i : act) f[i] = std::pow(std::fabs(g[i]), e);
        starts.push_back(std::move(f));
    };
    push_profile(1.0);
    {
        GridFunction f(N, 0.0);
        for (auto i : act) f[i] = 1.0;
        starts.push_back(std::move(f));
    }
    push_profile(0.5);
    push_profile(2.0);
    std::mt19937_64 rng(cfg.seed);
    while ((int)starts.size() < cfg.starts) {
        GridFunction f(N, 0.0);
        for (auto i : act) f[i] = std::pow(10.0, uniform(rng, -2.0, 2.0));
        starts.push_back(std::move(f));
    }
    if (cube_moves) {
        // |g| confined to a single cube, for the best-scoring few cubes.
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t qi = 0; qi < cb->sets.size(); ++qi) {
            GridFunction f(N, 0.0);
            bool hit = false;
            for (auto cell : cb->sets[qi].cells)
                if (g[cell] != 0.0) {
                    f[cell] = std::fabs(g[cell]);
                    hit = true;
                }
            if (!hit) continue;
            const double r = ratio(f);
            if (r > 0.0) scored.emplace_back(r, qi);
        }
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; k < scored.size() && k < 3; ++k) {
            GridFunction f(N, 0.0);
            for (auto cell : cb->sets[scored[k].second].cells)
                f[cell] = std::fabs(g[cell]);
            starts.push_back(std::move(f));
        }
    }

    // Supergradient start from the closed-form partner norm.  For reflexive
    // families the pairing maximizer for ||g||_{X'} is a supergradient of
    // ||.||_Y at g, where Y = kothe_dual_spec(X); estimate it by central
    // differences.  The ratio is stationary at its maximizer, so an O(h)
    // error in the start costs only O(h^2) in the achieved value, which the
    // ascent polishes further.  Families without a closed-form partner
    // (Weak, Product) simply skip this start.
    try {
        const SpaceSpec Y = kothe_dual_spec(X);
        GridFunction gp(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) gp[i] = std::fabs(g[i]);
        const double ng = norm(Y, gp, *cb);
        if (ng > 0.0 && std::isfinite(ng)) {
            const double h = 1e-6;
            GridFunction f0(N, 0.0);
            bool ok = true;
            for (std::size_t a = 0; a < act.size() && ok; ++a) {
                const std::size_t i = act[a];
                const double base = gp[i];
                gp[i] = base * (1.0 + h);
                const double np = norm(Y, gp, *cb);
                gp[i] = base * (1.0 - h);
                const double nm = norm(Y, gp, *cb);
                gp[i] = base;
                ok = std::isfinite(np) && std::isfinite(nm);
                f0[i] = std::max(0.0, (np - nm) / (2.0 * h * base * m));
            }
            if (ok && ratio(f0) > 0.0) starts.push_back(std::move(f0));
        }
    } catch (const std::exception&) {
        // No closed-form partner; generic starts only.
    }

    std::vector<double> saved;
    std::normal_distribution<double> gauss(0.0, 1.0);
    // One ascent pass.  Cheap axis moves run every sweep; the heavier moves
    // (projected-gradient tangent steps, whole-cube scalings, random oblique
    // escapes) only run once the axis moves stall at the current step size.
    auto run_ascent = [&](GridFunction& f, double cur, int max_sweeps,
                          bool random_escapes) -> double {
        double delta = cfg.step0;
        int stall_streak = 0;
        int gs_left = 4;    // gradient-sampling shots per pass
        int rand_left = 90; // random oblique escape attempts per pass
        std::vector<double> u(act.size()), s(act.size()), gdir(act.size());
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            bool improved = false;
            for (auto i : act) {
                const double old = f[i];
                for (double fac : {1.0 + delta, 1.0 / (1.0 + delta)}) {
                    f[i] = old * fac;
                    const double r2 = ratio(f);
                    if (r2 > cur * (1.0 + 1e-14)) {
                        cur = r2;
                        improved = true;
                        break;
                    }
                    f[i] = old;
                }
            }
            if (!improved && !costly && gs_left > 0 && delta <= 1e-2 &&
                act.size() <= 40) {
                --gs_left;
                // Gradient-sampling tangent move.  At a kink of the norm the
                // subdifferential has several faces; gradients of log(den)
                // estimated at random nearby points land on those faces, and
                // the min-norm point z of conv{glog - s_j} (glog the gradient
                // of log(num), all in log coordinates) yields a direction
                // that improves every sampled linearization at rate >= |z|.
                // |z| ~ 0 certifies (approximate) stationarity, which by
                // quasi-concavity of the ratio means global optimality.
                const double den0 = norm(X, f, *cb);
                double num0 = 0.0;
                for (auto i : act) num0 += c[i] * f[i];
                if (den0 > 0.0 && num0 > 0.0) {
                    const double h = 1e-6, eps = 1e-7;
                    const std::size_t K =
                        std::min<std::size_t>(2 * act.size(), 20);
                    std::vector<std::vector<double>> V;
                    V.reserve(K);
                    saved.assign(f.begin(), f.end());
                    for (std::size_t j = 0; j < K; ++j) {
                        if (j > 0) {
                            for (auto& x : u) x = gauss(rng);
                            for (std::size_t a = 0; a < act.size(); ++a)
                                f[act[a]] = saved[act[a]] * std::exp(eps * u[a]);
                        }
                        std::vector<double> v(act.size());
                        bool ok = true;
                        for (std::size_t a = 0; a < act.size() && ok; ++a) {
                            const std::size_t i = act[a];
                            const double old = f[i];
                            f[i] = old * (1.0 + h);
                            const double dp = norm(X, f, *cb);
                            f[i] = old * (1.0 - h);
                            const double dm = norm(X, f, *cb);
                            f[i] = old;
                            ok = dp > 0.0 && dm > 0.0;
                            if (ok)
                                v[a] = c[i] * f[i] / num0 -
                                       std::log(dp / dm) / (2.0 * h);
                        }
                        if (ok) V.push_back(std::move(v));
                        for (auto i : act) f[i] = saved[i];
                    }
                    if (!V.empty()) {
                        // Min-norm point of conv(V) by Frank-Wolfe.
                        std::vector<double> z = V[0];
                        for (int it = 0; it < 360; ++it) {
                            double zz = 0.0;
                            for (double x : z) zz += x * x;
                            if (!(zz > 0.0)) break;
                            std::size_t jb = 0;
                            double db = kInf;
                            for (std::size_t j = 0; j < V.size(); ++j) {
                                double d = 0.0;
                                for (std::size_t a = 0; a < z.size(); ++a)
                                    d += z[a] * V[j][a];
                                if (d < db) {
                                    db = d;
                                    jb = j;
                                }
                            }
                            if (db >= zz * (1.0 - 1e-12)) break;
                            double num_g = 0.0, den_g = 0.0;
                            for (std::size_t a = 0; a < z.size(); ++a) {
                                const double w = z[a] - V[jb][a];
                                num_g += z[a] * w;
                                den_g += w * w;
                            }
                            if (!(den_g > 0.0)) break;
                            const double gam =
                                std::clamp(num_g / den_g, 0.0, 1.0);
                            for (std::size_t a = 0; a < z.size(); ++a)
                                z[a] = (1.0 - gam) * z[a] + gam * V[jb][a];
                            if (gam >= 1.0) break;
                        }
                        double unorm = 0.0;
                        for (double x : z) unorm = std::max(unorm, std::fabs(x));
                        if (unorm > 1e-12) {
                            double step = delta / unorm;
                            for (int grow = 0; grow < 40; ++grow) {
                                for (std::size_t a = 0; a < act.size(); ++a)
                                    f[act[a]] =
                                        saved[act[a]] * std::exp(step * z[a]);
                                const double r2 = ratio(f);
                                if (r2 > cur * (1.0 + 1e-14)) {
                                    cur = r2;
                                    improved = true;
                                    saved.assign(f.begin(), f.end());
                                    step *= 2.0;
                                } else {
                                    for (auto i : act) f[i] = saved[i];
                                    if (improved) break;
                                    step *= 0.25;
                                    if (step < 1e-13 / unorm) break;
                                }
                            }
                        }
                    }
                }
            }
            if (!improved && cube_moves) {
                // Coordinated scaling of all cells of one cube.
                for (const auto& set : cb->sets) {
                    for (double fac : {1.0 + delta, 1.0 / (1.0 + delta)}) {
                        saved.clear();
                        for (auto cell : set.cells) {
                            saved.push_back(f[cell]);
                            f[cell] *= fac;
                        }
                        const double r2 = ratio(f);
                        if (r2 > cur * (1.0 + 1e-14)) {
                            cur = r2;
                            improved = true;
                            break;
                        }
                        for (std::size_t k = 0; k < set.cells.size(); ++k)
                            f[set.cells[k]] = saved[k];
                    }
                    if (improved) break;
                }
            }
            if (!improved && random_escapes && !costly && rand_left > 0 &&
                delta >= 1e-4) {
                // The ratio is quasi-concave (its superlevel sets are convex),
                // so any non-optimal point has an improving direction; all the
                // deterministic moves can fail together at a kink of the norm,
                // whereas random oblique directions escape with positive
                // probability.
                saved.assign(f.begin(), f.end());
                for (int attempt = 0; attempt < 30 && !improved && rand_left > 0;
                     ++attempt) {
                    --rand_left;
                    for (auto& x : u) x = gauss(rng);
                    for (int dir = 0; dir < 2 && !improved; ++dir) {
                        const double sgn = dir == 0 ? delta : -delta;
                        for (std::size_t a = 0; a < act.size(); ++a)
                            f[act[a]] = saved[act[a]] * std::exp(sgn * u[a]);
                        const double r2 = ratio(f);
                        if (r2 > cur * (1.0 + 1e-14)) {
                            cur = r2;
                            improved = true;
                        }
                    }
                    if (!improved)
                        for (auto i : act) f[i] = saved[i];
                }
            }
            if (!improved) {
                delta *= 0.5;
                if (delta < cfg.step_min) break;
                if (++stall_streak >= 14) break;
            } else {
                stall_streak = 0;
            }
        }
        return cur;
    };

    // Ascend each start, keeping a pool of witnesses normalized to unit norm.
    struct Cand {
        double val;
        GridFunction f;
    };
    std::vector<Cand> pool;
    for (auto& f : starts) {
        if (f.size() != N) continue;
        double cur = ratio(f);
        if (!(cur > 0.0)) continue;
        cur = run_ascent(f, cur, cfg.sweeps, false);
        const double den = norm(X, f, *cb);
        if (den > 0.0) {
            for (auto& x : f) x /= den;
            pool.push_back({cur, std::move(f)});
        }
    }
    // Consensus rounds: the ratio is quasi-concave, so averaging two distinct
    // unit-norm witnesses keeps the pairing while the norm of the average
    // drops strictly below 1 whenever their tight-constraint patterns differ.
    // Mixtures therefore jump into the interior of the superlevel set, past
    // kinks where local moves stall.
    auto by_val = [](const Cand& a, const Cand& b) { return a.val > b.val; };
    std::sort(pool.begin(), pool.end(), by_val);
    if (pool.size() > 4) pool.resize(4);
    for (int round = 0; round < 5 && pool.size() >= 2; ++round) {
        const std::size_t round_size = pool.size();
        std::vector<Cand> added;
        for (std::size_t k = 1; k < round_size; ++k) {
            GridFunction mid(N, 0.0);
            for (auto i : act) mid[i] = 0.5 * (pool[0].f[i] + pool[k].f[i]);
            double v = ratio(mid);
            if (!(v > 0.0)) continue;
            v = run_ascent(mid, v, cfg.sweeps / 2 + 1, false);
            if (v > pool[0].val * (1.0 + 1e-15)) {
                const double den = norm(X, mid, *cb);
                if (den > 0.0) {
                    for (auto& x : mid) x /= den;
                    added.push_back({v, std::move(mid)});
                }
            }
        }
        if (added.empty()) break;
        for (auto& cand : added) pool.push_back(std::move(cand));
        std::sort(pool.begin(), pool.end(), by_val);
        if (pool.size() > 4) pool.resize(4);
    }
    // Final polish of the leader, now with random kink escapes enabled.
    if (!pool.empty()) {
        GridFunction f = pool[0].f;
        const double v = run_ascent(f, pool[0].val, cfg.sweeps, true);
        if (v > pool[0].val) pool[0] = {v, std::move(f)};
    }
    if (!pool.empty() && pool[0].val > best.value) {
        best.value = pool[0].val;
        best.witness = pool[0].f;
    }
    const double nw = norm(X, best.witness, *cb);
    if (nw > 0.0)
        for (auto& x : best.witness) x /= nw;
    return best;
}

}  // namespace bfx
