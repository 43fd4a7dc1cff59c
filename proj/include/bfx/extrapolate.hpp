#pragma once

/**
 * Rubio de Francia iteration and certified weight construction.
 *
 * rdf_iterate    -- minimal fixed point of R = f + M_r R / (2K), computed by
 *                   a monotone clamped iteration that terminates at a machine
 *                   stationary point.  Guarantees, independent of whether K
 *                   really bounds the operator norm: R >= f bitwise, and
 *                   M_r R / (2K) <= R up to the one rounding of the division.
 * construct_ap_weight        -- w = (R1 f)^{-1/p'} (R2 g)^{1/p} from a pair
 *                   (f, g) in X x X', with the class constant certified
 *                   against 2 K1^{1/p'} K2^{1/p} and the Hoelder split
 *                   ||f||_{L^p_w} ||g||_{L^{p'}_{w^{-1}}} <= 2 ||f||_X ||g||_{X'}.
 * construct_aprs_weight      -- limited-range version: factorizes |f| = h k,
 *                   runs the two series on h^q and g^q (1/q = 1/r - 1/s), and
 *                   certifies [w]_{p,(r,s)} and the split with the constant
 *                   2^{1/r-1/s} K1^{1/r-1/p} K2^{1/p-1/s}.
 * construct_offdiag_weight   -- exponent windows translated by alpha; either
 *                   the one-weight form (requires the rescaled source and
 *                   target spaces to match) or the two-weight form with
 *                   explicit multiplication isomorphisms.
 * construct_multilinear_weights -- splits |g| into a product over the
 *                   per-coordinate dual spaces, builds one limited-range
 *                   certificate per coordinate, and checks the assembled
 *                   product inequality.
 * extrapolate_bound -- norm-transfer driver over a battery: per test function
 *                   builds the weight (dual witness from the oracle), records
 *                   the weighted hypothesis ||Tf||_{L^p_w} <= phi([w]) ||f||_{L^p_w},
 *                   and checks the unweighted conclusion against the
 *                   transferred constant 2^{1/r-1/s} phi(2^{1/r-1/s} K1^.. K2^..).
 *                   Strong, weak, vector-valued and pair modes.
 *
 * Every check in a certificate stores both sides; pass means
 * lhs <= rhs * (1 + 1e-10).  Ratio checks (isometry, exact identities) store
 * max(a,b)/min(a,b) against 1.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bfx/dual_oracle.hpp"
#include "bfx/factorize.hpp"
#include "bfx/maximal.hpp"
#include "bfx/space.hpp"
#include "bfx/weights.hpp"

namespace bfx {

// ---------------------------------------------------------------------------
// Fixed-point iteration
// ---------------------------------------------------------------------------

struct RdFConfig {
    double K = 1.0;         // norm bound fed to the series; divisor is 2K
    double tol = 1e-12;     // divergence-guard threshold on relative updates
    int max_iter = 200000;

    void validate() const {
        if (!(K > 0.5) || !std::isfinite(K))
            throw std::invalid_argument("RdFConfig: need K > 1/2 and finite");
        if (!(tol > 0.0)) throw std::invalid_argument("RdFConfig: need tol > 0");
        if (max_iter < 1) throw std::invalid_argument("RdFConfig: need max_iter >= 1");
    }
};

namespace detail {

inline GridFunction abs_vec(const GridFunction& f) {
    GridFunction out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::fabs(f[i]);
    return out;
}

inline bool any_positive(const GridFunction& f) {
    for (double x : f)
        if (x != 0.0) return true;
    return false;
}

/**
 * Minimal solution of R = f + (M_r R / m) / (2K) by monotone iteration with
 * an elementwise max clamp (the clamp only absorbs rounding; in exact
 * arithmetic the iteration is already nondecreasing).  The divisor m models
 * a positive multiplication isomorphism; empty means 1.  Termination is
 * bitwise: a pass over all cells that changes nothing proves, in float
 * arithmetic, that fl(fl(M_r R / m) / (2K)) <= R and R >= f everywhere.
 */
inline GridFunction rdf_fixed_point(const GridFunction& f, const Basis& basis,
                                    double r_exp, const RdFConfig& cfg,
                                    const GridFunction* divisor = nullptr) {
    cfg.validate();
    if (f.empty()) throw std::invalid_argument("rdf_iterate: empty input");
    for (double x : f)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw std::invalid_argument(
                "rdf_iterate: input must be nonnegative and finite");
    if (!any_positive(f))
        throw std::invalid_argument("rdf_iterate: input is identically zero");
    if (divisor != nullptr) {
        if (divisor->size() != f.size())
            throw std::invalid_argument("rdf_iterate: multiplier size mismatch");
        for (double x : *divisor)
            if (!(x > 0.0) || !std::isfinite(x))
                throw std::invalid_argument(
                    "rdf_iterate: multiplier must be positive and finite");
    }

    const double twoK = 2.0 * cfg.K;
    GridFunction R = f;
    double worst = 0.0;
    for (int it = 0; it < cfg.max_iter; ++it) {
        const GridFunction mr = maximal(R, basis, r_exp);
        bool changed = false;
        worst = 0.0;
        for (std::size_t i = 0; i < R.size(); ++i) {
            double step = mr[i];
            if (divisor != nullptr) step /= (*divisor)[i];
            const double cand = f[i] + step / twoK;
            if (cand > R[i]) {
                worst = std::max(worst, (cand - R[i]) / cand);
                R[i] = cand;
                changed = true;
            }
            if (!std::isfinite(R[i]) || R[i] > 1e290)
                throw std::runtime_error(
                    "rdf_iterate: series diverges (K below the operator norm "
                    "of the twisted maximal operator)");
        }
        if (!changed) return R;
    }
    std::ostringstream os;
    os << "rdf_iterate: no machine fixed point within " << cfg.max_iter
       << " iterations (last relative update " << worst << ")";
    throw std::runtime_error(os.str());
}

}  // namespace detail

/** Fixed point R = f + M_{r_exp} R / (2K); pre: f >= 0 nonzero, K > 1/2. */
inline GridFunction rdf_iterate(const GridFunction& f, const Basis& basis,
                                double r_exp, double K) {
    RdFConfig cfg;
    cfg.K = K;
    return detail::rdf_fixed_point(f, basis, r_exp, cfg);
}

inline GridFunction rdf_iterate(const GridFunction& f, const Basis& basis,
                                double r_exp, const RdFConfig& cfg) {
    return detail::rdf_fixed_point(f, basis, r_exp, cfg);
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

struct CheckedInequality {
    std::string label;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

/** pass means lhs <= rhs * (1 + 1e-10), both sides finite. */
inline CheckedInequality make_check(std::string label, double lhs, double rhs) {
    CheckedInequality c{std::move(label), lhs, rhs, false};
    c.pass = std::isfinite(lhs) && std::isfinite(rhs) && lhs <= rhs * (1.0 + 1e-10);
    return c;
}

/** Equality up to 1e-10: stores max(a,b)/min(a,b) against 1. */
inline CheckedInequality make_ratio_check(std::string label, double a, double b) {
    double lo = std::min(a, b), hi = std::max(a, b);
    double ratio = (lo > 0.0) ? hi / lo : kInf;
    return make_check(std::move(label), ratio, 1.0);
}

struct WeightCertificate {
    GridFunction w;        // constructed weight (input side)
    GridFunction w2;       // output-side weight when the two differ (else empty)
    double p = 0.0;        // parameter record, plain exponents
    double r = 1.0;
    double s = kInf;
    OffDiagParams params;  // populated when offdiag is set
    bool offdiag = false;
    double K1 = 0.0, K2 = 0.0;
    GridFunction R1, R2;   // series fixed points (empty when a side is skipped)
    std::vector<CheckedInequality> checks;

    bool all_pass() const {
        if (checks.empty()) return false;
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    const CheckedInequality& check(const std::string& label) const {
        for (const auto& c : checks)
            if (c.label == label) return c;
        throw std::out_of_range("WeightCertificate: no check labeled '" + label + "'");
    }

    const GridFunction& output_weight() const { return w2.empty() ? w : w2; }
};

namespace detail {

/** ||g|| in [(X^r)']^{1/r} via the exact associate norm of X^r. */
inline double dual_power_norm(const SpaceSpec& X, double r, const GridFunction& g,
                              const Basis* cubes = nullptr) {
    if (r == 1.0) return kothe_dual_norm_reference(X, g, cubes);
    SpaceSpec Xr = power_space(X, r);
    return std::pow(kothe_dual_norm_reference(Xr, pow_vec(abs_vec(g), r), cubes),
                    1.0 / r);
}

/** max_i M R_i / (m_i R_i): the series bound measured against the divisor. */
inline double twisted_a1_constant(const GridFunction& R, const Basis& basis,
                                  const GridFunction* divisor) {
    const GridFunction mr = maximal(R, basis, 1.0);
    double best = 0.0;
    for (std::size_t i = 0; i < R.size(); ++i) {
        double denom = R[i];
        if (divisor != nullptr) denom *= (*divisor)[i];
        best = std::max(best, mr[i] / denom);
    }
    return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weight constructions
// ---------------------------------------------------------------------------

/**
 * Weight for a pair (f, g) in X x X' at exponent p in [1, inf]:
 * w = (R1 |f|)^{-1/p'} (R2 |g|)^{1/p}, R1 skipped at p = 1, R2 at p = inf.
 * Checks: the two series bounds, the class constant against
 * 2 K1^{1/p'} K2^{1/p} (and against the endpoint interpolation implied by the
 * series bounds), and the Hoelder split against 2 ||f||_X ||g||_{X'}.
 */
inline WeightCertificate construct_ap_weight(const GridFunction& f,
                                             const GridFunction& g,
                                             const SpaceSpec& X, double p,
                                             double K1, double K2,
                                             const Basis& basis) {
    const double pa = recip(p);
    if (pa > 1.0)
        throw std::invalid_argument("construct_ap_weight: need p in [1, inf]");
    detail::check_fn(X, f);
    detail::check_fn(X, g);
    const GridFunction af = detail::abs_vec(f);
    const GridFunction ag = detail::abs_vec(g);
    if (!detail::any_positive(af) || !detail::any_positive(ag))
        throw std::invalid_argument("construct_ap_weight: zero input");

    const double pca = conj_recip(pa);  // 1/p'
    const bool need1 = pa != 1.0;       // p != 1
    const bool need2 = pa != 0.0;       // p != inf

    WeightCertificate cert;
    cert.p = p;
    cert.r = 1.0;
    cert.s = kInf;
    cert.K1 = K1;
    cert.K2 = K2;
    if (need1) {
        RdFConfig cfg;
        cfg.K = K1;
        cert.R1 = detail::rdf_fixed_point(af, basis, 1.0, cfg);
    }
    if (need2) {
        RdFConfig cfg;
        cfg.K = K2;
        cert.R2 = detail::rdf_fixed_point(ag, basis, 1.0, cfg);
    }

    cert.w.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double val = 1.0;
        if (need1) val *= std::pow(cert.R1[i], -pca);
        if (need2) val *= std::pow(cert.R2[i], pa);
        cert.w[i] = val;
    }

    if (need1)
        cert.checks.push_back(make_check("series-a1-left",
                                         a1_constant(cert.R1, basis), 2.0 * K1));
    if (need2)
        cert.checks.push_back(make_check("series-a1-right",
                                         a1_constant(cert.R2, basis), 2.0 * K2));

    const double apc = aprs_constant_recip(cert.w, pa, 1.0, 0.0, basis);
    cert.checks.push_back(make_check(
        "class-bound", apc, 2.0 * std::pow(K1, pca) * std::pow(K2, pa)));
    if (need1 && need2) {
        // The class bound is already implied by the two series bounds through
        // endpoint interpolation; record that implication as its own check.
        InterpolatedWeight iw = interpolate_weights(
            cert.R2, detail::inverted(cert.R1), p, 1.0, kInf, basis);
        cert.checks.push_back(make_check("interpolation-bound", apc, iw.bound));
    }

    const SpaceSpec Lpw = lebesgue_space(X.grid, p, cert.w);
    const SpaceSpec Lpdw =
        lebesgue_space(X.grid, from_recip(pca), detail::inverted(cert.w));
    const double lhs = norm(Lpw, af) * norm(Lpdw, ag);
    const double rhs = 2.0 * norm(X, af) * kothe_dual_norm_reference(X, ag);
    cert.checks.push_back(make_check("holder-split", lhs, rhs));
    return cert;
}

/**
 * Limited-range weight for (f, g) with X r-convex and s-concave, p in [r, s]:
 * |f| = h k, then w = (R1 h^q)^{-(1/r-1/p)} (R2 |g|^q)^{1/p-1/s} with
 * 1/q = 1/r - 1/s.  The side with a vanishing exponent is skipped.  Checks:
 * series bounds, [w]_{p,(r,s)} against 2^{1/r-1/s} K1^{1/r-1/p} K2^{1/p-1/s},
 * the Hoelder split against 2^{1/r-1/s} ||f||_X ||g||_{[(X^r)']^{1/r}}, and
 * the achieved factorization quality.
 */
inline WeightCertificate construct_aprs_weight(const GridFunction& f,
                                               const GridFunction& g,
                                               const SpaceSpec& X, double p,
                                               double r, double s, double K1,
                                               double K2, const Basis& basis) {
    const double ra = recip(r), sa = recip(s);
    double pa = recip(p);
    if (!(ra > sa))
        throw std::invalid_argument("construct_aprs_weight: need 1/r > 1/s");
    if (pa > ra + 1e-12 || pa < sa - 1e-12)
        throw std::invalid_argument("construct_aprs_weight: need p in [r, s]");
    pa = std::min(ra, std::max(sa, pa));
    detail::check_fn(X, f);
    detail::check_fn(X, g);
    const GridFunction af = detail::abs_vec(f);
    const GridFunction ag = detail::abs_vec(g);
    if (!detail::any_positive(af) || !detail::any_positive(ag))
        throw std::invalid_argument("construct_aprs_weight: zero input");

    const double rq = ra - sa;  // 1/q
    const double q = 1.0 / rq;
    double rq2 = ra - pa;       // exponent of the f-side series
    double rq1 = pa - sa;       // exponent of the g-side series
    const bool need1 = rq2 > 1e-12;
    const bool need2 = rq1 > 1e-12;
    if (!need1) rq2 = 0.0;
    if (!need2) rq1 = 0.0;

    // rescaled_space re-validates the (r, s) window per family.
    FactorizeResult fac = factorize(X, r, s, af);

    WeightCertificate cert;
    cert.p = p;
    cert.r = r;
    cert.s = s;
    cert.K1 = K1;
    cert.K2 = K2;
    if (need1) {
        RdFConfig cfg;
        cfg.K = K1;
        cert.R1 =
            detail::rdf_fixed_point(detail::pow_vec(fac.h, q), basis, 1.0, cfg);
    }
    if (need2) {
        RdFConfig cfg;
        cfg.K = K2;
        cert.R2 = detail::rdf_fixed_point(detail::pow_vec(ag, q), basis, 1.0, cfg);
    }

    cert.w.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double val = 1.0;
        if (need1) val *= std::pow(cert.R1[i], -rq2);
        if (need2) val *= std::pow(cert.R2[i], rq1);
        cert.w[i] = val;
    }

    if (need1)
        cert.checks.push_back(make_check("series-a1-left",
                                         a1_constant(cert.R1, basis), 2.0 * K1));
    if (need2)
        cert.checks.push_back(make_check("series-a1-right",
                                         a1_constant(cert.R2, basis), 2.0 * K2));

    const double cls = aprs_constant_recip(cert.w, pa, ra, sa, basis);
    cert.checks.push_back(make_check(
        "class-bound", cls,
        std::pow(2.0, rq) * std::pow(K1, rq2) * std::pow(K2, rq1)));

    const SpaceSpec Lpw = lebesgue_space(X.grid, p, cert.w);
    const SpaceSpec Ldual =
        lebesgue_space(X.grid, from_recip(rq2), detail::inverted(cert.w));
    const double lhs = norm(Lpw, af) * norm(Ldual, ag);
    const double rhs = std::pow(2.0, rq) * norm(X, af) *
                       detail::dual_power_norm(X, r, ag);
    cert.checks.push_back(make_check("holder-split", lhs, rhs));
    cert.checks.push_back(make_check("factorization-quality", fac.product(),
                                     fac.target * (1.0 + 1e-6)));
    return cert;
}

/** Explicit multiplication isomorphisms for the two-weight construction. */
struct OffDiagTwist {
    GridFunction m1;  // source rescaled space -> target rescaled space
    GridFunction m2;  // associate of the target -> associate of the source
};

/**
 * Off-diagonal weight for (f, g), exponent windows translated by alpha.
 * One-weight form: requires the rescaled source and target spaces to agree
 * structurally; w = (R1 h^q)^{-1/q2} (R2 |g|^q)^{1/q1}, 1/q1 = 1/p1 - 1/s1,
 * 1/q2 = 1/r2 - 1/p2.  Two-weight form (twist != nullptr): the series divide
 * by the multipliers and the two weights differ:
 * w_in = R1^{-1/q2} (m2 R2)^{1/q1}, w_out = (m1 R1)^{-1/q2} R2^{1/q1}.
 * The class constant is measured as
 * sup_E <w_in^{-1}>_{1/(1/r1-1/p1)} <w_out>_{1/(1/p2-1/s2)}.
 */
inline WeightCertificate construct_offdiag_weight(
    const GridFunction& f, const GridFunction& g, const SpaceSpec& X,
    const SpaceSpec& Y, const OffDiagParams& par, double K1, double K2,
    const Basis& basis, const OffDiagTwist* twist = nullptr) {
    par.validate();
    detail::check_fn(X, f);
    detail::check_fn(Y, g);
    const GridFunction af = detail::abs_vec(f);
    const GridFunction ag = detail::abs_vec(g);
    if (!detail::any_positive(af) || !detail::any_positive(ag))
        throw std::invalid_argument("construct_offdiag_weight: zero input");

    const double r1 = from_recip(par.ra1), s1 = from_recip(par.sa1);
    const double r2 = from_recip(par.ra2);
    if (twist == nullptr) {
        // One-weight form needs the rescaled spaces to be the same space.
        bool match;
        if (par.sa2 >= 0.0) {
            match = specs_match(rescaled_space(X, r1, s1),
                                rescaled_space(Y, r2, from_recip(par.sa2)));
        } else {
            // 1/s2 < 0 has no direct rescaled form; compare the equivalent
            // associate-side description [(X^{r1})']^{1/r1} = [(Y^{r2})']^{1/r2}.
            match = specs_match(
                power_space(kothe_dual_spec(power_space(X, r1)), par.ra1),
                power_space(kothe_dual_spec(power_space(Y, r2)), par.ra2));
        }
        if (!match) {
            std::ostringstream os;
            os << "construct_offdiag_weight: rescaled spaces do not match: "
               << "source gives " << space_signature(rescaled_space(X, r1, s1))
               << ", target gives "
               << (par.sa2 >= 0.0
                       ? space_signature(rescaled_space(Y, r2, from_recip(par.sa2)))
                       : space_signature(power_space(
                             kothe_dual_spec(power_space(Y, r2)), par.ra2)));
            throw std::invalid_argument(os.str());
        }
    } else {
        detail::check_weight(X.grid, twist->m1, "construct_offdiag_weight");
        detail::check_weight(X.grid, twist->m2, "construct_offdiag_weight");
    }

    const double rq = par.ra1 - par.sa1;  // 1/q, equals ra2 - sa2
    const double q = 1.0 / rq;
    double rq2 = par.ra2 - par.pa2;       // f-side exponent, equals ra1 - pa1
    double rq1 = par.pa1 - par.sa1;       // g-side exponent, equals pa2 - sa2
    const bool need1 = rq2 > 1e-12;
    const bool need2 = rq1 > 1e-12;
    if (!need1) rq2 = 0.0;
    if (!need2) rq1 = 0.0;

    FactorizeResult fac = factorize(X, r1, s1, af);

    WeightCertificate cert;
    cert.offdiag = true;
    cert.params = par;
    cert.p = from_recip(par.pa1);
    cert.r = r1;
    cert.s = s1;
    cert.K1 = K1;
    cert.K2 = K2;
    const GridFunction* d1 = (twist != nullptr) ? &twist->m1 : nullptr;
    const GridFunction* d2 = (twist != nullptr) ? &twist->m2 : nullptr;
    if (need1) {
        RdFConfig cfg;
        cfg.K = K1;
        cert.R1 = detail::rdf_fixed_point(detail::pow_vec(fac.h, q), basis, 1.0,
                                          cfg, d1);
    }
    if (need2) {
        RdFConfig cfg;
        cfg.K = K2;
        cert.R2 =
            detail::rdf_fixed_point(detail::pow_vec(ag, q), basis, 1.0, cfg, d2);
    }

    const std::size_t N = f.size();
    cert.w.resize(N);
    const bool two_weights = (twist != nullptr);
    if (two_weights) cert.w2.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        double win = 1.0, wout = 1.0;
        if (need1) {
            win *= std::pow(cert.R1[i], -rq2);
            wout *= std::pow(two_weights ? twist->m1[i] * cert.R1[i] : cert.R1[i],
                             -rq2);
        }
        if (need2) {
            win *= std::pow(two_weights ? twist->m2[i] * cert.R2[i] : cert.R2[i],
                            rq1);
            wout *= std::pow(cert.R2[i], rq1);
        }
        cert.w[i] = win;
        if (two_weights) cert.w2[i] = wout;
    }

    if (need1)
        cert.checks.push_back(
            make_check("series-a1-left",
                       detail::twisted_a1_constant(cert.R1, basis, d1), 2.0 * K1));
    if (need2)
        cert.checks.push_back(
            make_check("series-a1-right",
                       detail::twisted_a1_constant(cert.R2, basis, d2), 2.0 * K2));

    const GridFunction& wout = cert.output_weight();
    const double cls = two_weight_offdiag_constant(cert.w, wout, par, basis);
    cert.checks.push_back(make_check(
        "class-bound", cls,
        std::pow(2.0, rq) * std::pow(K1, rq2) * std::pow(K2, rq1)));

    const SpaceSpec Lp1w = lebesgue_space(X.grid, from_recip(par.pa1), cert.w);
    const SpaceSpec Ldual =
        lebesgue_space(X.grid, from_recip(rq2), detail::inverted(wout));
    const double lhs = norm(Lp1w, af) * norm(Ldual, ag);
    const double rhs = std::pow(2.0, rq) * norm(X, af) *
                       detail::dual_power_norm(Y, r2, ag);
    cert.checks.push_back(make_check("holder-split", lhs, rhs));
    cert.checks.push_back(make_check("factorization-quality", fac.product(),
                                     fac.target * (1.0 + 1e-6)));

    if (two_weights && par.sa2 >= 0.0) {
        // Sampled isometry checks of the declared multiplication maps.
        const SpaceSpec Xrs = rescaled_space(X, r1, s1);
        const SpaceSpec Yrs = rescaled_space(Y, r2, from_recip(par.sa2));
        const GridFunction& u1 = need1 ? cert.R1 : detail::pow_vec(fac.h, q);
        GridFunction m1u(N);
        for (std::size_t i = 0; i < N; ++i) m1u[i] = twist->m1[i] * u1[i];
        cert.checks.push_back(make_ratio_check("isometry-ratio-l1",
                                               norm(Xrs, u1), norm(Yrs, m1u)));
        const GridFunction u2 = need2 ? cert.R2 : detail::pow_vec(ag, q);
        GridFunction m2u(N);
        for (std::size_t i = 0; i < N; ++i) m2u[i] = twist->m2[i] * u2[i];
        const double a = kothe_dual_norm_reference(Yrs, u2);
        const double b = kothe_dual_norm_reference(Xrs, m2u);
        cert.checks.push_back(make_ratio_check("isometry-ratio-l2", a, b));
    }
    return cert;
}

/** Per-coordinate parameters for the multilinear construction. */
struct AprsParams {
    double p = 2.0;
    double r = 1.0;
    double s = kInf;
    double K1 = 0.0;  // 0 = estimate the operator norm over the basis
    double K2 = 0.0;
};

struct MultilinearWeights {
    std::vector<WeightCertificate> coordinates;
    std::vector<GridFunction> g_parts;  // split of |g| over the dual factors
    GridFunction w;                     // product weight
    double p = 0.0, r = 0.0, s = 0.0;   // assembled exponents
    std::vector<CheckedInequality> checks;

    bool all_pass() const {
        if (coordinates.empty()) return false;
        for (const auto& c : coordinates)
            if (!c.all_pass()) return false;
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline double estimated_K(const SpaceSpec& S, const Basis& basis,
                          std::uint64_t seed) {
    OpNormConfig cfg;
    if (seed != 0) cfg.seed = seed;
    return op_norm_estimate(S, basis, 1.0, cfg).value;
}

}  // namespace detail

/**
 * Splits |g| over the per-coordinate dual spaces [(X_j^{r_j})']^{1/r_j},
 * builds one limited-range certificate per coordinate on (f_j, g_j), and
 * checks the assembled product inequality: with w = prod w_j,
 * prod_j ||f_j||_{L^{p_j}_{w_j}} * ||g||_{L^{1/(1/r-1/p)}_{w^{-1}}}
 *   <= 2^{1/r-1/s} prod_j ||f_j||_{X_j} prod_j ||g_j||.
 */
inline MultilinearWeights construct_multilinear_weights(
    const std::vector<GridFunction>& fs, const GridFunction& g,
    const std::vector<SpaceSpec>& Xs, const std::vector<AprsParams>& params,
    const Basis& basis, std::uint64_t seed = 0x513f00dULL) {
    const std::size_t m = fs.size();
    if (m == 0 || Xs.size() != m || params.size() != m)
        throw std::invalid_argument(
            "construct_multilinear_weights: need matching nonempty f/X/params lists");
    const GridFunction ag = detail::abs_vec(g);
    if (!detail::any_positive(ag))
        throw std::invalid_argument("construct_multilinear_weights: zero input");

    // Dual factors Z_j = [(X_j^{r_j})']^{1/r_j}.
    std::vector<SpaceSpec> Zs;
    Zs.reserve(m);
    for (std::size_t j = 0; j < m; ++j)
        Zs.push_back(power_space(kothe_dual_spec(power_space(Xs[j], params[j].r)),
                                 recip(params[j].r)));

    MultilinearWeights out;
    if (m == 1) {
        out.g_parts.push_back(ag);
    } else {
        std::vector<const SpaceSpec*> ptrs;
        ptrs.reserve(m);
        for (const auto& Z : Zs) ptrs.push_back(&Z);
        detail::SplitState st = detail::product_descent(ptrs, ag, 1e-8, 10000, seed);
        double prod = 1.0;
        for (double nj : st.norms) prod *= nj;
        if (!(prod > 0.0) || !std::isfinite(prod)) {
            std::ostringstream os;
            os << "construct_multilinear_weights: product split failed "
               << "(achieved factor-norm product " << prod << ")";
            throw std::runtime_error(os.str());
        }
        out.g_parts = std::move(st.parts);
    }

    double ra_tot = 0.0, sa_tot = 0.0, pa_tot = 0.0, rq2_tot = 0.0;
    const std::size_t N = g.size();
    out.w.assign(N, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        const AprsParams& pr = params[j];
        double K1 = pr.K1, K2 = pr.K2;
        const SpaceSpec Xrs = rescaled_space(Xs[j], pr.r, pr.s);
        if (K1 <= 0.0) K1 = detail::estimated_K(Xrs, basis, seed);
        if (K2 <= 0.0) K2 = detail::estimated_K(kothe_dual_spec(Xrs), basis, seed);
        out.coordinates.push_back(construct_aprs_weight(
            fs[j], out.g_parts[j], Xs[j], pr.p, pr.r, pr.s, K1, K2, basis));
        for (std::size_t i = 0; i < N; ++i) out.w[i] *= out.coordinates[j].w[i];
        ra_tot += recip(pr.r);
        sa_tot += recip(pr.s);
        pa_tot += recip(pr.p);
        rq2_tot += recip(pr.r) - recip(pr.p);
    }
    out.r = from_recip(ra_tot);
    out.s = from_recip(sa_tot);
    out.p = from_recip(pa_tot);

    // Assembled product inequality and the Hoelder assembly of the g-side.
    double lhs_f = 1.0, rhs_f = 1.0, rhs_g = 1.0, holder_rhs = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const WeightCertificate& cj = out.coordinates[j];
        lhs_f *= norm(lebesgue_space(Xs[j].grid, params[j].p, cj.w),
                      detail::abs_vec(fs[j]));
        rhs_f *= norm(Xs[j], fs[j]);
        rhs_g *= detail::dual_power_norm(Xs[j], params[j].r, out.g_parts[j]);
        holder_rhs *= norm(
            lebesgue_space(Xs[j].grid,
                           from_recip(recip(params[j].r) - recip(params[j].p)),
                           detail::inverted(cj.w)),
            out.g_parts[j]);
    }
    const SpaceSpec Lg = lebesgue_space(Xs[0].grid, from_recip(rq2_tot),
                                        detail::inverted(out.w));
    const double lhs_g = norm(Lg, ag);
    out.checks.push_back(make_check("holder-g", lhs_g, holder_rhs));
    out.checks.push_back(make_check(
        "assembled-split", lhs_f * lhs_g,
        std::pow(2.0, ra_tot - sa_tot) * rhs_f * rhs_g));
    return out;
}

// ---------------------------------------------------------------------------
// Norm transfer
// ---------------------------------------------------------------------------

/** Increasing scalar function: power law c t^beta or a tabulated curve. */
struct PhiFunction {
    enum class Kind { PowerLaw, Table };
    Kind kind = Kind::PowerLaw;
    double c = 1.0;
    double beta = 0.0;
    std::vector<double> ts, vals;

    static PhiFunction power(double c, double beta) {
        if (!(c > 0.0) || !std::isfinite(c) || beta < 0.0 || !std::isfinite(beta))
            throw std::invalid_argument("PhiFunction: need c > 0 and beta >= 0");
        PhiFunction p;
        p.kind = Kind::PowerLaw;
        p.c = c;
        p.beta = beta;
        return p;
    }

    static PhiFunction table(std::vector<double> ts, std::vector<double> vals) {
        if (ts.empty() || ts.size() != vals.size())
            throw std::invalid_argument("PhiFunction: need matching nonempty tables");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (!std::isfinite(ts[i]) || !(vals[i] > 0.0) || !std::isfinite(vals[i]))
                throw std::invalid_argument("PhiFunction: table values must be "
                                            "finite and positive");
            if (i > 0 && !(ts[i] > ts[i - 1]))
                throw std::invalid_argument("PhiFunction: abscissae must increase");
            if (i > 0 && vals[i] < vals[i - 1])
                throw std::invalid_argument("PhiFunction: curve must be increasing");
        }
        PhiFunction p;
        p.kind = Kind::Table;
        p.ts = std::move(ts);
        p.vals = std::move(vals);
        return p;
    }

    double operator()(double t) const {
        if (kind == Kind::PowerLaw) return c * std::pow(t, beta);
        if (t <= ts.front()) return vals.front();
        if (t >= ts.back()) return vals.back();
        std::size_t i = 1;
        while (ts[i] < t) ++i;
        const double lam = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
        return vals[i - 1] + lam * (vals[i] - vals[i - 1]);
    }
};

enum class TransferMode { Strong, Weak, VectorValued, Pairs };

struct TransferParams {
    TransferMode mode = TransferMode::Strong;
    double p = 2.0;             // weighted-hypothesis exponent
    double r = 1.0;             // limited-range window
    double s = kInf;
    double K1 = 0.0, K2 = 0.0;  // 0 = estimate over the basis
    double vv_exponent = 0.0;   // sequence-space exponent (0 = use p)
    std::uint64_t seed = 0;     // 0 = library defaults for oracle/estimates
};

struct TransferCase {
    std::string label;
    WeightCertificate certificate;
    std::vector<CheckedInequality> hypothesis;  // weighted input bound(s)
    CheckedInequality conclusion;               // unweighted output bound

    bool hypothesis_holds() const {
        for (const auto& c : hypothesis)
            if (!c.pass) return false;
        return !hypothesis.empty();
    }
    bool pass() const {
        return hypothesis_holds() && conclusion.pass && certificate.all_pass();
    }
};

struct TransferReport {
    TransferParams params;
    double K1 = 0.0, K2 = 0.0;  // resolved values
    double class_bound = 0.0;   // 2^{1/r-1/s} K1^{1/r-1/p} K2^{1/p-1/s}
    double constant = 0.0;      // 2^{1/r-1/s} phi(class_bound)
    std::vector<TransferCase> cases;

    bool all_pass() const {
        if (cases.empty()) return false;
        for (const auto& c : cases)
            if (!c.pass()) return false;
        return true;
    }
    bool all_conclusions_hold() const {
        if (cases.empty()) return false;
        for (const auto& c : cases)
            if (!c.conclusion.pass) return false;
        return true;
    }
};

namespace detail {

/** g with ||g||_{X'} = 1 maximizing the pairing with f (closed form where
 *  available, ascent oracle otherwise). */
inline GridFunction holder_witness(const SpaceSpec& X, const GridFunction& f,
                                   std::uint64_t seed) {
    const GridFunction af = abs_vec(f);
    if (X.family == Family::WeightedLebesgue && X.rp <= 1.0) {
        const std::size_t N = f.size();
        GridFunction g(N, 0.0);
        if (X.rp == 0.0) {
            // p = inf: scaled point mass at the peak of |f| v.
            std::size_t best = 0;
            double top = -1.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double val = af[i] * X.weight[i];
                if (val > top) {
                    top = val;
                    best = i;
                }
            }
            g[best] = X.weight[best] / X.grid.cell_measure();
            return g;
        }
        const double p = 1.0 / X.rp;
        const double nf = norm(X, af);
        if (nf == 0.0) throw std::invalid_argument("holder_witness: zero input");
        for (std::size_t i = 0; i < N; ++i)
            g[i] = X.weight[i] * std::pow(af[i] * X.weight[i] / nf, p - 1.0);
        return g;
    }
    DualOracleConfig cfg;
    if (seed != 0) cfg.seed = seed;
    DualOracleResult res = kothe_dual_norm_oracle(kothe_dual_spec(X), af, cfg);
    if (!any_positive(res.witness))
        throw std::runtime_error("holder_witness: oracle produced a zero witness");
    return res.witness;
}

/** Pointwise (sum_n |row_n|^p)^{1/p} across a list of rows; p = inf -> max. */
inline GridFunction pointwise_lp(const std::vector<GridFunction>& rows, double p) {
    if (rows.empty()) throw std::invalid_argument("pointwise_lp: empty sequence");
    const std::size_t N = rows.front().size();
    const double rp = recip(p);
    GridFunction out(N, 0.0);
    for (const auto& row : rows) {
        if (row.size() != N)
            throw std::invalid_argument("pointwise_lp: ragged sequence");
        for (std::size_t i = 0; i < N; ++i) {
            const double a = std::fabs(row[i]);
            out[i] = (rp == 0.0) ? std::max(out[i], a) : out[i] + std::pow(a, p);
        }
    }
    if (rp != 0.0)
        for (double& x : out) x = std::pow(x, rp);
    return out;
}

}  // namespace detail

struct TransferBattery {
    std::vector<GridFunction> functions;  // Strong / Weak modes
    std::vector<std::vector<GridFunction>> sequences;  // VectorValued mode
    std::vector<std::pair<GridFunction, GridFunction>> pairs;  // Pairs mode
};

/**
 * Drives the operator callback over the battery.  Per case: a dual witness g
 * for the test function, the constructed weight certificate, the weighted
 * hypothesis with phi evaluated at the measured class constant, and the
 * unweighted conclusion with the transferred constant.  Strong mode checks
 * ||Tf||_X, weak mode the weak norm, vector-valued mode the pointwise
 * sequence norm (with the exact norm identity when the two exponents agree),
 * pairs mode consumes precomputed (input, output) pairs and ignores T.
 */
inline TransferReport extrapolate_bound(
    const std::function<GridFunction(const GridFunction&)>& T,
    const PhiFunction& phi, const SpaceSpec& X, const TransferParams& mp,
    const TransferBattery& battery, const Basis& basis) {
    const double ra = recip(mp.r), sa = recip(mp.s);
    double pa = recip(mp.p);
    if (!(ra > sa))
        throw std::invalid_argument("extrapolate_bound: need 1/r > 1/s");
    if (pa > ra + 1e-12 || pa < sa - 1e-12)
        throw std::invalid_argument("extrapolate_bound: need p in [r, s]");
    pa = std::min(ra, std::max(sa, pa));
    const double rq = ra - sa;
    const double rq2 = ra - pa, rq1 = pa - sa;
    const bool plain = (ra == 1.0 && sa == 0.0);

    const bool needs_callback = mp.mode != TransferMode::Pairs;
    if (needs_callback && !T)
        throw std::invalid_argument("extrapolate_bound: missing operator callback");

    TransferReport rep;
    rep.params = mp;
    rep.K1 = mp.K1;
    rep.K2 = mp.K2;
    const SpaceSpec Xrs = rescaled_space(X, mp.r, mp.s);
    if (rep.K1 <= 0.0)
        rep.K1 = (rq2 > 0.0) ? detail::estimated_K(Xrs, basis, mp.seed) : 1.0;
    if (rep.K2 <= 0.0)
        rep.K2 = (rq1 > 0.0)
                     ? detail::estimated_K(kothe_dual_spec(Xrs), basis, mp.seed)
                     : 1.0;
    rep.class_bound =
        std::pow(2.0, rq) * std::pow(rep.K1, rq2) * std::pow(rep.K2, rq1);
    rep.constant = std::pow(2.0, rq) * phi(rep.class_bound);

    const std::size_t N = X.grid.cell_count();
    auto apply_T = [&](const GridFunction& f) {
        GridFunction out;
        try {
            out = T(f);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("extrapolate_bound: operator "
                                                 "callback failed: ") +
                                     e.what());
        }
        if (out.size() != N)
            throw std::runtime_error(
                "extrapolate_bound: operator callback returned a function on "
                "the wrong grid");
        for (double x : out)
            if (!std::isfinite(x))
                throw std::runtime_error(
                    "extrapolate_bound: operator callback returned a "
                    "non-finite value");
        return out;
    };

    auto build_certificate = [&](const GridFunction& f, const GridFunction& g) {
        return plain ? construct_ap_weight(f, g, X, mp.p, rep.K1, rep.K2, basis)
                     : construct_aprs_weight(f, g, X, mp.p, mp.r, mp.s, rep.K1,
                                             rep.K2, basis);
    };

    auto run_case = [&](std::string label, const GridFunction& fin,
                        const GridFunction& fout,
                        const std::vector<GridFunction>* seq_in = nullptr,
                        const std::vector<GridFunction>* seq_out = nullptr,
                        double vv_p = 0.0) {
        TransferCase cs;
        cs.label = std::move(label);
        if (fin.size() != N || fout.size() != N)
            throw std::invalid_argument(
                "extrapolate_bound: battery function on the wrong grid");
        const GridFunction g = detail::holder_witness(X, fin, mp.seed);
        cs.certificate = build_certificate(fin, g);
        const double measured = cs.certificate.check("class-bound").lhs;
        const double phi_measured = phi(measured);
        const SpaceSpec Lpw = lebesgue_space(X.grid, mp.p, cs.certificate.w);
        const double nf_w = norm(Lpw, fin);
        if (seq_in == nullptr) {
            const double lhs_w = (mp.mode == TransferMode::Weak)
                                     ? weak_norm(Lpw, fout)
                                     : norm(Lpw, fout);
            cs.hypothesis.push_back(
                make_check("weighted-hypothesis", lhs_w, phi_measured * nf_w));
        } else {
            // Per-component weighted bounds plus the exact norm identity for
            // the pointwise sequence norm when the exponents agree.
            for (std::size_t n = 0; n < seq_in->size(); ++n) {
                std::ostringstream os;
                os << "weighted-hypothesis[" << n << "]";
                cs.hypothesis.push_back(
                    make_check(os.str(), norm(Lpw, (*seq_out)[n]),
                               phi_measured * norm(Lpw, (*seq_in)[n])));
            }
            if (vv_p == mp.p) {
                const double direct = norm(Lpw, fin);
                double acc = 0.0;
                const double rvp = recip(vv_p);
                for (const auto& row : *seq_in) {
                    const double nn = norm(Lpw, row);
                    acc = (rvp == 0.0) ? std::max(acc, nn)
                                       : acc + std::pow(nn, vv_p);
                }
                if (rvp != 0.0) acc = std::pow(acc, rvp);
                cs.hypothesis.push_back(
                    make_ratio_check("sequence-norm-identity", direct, acc));
            }
        }
        const double lhs_out = (mp.mode == TransferMode::Weak)
                                   ? weak_norm(X, fout)
                                   : norm(X, fout);
        cs.conclusion = make_check("unweighted-conclusion", lhs_out,
                                   rep.constant * norm(X, fin));
        rep.cases.push_back(std::move(cs));
    };

    switch (mp.mode) {
        case TransferMode::Strong:
        case TransferMode::Weak: {
            if (battery.functions.empty())
                throw std::invalid_argument(
                    "extrapolate_bound: this mode consumes battery.functions");
            for (std::size_t i = 0; i < battery.functions.size(); ++i) {
                std::ostringstream os;
                os << "f[" << i << "]";
                const GridFunction& f = battery.functions[i];
                run_case(os.str(), f, apply_T(f));
            }
            break;
        }
        case TransferMode::VectorValued: {
            if (battery.sequences.empty())
                throw std::invalid_argument(
                    "extrapolate_bound: this mode consumes battery.sequences");
            const double vv_p = (mp.vv_exponent > 0.0) ? mp.vv_exponent : mp.p;
            for (std::size_t i = 0; i < battery.sequences.size(); ++i) {
                const auto& rows = battery.sequences[i];
                if (rows.empty())
                    throw std::invalid_argument(
                        "extrapolate_bound: empty sequence in battery");
                std::vector<GridFunction> out_rows;
                out_rows.reserve(rows.size());
                for (const auto& row : rows) out_rows.push_back(apply_T(row));
                std::ostringstream os;
                os << "seq[" << i << "]";
                run_case(os.str(), detail::pointwise_lp(rows, vv_p),
                         detail::pointwise_lp(out_rows, vv_p), &rows, &out_rows,
                         vv_p);
            }
            break;
        }
        case TransferMode::Pairs: {
            if (battery.pairs.empty())
                throw std::invalid_argument(
                    "extrapolate_bound: this mode consumes battery.pairs");
            for (std::size_t i = 0; i < battery.pairs.size(); ++i) {
                std::ostringstream os;
                os << "pair[" << i << "]";
                run_case(os.str(), battery.pairs[i].first,
                         battery.pairs[i].second);
            }
            break;
        }
    }
    return rep;
}

}  // namespace bfx
