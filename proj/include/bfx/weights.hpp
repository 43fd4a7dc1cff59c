#pragma once

/**
 * Muckenhoupt-type weight constants over a finite basis of sets.
 *
 * All constants are exact finite suprema over the basis (no sampling), in
 * signed-reciprocal exponent form throughout: the class constant
 *
 *   [w]_{p,(r,s)} = sup_E <w^{-1}>_{1/(1/r-1/p),E} <w>_{1/(1/p-1/s),E}
 *
 * is computed as a product of power means with exponents rho = 1/r - 1/p and
 * rho = 1/p - 1/s (rho = 0 meaning the essential maximum).  The classical
 * constant is [w]_p = [w]_{p,(1,inf)}.
 */

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "basis.hpp"
#include "maximal.hpp"

namespace bfx {

namespace detail {
inline void check_positive_weight(const GridFunction& w, const char* who) {
    for (double x : w)
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument(std::string(who) +
                                        ": weight must be strictly positive and finite");
}

inline GridFunction inverted(const GridFunction& w) {
    GridFunction out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = 1.0 / w[i];
    return out;
}
}  // namespace detail

/**
 * [w]_{p,(r,s)} in reciprocal form: pa = 1/p, ra = 1/r, sa = 1/s with
 * sa <= pa <= ra required.  Exact sup over the basis.
 */
inline double aprs_constant_recip(const GridFunction& w, double pa, double ra,
                                  double sa, const Basis& basis) {
    detail::check_positive_weight(w, "aprs_constant");
    if (!(ra >= pa) || !(pa >= sa))
        throw std::invalid_argument("aprs_constant: need 1/r >= 1/p >= 1/s");
    const GridFunction winv = detail::inverted(w);
    const double rho_left = ra - pa;   // exponent of the w^{-1} mean
    const double rho_right = pa - sa;  // exponent of the w mean
    double best = 0.0;
    for (const auto& E : basis.sets) {
        const double val = power_mean(winv, E.cells, rho_left) *
                           power_mean(w, E.cells, rho_right);
        best = std::max(best, val);
    }
    return best;
}

/** [w]_{p,(r,s)} with plain exponents; r <= p <= s, s may be kInf. */
inline double aprs_constant(const GridFunction& w, double p, double r, double s,
                            const Basis& basis) {
    return aprs_constant_recip(w, recip(p), recip(r), recip(s), basis);
}

/** Two-weight off-diagonal exponent data, in signed reciprocal form. */
struct OffDiagParams {
    double alpha = 0.0;
    double ra1 = 1.0, ra2 = 1.0;  // 1/r_1, 1/r_2
    double sa1 = 0.0, sa2 = 0.0;  // 1/s_1, 1/s_2 (1/s_2 may be negative)
    double pa1 = 1.0, pa2 = 1.0;  // 1/p_1, 1/p_2

    /**
     * The two exponent windows are translates by alpha:
     * 1/r_2 - 1/r_1 = 1/s_2 - 1/s_1 = 1/p_2 - 1/p_1 = alpha, with
     * 1/p_j in [1/s_j, 1/r_j], 1/r_j > 1/s_j, and 1/s_1 >= 0.
     */
    void validate() const {
        const double tol = 1e-12;
        if (!(ra1 > sa1) || !(ra2 > sa2))
            throw std::invalid_argument("OffDiagParams: need 1/r_j > 1/s_j");
        if (!(ra1 > 0.0) || !(ra2 > 0.0) || sa1 < 0.0)
            throw std::invalid_argument(
                "OffDiagParams: need r_j finite positive and s_1 in (0, inf]");
        if (std::fabs((ra2 - ra1) - alpha) > tol ||
            std::fabs((sa2 - sa1) - alpha) > tol ||
            std::fabs((pa2 - pa1) - alpha) > tol)
            throw std::invalid_argument(
                "OffDiagParams: exponent windows are not translates by alpha");
        if (pa1 < sa1 - tol || pa1 > ra1 + tol || pa2 < sa2 - tol ||
            pa2 > ra2 + tol)
            throw std::invalid_argument("OffDiagParams: 1/p_j outside [1/s_j, 1/r_j]");
    }
};

/**
 * [w_1, w_2]_{p,(r,s)} = sup_E <w_1^{-1}>_{1/(1/r_1-1/p_1),E}
 *                              <w_2>_{1/(1/p_2-1/s_2),E}.
 * With w_1 = w_2 = w and alpha = 0 this reduces to [w]_{p_1,(r_1,s_1)}.
 */
inline double two_weight_offdiag_constant(const GridFunction& w1,
                                          const GridFunction& w2,
                                          const OffDiagParams& par,
                                          const Basis& basis) {
    par.validate();
    detail::check_positive_weight(w1, "two_weight_offdiag_constant");
    detail::check_positive_weight(w2, "two_weight_offdiag_constant");
    const GridFunction w1inv = detail::inverted(w1);
    const double rho_left = par.ra1 - par.pa1;
    const double rho_right = par.pa2 - par.sa2;
    double best = 0.0;
    for (const auto& E : basis.sets) {
        const double val = power_mean(w1inv, E.cells, rho_left) *
                           power_mean(w2, E.cells, rho_right);
        best = std::max(best, val);
    }
    return best;
}

/** Least C with M w <= C w pointwise; equals [w]_{1,(1,inf)}. */
inline double a1_constant(const GridFunction& w, const Basis& basis) {
    detail::check_positive_weight(w, "a1_constant");
    const GridFunction mw = maximal(w, basis, 1.0);
    double best = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        best = std::max(best, mw[i] / w[i]);
    return best;
}

/** [w]_inf measured through the symmetry: ainf(w) = a1(w^{-1}). */
inline double ainf_constant(const GridFunction& w, const Basis& basis) {
    detail::check_positive_weight(w, "ainf_constant");
    return a1_constant(detail::inverted(w), basis);
}

/**
 * Fujii-Wilson constant: sup_E <M_E w>_{1,E} / <w>_{1,E} where M_E is the
 * maximal operator localized to basis sets contained in E.
 */
inline double fujii_wilson_constant(const GridFunction& w, const Basis& basis) {
    detail::check_positive_weight(w, "fujii_wilson_constant");
    double best = 0.0;
    for (const auto& E : basis.sets) {
        const GridFunction loc = maximal_localized(w, basis, E);
        const double val =
            power_mean(loc, E.cells, 1.0) / power_mean(w, E.cells, 1.0);
        best = std::max(best, val);
    }
    return best;
}

/** Result of the convex interpolation of two endpoint weights. */
struct InterpolatedWeight {
    GridFunction weight;     // w^{phi(1/p)} v^{1-phi(1/p)}
    double theta = 0.0;      // 1 - phi(1/p) = (1/r-1/p)/(1/r-1/s)
    double endpoint_r = 0.0; // [w]_{r,(r,s)}
    double endpoint_s = 0.0; // [v]_{s,(r,s)}
    double bound = 0.0;      // endpoint_r^{1-theta} * endpoint_s^{theta}
    double measured = 0.0;   // [weight]_{p,(r,s)}
};

/**
 * Given endpoint weights w (class A_{r,(r,s)}) and v (class A_{s,(r,s)}),
 * forms u = w^{(1/p-1/s)/(1/r-1/s)} v^{(1/r-1/p)/(1/r-1/s)} and certifies
 * [u]_{p,(r,s)} <= [w]_{r,(r,s)}^{1-theta} [v]_{s,(r,s)}^{theta}.
 */
inline InterpolatedWeight interpolate_weights(const GridFunction& w,
                                              const GridFunction& v, double p,
                                              double r, double s,
                                              const Basis& basis) {
    detail::check_positive_weight(w, "interpolate_weights");
    detail::check_positive_weight(v, "interpolate_weights");
    const double pa = recip(p), ra = recip(r), sa = recip(s);
    if (!(ra > sa) || !(ra >= pa) || !(pa >= sa))
        throw std::invalid_argument("interpolate_weights: need 1/r >= 1/p >= 1/s, r < s");
    InterpolatedWeight out;
    const double span = ra - sa;
    const double e_w = (pa - sa) / span;  // phi(1/p), exponent of w
    out.theta = (ra - pa) / span;         // exponent of v
    out.weight.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        out.weight[i] = std::pow(w[i], e_w) * std::pow(v[i], out.theta);
    out.endpoint_r = aprs_constant_recip(w, ra, ra, sa, basis);
    out.endpoint_s = aprs_constant_recip(v, sa, ra, sa, basis);
    out.bound = std::pow(out.endpoint_r, e_w) * std::pow(out.endpoint_s, out.theta);
    out.measured = aprs_constant_recip(out.weight, pa, ra, sa, basis);
    return out;
}

enum class Membership { Inside, Outside, Inconclusive };

/** Growth ladder of [|x|^{beta d}]_{p,(r,s)} across grid resolutions. */
struct PowerWeightReport {
    double beta = 0.0;
    std::vector<int> resolutions;
    std::vector<double> constants;
    Membership verdict = Membership::Inconclusive;
};

namespace detail {
/**
 * Cell values of v(x) = |x|^{beta d} on an origin-centered grid: cell
 * centers everywhere except the cells whose closure contains the origin,
 * which receive the exact cell average (closed-form radial integration, the
 * angular factor in d = 2 by Gauss-Legendre quadrature).  Requires
 * beta d > -d, i.e. local integrability of the model density.
 */
inline GridFunction power_weight_cells(const Grid& g, double beta) {
    const double expo = beta * g.dim();
    if (!(expo > -static_cast<double>(g.dim())))
        throw std::invalid_argument("power_weight_cells: |x|^{beta d} not integrable");
    if (g.dim() > 2)
        throw std::invalid_argument("power_weight_cells: d <= 2 supported");
    const double h = g.cell_side();
    double corner_avg;
    if (g.dim() == 1) {
        corner_avg = std::pow(h, expo) / (expo + 1.0);
    } else {
        // avg over [0,h]^2 of r^{expo}: exact radial integral, then
        // int_0^{pi/4} sec^{expo+2}(t) dt by 32-point Gauss-Legendre,
        // doubled for the two symmetric angular halves.
        static const double gl_x[16] = {
            0.0483076656877383, 0.1444719615827965, 0.2392873622521371,
            0.3318686022821277, 0.4213512761306353, 0.5068999089322294,
            0.5877157572407623, 0.6630442669302152, 0.7321821187402897,
            0.7944837959679424, 0.8493676137325700, 0.8963211557660521,
            0.9349060759377397, 0.9647622555875064, 0.9856115115452684,
            0.9972638618494816};
        static const double gl_w[16] = {
            0.0965400885147278, 0.0956387200792749, 0.0938443990808046,
            0.0911738786957639, 0.0876520930044038, 0.0833119242269467,
            0.0781938957870703, 0.0723457941088485, 0.0658222227763618,
            0.0586840934785355, 0.0509980592623762, 0.0428358980222267,
            0.0342738629130214, 0.0253920653092621, 0.0162743947309057,
            0.0070186100094701};
        const double half = std::atan(1.0) / 2.0;  // pi/8
        double ang = 0.0;
        for (int k = 0; k < 16; ++k) {
            for (double sgn : {-1.0, 1.0}) {
                const double t = half + sgn * half * gl_x[k];
                ang += half * gl_w[k] * std::pow(std::cos(t), -(expo + 2.0));
            }
        }
        corner_avg = 2.0 * ang * std::pow(h, expo) / (expo + 2.0);
    }

    GridFunction v(g.cell_count());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto c = g.coords(i);
        bool corner_cell = true;
        double r2 = 0.0;
        const auto x = g.cell_center(i);
        for (int k = 0; k < g.dim(); ++k) {
            const double lo = g.origin() + c[k] * h;
            if (lo > 0.0 || lo + h < 0.0) corner_cell = false;
            r2 += x[k] * x[k];
        }
        v[i] = corner_cell ? corner_avg : std::pow(std::sqrt(r2), expo);
    }
    return v;
}
}  // namespace detail

/**
 * Membership proxy for v(x) = |x|^{beta d} in A_{p,(r,s)}: the constants are
 * computed over dyadic bases on origin-centered grids of increasing
 * resolution.  A constant sequence whose final successive ratio has dropped
 * to <= stabilize reads "Inside"; a sequence growing by >= growth at every
 * doubling reads "Outside"; anything else is "Inconclusive".  The default
 * cutoffs are calibrated from pilot ladders at n = 8..64: just-inside
 * exponents end below ratio 1.05-1.07 while just-outside exponents hold
 * ratios above 1.09 (the blow-up rate per doubling is 2^{|excess|}, so very
 * close calls remain inconclusive by design).
 */
inline PowerWeightReport power_weight_in_aprs(double beta, double p, double r,
                                              double s, int dim = 1,
                                              std::vector<int> resolutions = {8, 16,
                                                                              32, 64},
                                              double stabilize = 1.07,
                                              double growth = 1.09) {
    PowerWeightReport rep;
    rep.beta = beta;
    rep.resolutions = resolutions;
    for (int n : resolutions) {
        const Grid g = Grid::centered(dim, n);
        const GridFunction v = detail::power_weight_cells(g, beta);
        rep.constants.push_back(aprs_constant(v, p, r, s, dyadic_basis(g)));
    }
    if (rep.constants.size() < 2) return rep;
    bool growing = true;
    for (std::size_t i = 0; i + 1 < rep.constants.size(); ++i)
        if (rep.constants[i + 1] / rep.constants[i] < growth) growing = false;
    const double last = rep.constants.back() / rep.constants[rep.constants.size() - 2];
    rep.verdict = last <= stabilize ? Membership::Inside
                  : growing         ? Membership::Outside
                                    : Membership::Inconclusive;
    return rep;
}

/** Loads a weight table from CSV lines "cell_index,value"; '#' comments. */
inline GridFunction load_weight_csv(std::istream& in, std::size_t cells) {
    GridFunction w(cells, 0.0);
    std::vector<bool> seen(cells, false);
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        std::size_t idx = 0;
        double val = 0.0;
        char comma = 0;
        if (!(row >> idx >> comma >> val) || comma != ',')
            throw std::invalid_argument("load_weight_csv: malformed row: " + line);
        if (idx >= cells)
            throw std::invalid_argument("load_weight_csv: cell index out of range");
        w[idx] = val;
        seen[idx] = true;
    }
    for (std::size_t i = 0; i < cells; ++i)
        if (!seen[i])
            throw std::invalid_argument("load_weight_csv: missing cell " +
                                        std::to_string(i));
    detail::check_positive_weight(w, "load_weight_csv");
    return w;
}

inline GridFunction load_weight_csv(const std::string& path, std::size_t cells) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_weight_csv: cannot open " + path);
    return load_weight_csv(in, cells);
}

}  // namespace bfx
