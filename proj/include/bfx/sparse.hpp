#pragma once

/**
 * Sparse families, sparse operators, the discrete Riesz potential, and the
 * bisublinear/multilinear maximal forms.
 *
 * A sparse family is a collection of basis sets Q together with pairwise
 * disjoint subsets E_Q of Q whose measure is at least eta |Q|.  Families are
 * produced by a Calderon-Zygmund stopping construction over a laminar basis
 * (any two sets nested or disjoint) and carry their selection certificate:
 * the dyadic maximal function is dominated pointwise by the threshold ratio
 * times the sparse sum.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "basis.hpp"
#include "maximal.hpp"

namespace bfx {

/** One member of a sparse family: the set Q and its share E_Q. */
struct SparseMember {
    std::vector<std::uint32_t> cells;    // the set Q, sorted
    std::vector<std::uint32_t> e_cells;  // E_Q subset of Q, sorted
    double avg = 0.0;                    // <f>_{1,Q} at selection time
};

/** A sparse collection over a grid with measured sparsity parameter. */
struct SparseFamily {
    Grid grid{1, 2, 0.0, 1.0};
    double eta = 0.0;        // measured min |E_Q| / |Q|
    double threshold = 0.0;  // stopping ratio used by the selection
    std::vector<SparseMember> members;

    double set_measure(const SparseMember& m) const {
        return grid.cell_measure() * static_cast<double>(m.cells.size());
    }

    /** Exact structural checks: containment, disjointness, eta. */
    void validate() const {
        if (members.empty())
            throw std::invalid_argument("SparseFamily: no members");
        std::vector<char> taken(grid.cell_count(), 0);
        double least = kInf;
        for (const auto& m : members) {
            if (m.cells.empty() || m.e_cells.empty())
                throw std::invalid_argument("SparseFamily: empty member");
            for (auto c : m.e_cells) {
                if (!std::binary_search(m.cells.begin(), m.cells.end(), c))
                    throw std::invalid_argument(
                        "SparseFamily: E_Q escapes its set");
                if (taken[c])
                    throw std::invalid_argument(
                        "SparseFamily: E_Q sets overlap");
                taken[c] = 1;
            }
            least = std::min(least, static_cast<double>(m.e_cells.size()) /
                                        static_cast<double>(m.cells.size()));
        }
        if (!(least >= eta - 1e-12))
            throw std::invalid_argument("SparseFamily: eta overstated");
    }
};

namespace detail {
/**
 * Laminar check: every pair of sets is nested or disjoint; unique root.
 * Single descending-size sweep: each cell remembers the smallest set seen
 * so far that contains it; a new set must find one common owner (nested) or
 * none at all (disjoint from everything smaller processed so far).
 */
inline std::size_t laminar_root(const Basis& basis) {
    const auto& sets = basis.sets;
    std::vector<std::size_t> by_size(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) by_size[i] = i;
    std::sort(by_size.begin(), by_size.end(), [&](std::size_t i, std::size_t j) {
        return sets[i].cells.size() > sets[j].cells.size();
    });
    if (by_size.empty() ||
        sets[by_size.front()].cells.size() != basis.grid.cell_count())
        throw std::invalid_argument("sparse_select: basis has no root set");
    const std::size_t none = sets.size();
    std::vector<std::size_t> owner(basis.grid.cell_count(), none);
    for (std::size_t k : by_size) {
        const std::size_t o = owner[sets[k].cells.front()];
        for (auto c : sets[k].cells)
            if (owner[c] != o)
                throw std::invalid_argument("sparse_select: basis is not laminar");
        for (auto c : sets[k].cells) owner[c] = k;
    }
    return by_size.front();
}
}  // namespace detail

/**
 * Calderon-Zygmund stopping selection.  Starting from the root, the stopping
 * children of a stopping set Q are the inclusion-maximal basis sets Q'
 * strictly inside Q with <f>_{1,Q'} >= a <f>_{1,Q}; E_Q is Q minus its
 * stopping children.  The sum of the children measures is at most |Q| / a,
 * so the measured eta is at least 1 - 1/a.  Passing a = 0 selects the
 * default threshold 2^{d+1}.
 */
inline SparseFamily sparse_select(const GridFunction& f, const Basis& basis,
                                  double a = 0.0) {
    for (double x : f)
        if (!(x >= 0.0))
            throw std::invalid_argument("sparse_select: f must be >= 0");
    if (a == 0.0) a = std::pow(2.0, basis.grid.dim() + 1);
    if (!(a > 1.0))
        throw std::invalid_argument("sparse_select: threshold must exceed 1");
    const std::size_t root = detail::laminar_root(basis);
    const auto& sets = basis.sets;

    std::vector<double> avg(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i)
        avg[i] = power_mean(f, sets[i].cells, 1.0);

    // Indices sorted by size descending, so the first qualifying superset
    // found is the inclusion-maximal one.
    std::vector<std::size_t> by_size(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) by_size[i] = i;
    std::sort(by_size.begin(), by_size.end(), [&](std::size_t i, std::size_t j) {
        return sets[i].cells.size() > sets[j].cells.size();
    });

    SparseFamily fam;
    fam.grid = basis.grid;
    fam.threshold = a;

    std::vector<std::size_t> pending{root};
    double least = 1.0;
    while (!pending.empty()) {
        const std::size_t qi = pending.back();
        pending.pop_back();
        const auto& q = sets[qi];
        std::vector<std::size_t> children;
        if (avg[qi] > 0.0) {
            const double bar = a * avg[qi];
            std::vector<char> covered(basis.grid.cell_count(), 0);
            for (std::size_t k : by_size) {
                if (sets[k].cells.size() >= q.cells.size()) continue;
                if (avg[k] < bar || !sets[k].subset_of(q)) continue;
                if (covered[sets[k].cells.front()]) continue;  // inside a taken child
                children.push_back(k);
                for (auto c : sets[k].cells) covered[c] = 1;
            }
        }
        SparseMember m;
        m.cells = q.cells;
        m.avg = avg[qi];
        std::vector<char> drop(basis.grid.cell_count(), 0);
        for (std::size_t k : children) {
            for (auto c : sets[k].cells) drop[c] = 1;
            pending.push_back(k);
        }
        for (auto c : q.cells)
            if (!drop[c]) m.e_cells.push_back(c);
        least = std::min(least, static_cast<double>(m.e_cells.size()) /
                                    static_cast<double>(m.cells.size()));
        fam.members.push_back(std::move(m));
    }
    fam.eta = least;
    fam.validate();
    return fam;
}

/**
 * Largest pointwise ratio of the basis maximal function against the sparse
 * sum A_S f = sum_Q <f>_{1,Q} 1_Q.  For the family selected from the same f
 * this is at most the stopping threshold, machine-exactly.
 */
inline double sparse_domination_ratio(const GridFunction& f,
                                      const Basis& basis,
                                      const SparseFamily& fam) {
    const GridFunction mf = maximal(f, basis, 1.0);
    GridFunction sum(f.size(), 0.0);
    for (const auto& m : fam.members) {
        const double qavg = power_mean(f, m.cells, 1.0);
        for (auto c : m.cells) sum[c] += qavg;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (mf[i] == 0.0) continue;
        if (sum[i] == 0.0) return kInf;
        worst = std::max(worst, mf[i] / sum[i]);
    }
    return worst;
}

/** Sparse operator sum_Q |Q|^{lambda/d} <f>_{r,Q} 1_Q, exact. */
inline GridFunction sparse_operator(const SparseFamily& fam,
                                    const GridFunction& f, double lambda,
                                    double r) {
    const double d = static_cast<double>(fam.grid.dim());
    if (!(lambda >= 0.0) || !(lambda < d))
        throw std::invalid_argument("sparse_operator: lambda outside [0, d)");
    if (!(r > 0.0))
        throw std::invalid_argument("sparse_operator: r must be positive");
    GridFunction out(f.size(), 0.0);
    for (const auto& m : fam.members) {
        const double val = std::pow(fam.set_measure(m), lambda / d) *
                           power_mean(f, m.cells, recip(r));
        for (auto c : m.cells) out[c] += val;
    }
    return out;
}

/** Multilinear sparse model sum_Q prod_j <f_j>_{r_j,Q} 1_Q. */
inline GridFunction sparse_multilinear(const SparseFamily& fam,
                                       const std::vector<GridFunction>& fs,
                                       const std::vector<double>& rs) {
    if (fs.empty() || fs.size() != rs.size())
        throw std::invalid_argument("sparse_multilinear: mismatched inputs");
    GridFunction out(fs.front().size(), 0.0);
    for (const auto& m : fam.members) {
        double val = 1.0;
        for (std::size_t j = 0; j < fs.size(); ++j)
            val *= power_mean(fs[j], m.cells, recip(rs[j]));
        for (auto c : m.cells) out[c] += val;
    }
    return out;
}

namespace detail {
/** Adaptive Simpson on [a, b] with absolute tolerance. */
template <class F>
inline double simpson_step(F&& fn, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = fn(lm), frm = fn(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
inline double adaptive_simpson(F&& fn, double a, double b, double tol) {
    const double fa = fn(a), fb = fn(b), fm = fn(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(fn, a, b, fa, fm, fb, whole, tol, 48);
}

/** Integral over one grid cell of |z - center|^{lambda - d}. */
inline double riesz_diagonal(const Grid& g, double lambda) {
    const double h = g.cell_side();
    if (g.dim() == 1) return 2.0 * std::pow(h / 2.0, lambda) / lambda;
    // Square cell: 8 symmetric octants, radial part exact, angular part by
    // adaptive quadrature of sec^lambda over [0, pi/4].
    const double ang = adaptive_simpson(
        [lambda](double t) { return std::pow(std::cos(t), -lambda); }, 0.0,
        std::atan(1.0), 1e-12);
    return (8.0 / lambda) * std::pow(h / 2.0, lambda) * ang;
}
}  // namespace detail

/**
 * Discrete Riesz potential: kernel |x_c - y_c|^{lambda - d} between cell
 * centers times the cell measure, with the diagonal cell replaced by the
 * exact cell integral of the kernel.  Positive and self-adjoint.
 */
inline GridFunction riesz_potential(const GridFunction& f, const Grid& g,
                                    double lambda) {
    const int d = g.dim();
    if (!(lambda > 0.0) || !(lambda < static_cast<double>(d)))
        throw std::invalid_argument("riesz_potential: lambda outside (0, d)");
    if (d > 2)
        throw std::invalid_argument("riesz_potential: d <= 2 supported");
    const std::size_t N = g.cell_count();
    if (f.size() != N)
        throw std::invalid_argument("riesz_potential: size mismatch");
    const double m = g.cell_measure();
    const double diag = detail::riesz_diagonal(g, lambda);
    const double expo = lambda - static_cast<double>(d);

    std::vector<std::array<double, 3>> centers(N);
    for (std::size_t i = 0; i < N; ++i) centers[i] = g.cell_center(i);

    GridFunction out(N, 0.0);
    for (std::size_t x = 0; x < N; ++x) {
        double acc = f[x] * diag;
        for (std::size_t y = 0; y < N; ++y) {
            if (y == x) continue;
            double r2 = 0.0;
            for (int k = 0; k < d; ++k) {
                const double dz = centers[x][k] - centers[y][k];
                r2 += dz * dz;
            }
            acc += f[y] * std::pow(r2, 0.5 * expo) * m;
        }
        out[x] = acc;
    }
    return out;
}

/** Bisublinear maximal M_{r,s'}(f,g) = sup_Q <f>_{r,Q} <g>_{s',Q} 1_Q. */
inline GridFunction bisublinear_maximal(const GridFunction& f,
                                        const GridFunction& g, double r,
                                        double s_dual, const Basis& basis) {
    if (!(r > 0.0) || !(s_dual > 0.0))
        throw std::invalid_argument("bisublinear_maximal: exponents must be positive");
    GridFunction out(f.size(), 0.0);
    for (const auto& E : basis.sets) {
        const double val = power_mean(f, E.cells, recip(r)) *
                           power_mean(g, E.cells, recip(s_dual));
        for (auto c : E.cells) out[c] = std::max(out[c], val);
    }
    return out;
}

/** Multilinear variant sup_Q prod_j <f_j>_{r_j,Q} <g>_{s',Q} 1_Q. */
inline GridFunction multilinear_maximal(const std::vector<GridFunction>& fs,
                                        const GridFunction& g,
                                        const std::vector<double>& rs,
                                        double s_dual, const Basis& basis) {
    if (fs.empty() || fs.size() != rs.size())
        throw std::invalid_argument("multilinear_maximal: mismatched inputs");
    GridFunction out(g.size(), 0.0);
    for (const auto& E : basis.sets) {
        double val = power_mean(g, E.cells, recip(s_dual));
        for (std::size_t j = 0; j < fs.size(); ++j)
            val *= power_mean(fs[j], E.cells, recip(rs[j]));
        for (auto c : E.cells) out[c] = std::max(out[c], val);
    }
    return out;
}

/**
 * Sparse form sum_Q |Q|^{lambda/d} <f>_{r,Q} <g>_{s',Q} |Q|.  The
 * disjointness argument is re-checked on every call: the form never exceeds
 * eta^{-1} times the L^1 norm of the members' own majorant
 * sup_Q |Q|^{lambda/d} <f>_{r,Q} <g>_{s',Q} 1_Q.
 */
inline double sparse_form(const SparseFamily& fam, const GridFunction& f,
                          const GridFunction& g, double r, double s_dual,
                          double lambda = 0.0) {
    fam.validate();
    const double d = static_cast<double>(fam.grid.dim());
    if (!(lambda >= 0.0) || !(lambda < d))
        throw std::invalid_argument("sparse_form: lambda outside [0, d)");
    double form = 0.0;
    GridFunction major(f.size(), 0.0);
    for (const auto& m : fam.members) {
        const double measure = fam.set_measure(m);
        const double val = std::pow(measure, lambda / d) *
                           power_mean(f, m.cells, recip(r)) *
                           power_mean(g, m.cells, recip(s_dual));
        form += val * measure;
        for (auto c : m.cells) major[c] = std::max(major[c], val);
    }
    double l1 = 0.0;
    for (double x : major) l1 += x * fam.grid.cell_measure();
    if (form > (l1 / fam.eta) * (1.0 + 1e-12))
        throw std::logic_error("sparse_form: disjointness bound violated");
    return form;
}

}  // namespace bfx
