#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bfx/grid.hpp"

namespace bfx {

/**
 * One member set E of a basis: a nonempty list of cell indices with its
 * measure, plus the cube descriptor (corner + side in cells) when the set is
 * a plain axis-aligned cube.  A bitmask over cells accelerates subset tests.
 */
struct BasisSet {
    std::vector<std::uint32_t> cells;   // sorted
    double measure = 0.0;
    std::array<int, 3> corner{0, 0, 0}; // integer-cell corner when cubical
    int side_cells = 0;                 // 0 when the set is not a plain cube
    std::vector<std::uint64_t> mask;

    bool contains(std::uint32_t cell) const {
        return (mask[cell >> 6] >> (cell & 63)) & 1u;
    }
    bool subset_of(const BasisSet& other) const {
        for (std::size_t w = 0; w < mask.size(); ++w)
            if (mask[w] & ~other.mask[w]) return false;
        return true;
    }
    bool same_cells(const BasisSet& other) const { return mask == other.mask; }
};

/**
 * A finite basis of sets over a grid.  Properties required of a basis:
 *   (i)  the sets cover the grid;
 *   (ii) every pair of cells lies in some common set.
 * (The countable-exhaustion property is vacuous on finite grids.)
 */
struct Basis {
    enum class Flavor { DyadicInCube, ShiftedDyadicUnion, AllCubes };

    Grid grid;
    Flavor flavor;
    std::vector<BasisSet> sets;
};

namespace detail {

inline BasisSet make_set(const Grid& g, std::vector<std::uint32_t> cells) {
    BasisSet s;
    std::sort(cells.begin(), cells.end());
    s.cells = std::move(cells);
    s.measure = g.cell_measure() * static_cast<double>(s.cells.size());
    s.mask.assign((g.cell_count() + 63) / 64, 0);
    for (auto c : s.cells) s.mask[c >> 6] |= (std::uint64_t{1} << (c & 63));
    return s;
}

/** Axis-aligned cube of side `side` cells at integer corner (non-wrapping). */
inline BasisSet make_cube(const Grid& g, const std::array<int, 3>& corner, int side) {
    std::vector<std::uint32_t> cells;
    std::array<int, 3> c{0, 0, 0};
    int nz = (g.dim() > 2) ? side : 1, ny = (g.dim() > 1) ? side : 1;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < side; ++x) {
                c = {corner[0] + x, corner[1] + y, corner[2] + z};
                cells.push_back(static_cast<std::uint32_t>(g.index(c)));
            }
    BasisSet s = make_set(g, std::move(cells));
    s.corner = corner;
    s.side_cells = side;
    return s;
}

}  // namespace detail

/**
 * All dyadic subcubes of the base cube, from the root down to single cells.
 * Every set sits inside the root, so the pair property holds.  On a
 * one-dimensional grid this yields exactly 2n-1 intervals.
 */
inline Basis dyadic_basis(const Grid& g) {
    Basis b{g, Basis::Flavor::DyadicInCube, {}};
    for (int side = g.n(); side >= 1; side /= 2) {
        int per_axis = g.n() / side;
        int nz = (g.dim() > 2) ? per_axis : 1, ny = (g.dim() > 1) ? per_axis : 1;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < per_axis; ++x)
                    b.sets.push_back(
                        detail::make_cube(g, {x * side, y * side, z * side}, side));
    }
    return b;
}

struct ShiftedDyadicFamily {
    std::vector<Basis> translates;  // 3^d translated dyadic systems
    Basis merged;                   // union with duplicate sets removed
};

/**
 * The 3^d translated dyadic systems, wrapped periodically across the base
 * cube, together with their union.  Per-axis shifts are round(t*n/3) cells,
 * t = 0,1,2 — the discrete analogue of the one-third translation trick.  The
 * merged family dominates every axis-aligned cube of side <= n/2 cells with
 * measure ratio at most 6^d (checked exhaustively in the tests).
 */
inline ShiftedDyadicFamily shifted_dyadic_bases(const Grid& g) {
    const int n = g.n();
    std::array<int, 3> axis_shifts{};
    std::vector<int> shift_values;
    for (int t = 0; t < 3; ++t)
        shift_values.push_back(static_cast<int>(std::lround(t * n / 3.0)) % n);

    ShiftedDyadicFamily fam{{}, Basis{g, Basis::Flavor::ShiftedDyadicUnion, {}}};
    int combos = 1;
    for (int k = 0; k < g.dim(); ++k) combos *= 3;
    for (int combo = 0; combo < combos; ++combo) {
        int rest = combo;
        for (int k = 0; k < g.dim(); ++k) {
            axis_shifts[k] = shift_values[rest % 3];
            rest /= 3;
        }
        Basis b{g, Basis::Flavor::ShiftedDyadicUnion, {}};
        for (int side = n; side >= 1; side /= 2) {
            int per_axis = n / side;
            int nz = (g.dim() > 2) ? per_axis : 1, ny = (g.dim() > 1) ? per_axis : 1;
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < per_axis; ++x) {
                        // Wrapped product segment [shift + k*side, ...+side) mod n.
                        std::array<int, 3> anchor{x * side, y * side, z * side};
                        std::vector<std::uint32_t> cells;
                        std::array<int, 3> c{0, 0, 0};
                        int mz = (g.dim() > 2) ? side : 1, my = (g.dim() > 1) ? side : 1;
                        for (int dz = 0; dz < mz; ++dz)
                            for (int dy = 0; dy < my; ++dy)
                                for (int dx = 0; dx < side; ++dx) {
                                    std::array<int, 3> off{dx, dy, dz};
                                    for (int k = 0; k < g.dim(); ++k)
                                        c[k] = (anchor[k] + axis_shifts[k] + off[k]) % n;
                                    cells.push_back(static_cast<std::uint32_t>(g.index(c)));
                                }
                        b.sets.push_back(detail::make_set(g, std::move(cells)));
                    }
        }
        fam.translates.push_back(std::move(b));
    }

    for (const auto& b : fam.translates)
        for (const auto& s : b.sets) {
            bool dup = false;
            for (const auto& t : fam.merged.sets)
                if (t.same_cells(s)) {
                    dup = true;
                    break;
                }
            if (!dup) fam.merged.sets.push_back(s);
        }
    return fam;
}

/**
 * All axis-aligned cubes with integer-cell corners and sides 1..max_side
 * (non-wrapping).  The pair property needs the full cube, so max_side < n is
 * rejected unless the caller explicitly waives it (e.g. for domination
 * experiments over restricted side lengths).
 */
inline Basis cube_basis(const Grid& g, int max_side, bool require_pair_property = true) {
    if (max_side < 1 || max_side > g.n())
        throw std::invalid_argument("cube_basis: max_side out of range");
    if (require_pair_property && max_side < g.n())
        throw std::invalid_argument(
            "cube_basis: max_side < n violates the common-set property for far cells");
    Basis b{g, Basis::Flavor::AllCubes, {}};
    for (int side = 1; side <= max_side; ++side) {
        int per_axis = g.n() - side + 1;
        int nz = (g.dim() > 2) ? per_axis : 1, ny = (g.dim() > 1) ? per_axis : 1;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < per_axis; ++x)
                    b.sets.push_back(detail::make_cube(g, {x, y, z}, side));
    }
    return b;
}

/**
 * Smallest constant C such that every set E of `e_basis` is contained in
 * some F of `f_basis` with |F| <= C |E|; absent when some E has no superset
 * at all.  Domination transfers maximal-operator bounds:
 * M_p over `e_basis` <= C^{1/p} * (M_p over `f_basis`) pointwise.
 */
inline std::optional<double> basis_dominated(const Basis& e_basis, const Basis& f_basis) {
    if (!e_basis.grid.same_layout(f_basis.grid))
        throw std::invalid_argument("basis_dominated: bases live on different grids");
    double worst = 1.0;
    for (const auto& e : e_basis.sets) {
        double best = kInf;
        for (const auto& f : f_basis.sets) {
            if (f.measure < e.measure || f.measure >= best) continue;
            if (e.subset_of(f)) best = f.measure;
        }
        if (best == kInf) return std::nullopt;
        worst = std::max(worst, best / e.measure);
    }
    return worst;
}

/** Exhaustive check of basis properties (i) and (ii). */
inline bool basis_properties_hold(const Basis& b) {
    const std::size_t nc = b.grid.cell_count();
    // Property (i): coverage.
    std::vector<char> covered(nc, 0);
    for (const auto& s : b.sets)
        for (auto c : s.cells) covered[c] = 1;
    for (auto f : covered)
        if (!f) return false;
    // Property (ii): short-circuit if some set is everything.
    for (const auto& s : b.sets)
        if (s.cells.size() == nc) return true;
    for (std::uint32_t a = 0; a < nc; ++a)
        for (std::uint32_t c = a + 1; c < nc; ++c) {
            bool found = false;
            for (const auto& s : b.sets)
                if (s.contains(a) && s.contains(c)) {
                    found = true;
                    break;
                }
            if (!found) return false;
        }
    return true;
}

}  // namespace bfx
