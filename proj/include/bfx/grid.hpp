#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bfx/numeric.hpp"

namespace bfx {

/**
 * Finite uniform grid over a cube in R^d (d <= 3) with n = 2^m cells per
 * side.  Functions on the measure space are piecewise constant on cells, so
 * every cell average is an exact finite sum.  Cells are indexed in row-major
 * order over the integer lattice coordinates.
 */
class Grid {
  public:
    /** Grid on [0, side)^d. */
    static Grid unit(int dim, int n, double side = 1.0) {
        return Grid(dim, n, 0.0, side);
    }

    /** Origin-centered grid on [-half, half)^d (used for radial weights). */
    static Grid centered(int dim, int n, double half = 1.0) {
        return Grid(dim, n, -half, 2.0 * half);
    }

    Grid(int dim, int n, double origin, double side)
        : dim_(dim), n_(n), origin_(origin), side_(side) {
        if (dim < 1 || dim > 3) throw std::invalid_argument("Grid: dim must be 1..3");
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::invalid_argument("Grid: cells per side must be a power of two >= 2");
        if (!(side > 0.0)) throw std::invalid_argument("Grid: side must be positive");
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    double origin() const { return origin_; }
    double side() const { return side_; }

    std::size_t cell_count() const {
        std::size_t c = 1;
        for (int k = 0; k < dim_; ++k) c *= static_cast<std::size_t>(n_);
        return c;
    }
    double cell_side() const { return side_ / n_; }
    double cell_measure() const {
        double m = 1.0;
        for (int k = 0; k < dim_; ++k) m *= cell_side();
        return m;
    }
    double total_measure() const { return cell_measure() * cell_count(); }

    /** Integer lattice coordinates of a cell (unused axes are 0). */
    std::array<int, 3> coords(std::size_t idx) const {
        std::array<int, 3> c{0, 0, 0};
        for (int k = 0; k < dim_; ++k) {
            c[k] = static_cast<int>(idx % n_);
            idx /= n_;
        }
        return c;
    }

    std::size_t index(const std::array<int, 3>& c) const {
        std::size_t idx = 0;
        for (int k = dim_ - 1; k >= 0; --k) idx = idx * n_ + static_cast<std::size_t>(c[k]);
        return idx;
    }

    /** Real-space center of a cell. */
    std::array<double, 3> cell_center(std::size_t idx) const {
        auto c = coords(idx);
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int k = 0; k < dim_; ++k) x[k] = origin_ + (c[k] + 0.5) * cell_side();
        return x;
    }

    bool same_layout(const Grid& other) const {
        return dim_ == other.dim_ && n_ == other.n_ && origin_ == other.origin_ &&
               side_ == other.side_;
    }

  private:
    int dim_;
    int n_;
    double origin_;
    double side_;
};

/** Cell values of a piecewise-constant function. */
using GridFunction = std::vector<double>;

}  // namespace bfx
