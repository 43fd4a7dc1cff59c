#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "bfx/weights.hpp"

using namespace bfx;

namespace {

GridFunction random_weight(std::mt19937_64& rng, std::size_t n) {
    GridFunction w(n);
    for (auto& x : w) x = std::pow(10.0, uniform(rng, -1.0, 1.0));
    return w;
}

}  // namespace

TEST_CASE("Muckenhoupt-type constants: hand values on the step weight") {
    Grid g = Grid::unit(1, 4);
    Basis dy = dyadic_basis(g);
    GridFunction w{2.0, 2.0, 1.0, 1.0};

    CHECK(aprs_constant(w, 2.0, 1.0, kInf, dy) == Catch::Approx(1.25).epsilon(1e-14));
    CHECK(aprs_constant(w, 1.0, 1.0, kInf, dy) == Catch::Approx(1.5).epsilon(1e-15));
    CHECK(a1_constant(w, dy) == 1.5);
    CHECK(fujii_wilson_constant(w, dy) == 7.0 / 6.0);
}

TEST_CASE("Muckenhoupt-type constants: normalization and lower bound") {
    Grid g = Grid::unit(1, 8);
    Basis dy = dyadic_basis(g);
    std::mt19937_64 rng = seeded_rng(41);

    SECTION("constant weights have constant exactly 1") {
        GridFunction c(8, 2.75);
        for (auto [p, r, s] : {std::tuple{2.0, 1.0, kInf}, {2.0, 1.5, 4.0},
                               {1.0, 1.0, kInf}, {3.0, 3.0, 5.0}}) {
            CHECK(aprs_constant(c, p, r, s, dy) == Catch::Approx(1.0).epsilon(1e-13));
        }
        CHECK(a1_constant(c, dy) == Catch::Approx(1.0).epsilon(1e-13));
        CHECK(ainf_constant(c, dy) == Catch::Approx(1.0).epsilon(1e-13));
        CHECK(fujii_wilson_constant(c, dy) == Catch::Approx(1.0).epsilon(1e-13));
    }

    SECTION("every constant is at least 1") {
        for (int trial = 0; trial < 30; ++trial) {
            GridFunction w = random_weight(rng, 8);
            const double r = uniform(rng, 0.5, 2.0);
            const double s = r + uniform(rng, 0.5, 4.0);
            const double p = 1.0 / uniform(rng, recip(s), recip(r));
            CHECK(aprs_constant(w, p, r, s, dy) >= 1.0 - 1e-12);
            CHECK(a1_constant(w, dy) >= 1.0 - 1e-12);
            CHECK(fujii_wilson_constant(w, dy) >= 1.0 - 1e-12);
        }
    }

    SECTION("exponent window is enforced") {
        GridFunction w = random_weight(rng, 8);
        CHECK_THROWS_AS(aprs_constant(w, 0.9, 1.0, kInf, dy), std::invalid_argument);
        CHECK_THROWS_AS(aprs_constant(w, 5.0, 1.0, 4.0, dy), std::invalid_argument);
        GridFunction bad(8, 1.0);
        bad[3] = 0.0;
        CHECK_THROWS_AS(aprs_constant(bad, 2.0, 1.0, kInf, dy), std::invalid_argument);
    }
}

TEST_CASE("full-range duality symmetry of the weight constant") {
    Grid g = Grid::unit(1, 8);
    Basis dy = dyadic_basis(g);
    std::mt19937_64 rng = seeded_rng(42);

    for (int trial = 0; trial < 30; ++trial) {
        GridFunction w = random_weight(rng, 8);
        GridFunction winv(8);
        for (int i = 0; i < 8; ++i) winv[i] = 1.0 / w[i];
        const double p = uniform(rng, 1.05, 8.0);
        const double pc = p / (p - 1.0);
        const double lhs = aprs_constant(w, p, 1.0, kInf, dy);
        const double rhs = aprs_constant(winv, pc, 1.0, kInf, dy);
        CHECK(rel_err(lhs, rhs) < 1e-13);
    }
}

TEST_CASE("limited-range duality symmetry of the weight constant") {
    Grid g = Grid::unit(1, 4);
    Basis dy = dyadic_basis(g);

    SECTION("hand value on the step weight") {
        GridFunction w{2.0, 2.0, 1.0, 1.0};
        GridFunction winv{0.5, 0.5, 1.0, 1.0};
        // r = 1.2, s = 4, p = 2; the partner exponent has
        // 1/sigma = 1/r + 1/s - 1/p = 7/12
        const double lhs = aprs_constant_recip(w, 0.5, 1.0 / 1.2, 0.25, dy);
        const double rhs = aprs_constant_recip(winv, 7.0 / 12.0, 1.0 / 1.2, 0.25, dy);
        CHECK(lhs == Catch::Approx(1.4094907833108323).epsilon(1e-13));
        CHECK(rhs == Catch::Approx(1.4094907833108323).epsilon(1e-13));
    }

    SECTION("random weights") {
        Grid g8 = Grid::unit(1, 8);
        Basis dy8 = dyadic_basis(g8);
        std::mt19937_64 rng = seeded_rng(43);
        for (int trial = 0; trial < 30; ++trial) {
            GridFunction w = random_weight(rng, 8);
            GridFunction winv(8);
            for (int i = 0; i < 8; ++i) winv[i] = 1.0 / w[i];
            const double ra = uniform(rng, 0.6, 1.0);
            const double sa = uniform(rng, 0.0, 0.4);
            const double pa = uniform(rng, sa, ra);
            const double siga = ra + sa - pa;  // stays inside [sa, ra]
            const double lhs = aprs_constant_recip(w, pa, ra, sa, dy8);
            const double rhs = aprs_constant_recip(winv, siga, ra, sa, dy8);
            CHECK(rel_err(lhs, rhs) < 1e-13);
        }
    }
}

TEST_CASE("two-weight off-diagonal constant") {
    Grid g = Grid::unit(1, 4);
    Basis dy = dyadic_basis(g);
    GridFunction w{2.0, 2.0, 1.0, 1.0};

    SECTION("alpha = 0 with equal weights reduces to the one-weight constant") {
        OffDiagParams par;
        par.alpha = 0.0;
        par.ra1 = par.ra2 = 1.0;
        par.sa1 = par.sa2 = 0.0;
        par.pa1 = par.pa2 = 0.5;
        const double two = two_weight_offdiag_constant(w, w, par, dy);
        CHECK(two == aprs_constant(w, 2.0, 1.0, kInf, dy));
    }

    SECTION("a negative shift models the fractional-integral exponents") {
        // p_1 = 2 -> p_2 = 4, alpha = 1/p_2 - 1/p_1 = -1/4, window (1, inf)
        OffDiagParams par;
        par.alpha = -0.25;
        par.ra1 = 1.0;
        par.ra2 = 0.75;
        par.sa1 = 0.0;
        par.sa2 = -0.25;
        par.pa1 = 0.5;
        par.pa2 = 0.25;
        const double val = two_weight_offdiag_constant(w, w, par, dy);
        // both power means are quadratic here, same as the p = 2 constant
        CHECK(val == Catch::Approx(1.25).epsilon(1e-14));
    }

    SECTION("mismatched windows are rejected") {
        OffDiagParams par;
        par.alpha = -0.25;
        par.ra1 = 1.0;
        par.ra2 = 0.75;
        par.sa1 = 0.0;
        par.sa2 = 0.0;  // not a translate by alpha
        par.pa1 = 0.5;
        par.pa2 = 0.25;
        CHECK_THROWS_AS(two_weight_offdiag_constant(w, w, par, dy),
                        std::invalid_argument);
        par.sa2 = -0.25;
        par.pa2 = 0.8;  // outside [1/s_2, 1/r_2]
        par.pa1 = 0.8 + 0.25;
        CHECK_THROWS_AS(two_weight_offdiag_constant(w, w, par, dy),
                        std::invalid_argument);
    }
}

TEST_CASE("pointwise A_1 family and the Fujii-Wilson bound") {
    Grid g = Grid::unit(1, 8);
    Basis dy = dyadic_basis(g);
    std::mt19937_64 rng = seeded_rng(44);

    for (int trial = 0; trial < 100; ++trial) {
        GridFunction w = random_weight(rng, 8);
        const double a1 = a1_constant(w, dy);
        // the A_1 constant written as a two-mean supremum
        CHECK(rel_err(a1, aprs_constant(w, 1.0, 1.0, kInf, dy)) < 1e-14);
        // duality collapse at the other endpoint
        GridFunction winv(8);
        for (int i = 0; i < 8; ++i) winv[i] = 1.0 / w[i];
        CHECK(ainf_constant(w, dy) == a1_constant(winv, dy));
        // Fujii-Wilson is never larger than A_1
        CHECK(fujii_wilson_constant(w, dy) <= a1 * (1.0 + 1e-12));
    }
}

TEST_CASE("endpoint weight interpolation") {
    Grid g = Grid::unit(1, 4);
    Basis dy = dyadic_basis(g);

    SECTION("hand values") {
        GridFunction w{3.0, 1.0, 2.0, 0.5};
        GridFunction v{1.0, 2.0, 0.25, 1.0};
        InterpolatedWeight iw = interpolate_weights(w, v, 2.0, 1.0, 4.0, dy);
        CHECK(iw.theta == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(iw.endpoint_r == Catch::Approx(3.4400630744228358).epsilon(1e-13));
        CHECK(iw.endpoint_s == Catch::Approx(3.5963258278330152).epsilon(1e-13));
        CHECK(iw.bound == Catch::Approx(3.5434650740481186).epsilon(1e-13));
        CHECK(iw.measured == Catch::Approx(1.6421722994825778).epsilon(1e-13));
        CHECK(iw.measured <= iw.bound);
    }

    SECTION("the interpolation bound holds for random endpoint pairs") {
        Grid g8 = Grid::unit(1, 8);
        Basis dy8 = dyadic_basis(g8);
        std::mt19937_64 rng = seeded_rng(45);
        for (int trial = 0; trial < 100; ++trial) {
            GridFunction w = random_weight(rng, 8);
            GridFunction v = random_weight(rng, 8);
            const double p = 1.0 / uniform(rng, 0.25, 1.0);
            InterpolatedWeight iw = interpolate_weights(w, v, p, 1.0, 4.0, dy8);
            CHECK(iw.measured <= iw.bound * (1.0 + 1e-12));
        }
    }

    SECTION("degenerate endpoints return the input weight") {
        std::mt19937_64 rng = seeded_rng(46);
        GridFunction w = random_weight(rng, 4);
        GridFunction v = random_weight(rng, 4);
        InterpolatedWeight at_r = interpolate_weights(w, v, 1.0, 1.0, 4.0, dy);
        CHECK(at_r.theta == 0.0);
        for (int i = 0; i < 4; ++i)
            CHECK(at_r.weight[i] == Catch::Approx(w[i]).epsilon(1e-15));
        CHECK(rel_err(at_r.measured, at_r.endpoint_r) < 1e-14);
        InterpolatedWeight at_s = interpolate_weights(w, v, 4.0, 1.0, 4.0, dy);
        CHECK(at_s.theta == 1.0);
        for (int i = 0; i < 4; ++i)
            CHECK(at_s.weight[i] == Catch::Approx(v[i]).epsilon(1e-15));
        CHECK(rel_err(at_s.measured, at_s.endpoint_s) < 1e-14);
    }
}

TEST_CASE("power-weight membership ladders") {
    SECTION("beta = 0 is flat and inside") {
        PowerWeightReport rep = power_weight_in_aprs(0.0, 2.0, 1.0, kInf);
        CHECK(rep.verdict == Membership::Inside);
        for (double c : rep.constants) CHECK(c == Catch::Approx(1.0).epsilon(1e-12));
    }

    SECTION("beta = 0.4 stabilizes (inside)") {
        PowerWeightReport rep = power_weight_in_aprs(0.4, 2.0, 1.0, kInf);
        REQUIRE(rep.constants.size() == 4);
        CHECK(rep.constants.front() == Catch::Approx(1.215806547438039).epsilon(1e-12));
        CHECK(rep.constants.back() == Catch::Approx(1.3874031916356941).epsilon(1e-12));
        CHECK(rep.verdict == Membership::Inside);
    }

    SECTION("beta = 0.6 keeps growing (outside)") {
        PowerWeightReport rep = power_weight_in_aprs(0.6, 2.0, 1.0, kInf);
        REQUIRE(rep.constants.size() == 4);
        CHECK(rep.constants.front() == Catch::Approx(1.4895216339342447).epsilon(1e-12));
        CHECK(rep.constants.back() == Catch::Approx(2.1355253815657753).epsilon(1e-12));
        CHECK(rep.verdict == Membership::Outside);
    }

    SECTION("a borderline exponent refuses to decide") {
        PowerWeightReport rep = power_weight_in_aprs(0.55, 2.0, 1.0, kInf);
        CHECK(rep.verdict == Membership::Inconclusive);
    }

    SECTION("planar grids use the quadrature corner average") {
        PowerWeightReport rep =
            power_weight_in_aprs(0.3, 2.0, 1.0, kInf, 2, {4, 8, 16});
        REQUIRE(rep.constants.size() == 3);
        for (double c : rep.constants) CHECK(c >= 1.0);
        // the ladder is monotone while the grid resolves the singularity
        CHECK(rep.constants[1] >= rep.constants[0]);

        Grid g3 = Grid::centered(3, 4);
        CHECK_THROWS_AS(detail::power_weight_cells(g3, 0.3), std::invalid_argument);
        Grid g1 = Grid::centered(1, 4);
        CHECK_THROWS_AS(detail::power_weight_cells(g1, -1.0), std::invalid_argument);
    }

    SECTION("the one-dimensional corner average is the exact cell mean") {
        // int_0^h x^e dx / h = h^e/(e+1)
        Grid g = Grid::centered(1, 8);
        const double beta = 0.7;
        GridFunction v = detail::power_weight_cells(g, beta);
        const double h = g.cell_side();
        CHECK(v[4] == Catch::Approx(std::pow(h, beta) / (beta + 1.0)).epsilon(1e-15));
        CHECK(v[3] == v[4]);  // mirrored cell touching the origin
        // away from the origin the value is the center sample
        CHECK(v[0] == Catch::Approx(std::pow(0.875, beta)).epsilon(1e-15));
    }
}

TEST_CASE("weight tables load from CSV") {
    SECTION("roundtrip with comments and blank lines") {
        std::istringstream in(
            "# cell_index,value\n"
            "\n"
            "0,2.0\n"
            "3,0.5\n"
            "1,1.25\n"
            "2,4.0\n");
        GridFunction w = load_weight_csv(in, 4);
        CHECK(w == GridFunction{2.0, 1.25, 4.0, 0.5});
    }

    SECTION("malformed and incomplete tables are rejected") {
        std::istringstream bad("0;2.0\n");
        CHECK_THROWS_AS(load_weight_csv(bad, 4), std::invalid_argument);
        std::istringstream oob("7,1.0\n");
        CHECK_THROWS_AS(load_weight_csv(oob, 4), std::invalid_argument);
        std::istringstream missing("0,1.0\n1,1.0\n2,1.0\n");
        CHECK_THROWS_AS(load_weight_csv(missing, 4), std::invalid_argument);
        std::istringstream nonpos("0,1.0\n1,1.0\n2,1.0\n3,-2.0\n");
        CHECK_THROWS_AS(load_weight_csv(nonpos, 4), std::invalid_argument);
        CHECK_THROWS_AS(load_weight_csv(std::string("/nonexistent/w.csv"), 4),
                        std::runtime_error);
    }
}
