#include <catch2/catch_amalgamated.hpp>

#include "adiaphase/model.hpp"
#include "oracle.hpp"

using namespace adiaphase;

TEST_CASE("two_level_pulse closed-form structure") {
    const auto m = two_level_pulse({1.0, 2.0, 0.5, 0.16});
    SECTION("off-diagonal peaks at the pulse center") {
        const CMatrix h = m.evaluate(0.5);
        CHECK(std::abs(h(0, 1) - 2.0) < 1e-15);  // w0 * gamma
        CHECK(std::abs(h(1, 0) - 2.0) < 1e-15);
        CHECK(std::abs(h(0, 0)) == 0.0);
        CHECK(std::abs(h(1, 1) - Complex(0, -0.5)) < 1e-15);
    }
    SECTION("gaussian symmetry about the center") {
        for (double d : {0.1, 0.25, 0.4}) {
            const CMatrix a = m.evaluate(0.5 + d), b = m.evaluate(0.5 - d);
            CHECK(frobenius(a - b) == 0.0);
        }
    }
    SECTION("zero coupling degenerates to the free hamiltonian") {
        const auto free_model = two_level_pulse({1.0, 0.0, 0.5, 0.16});
        for (double s : {0.0, 0.3, 0.9}) {
            const CMatrix h = free_model.evaluate(s);
            CHECK(std::abs(h(0, 1)) == 0.0);
            CHECK(std::abs(h(1, 1) - Complex(0, -0.5)) < 1e-15);
        }
    }
}

TEST_CASE("pulse eigenvalues against the characteristic-polynomial oracle") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const auto es = eigensystem(m.evaluate(0.5));
    // lambda = -i/4 +- sqrt(1 - 1/16)
    const double r = 0.96824583655185426;
    CHECK(std::abs(es.eigenvalues[0] - Complex(-r, -0.25)) < 1e-13);
    CHECK(std::abs(es.eigenvalues[1] - Complex(r, -0.25)) < 1e-13);
}

TEST_CASE("analytic derivative matches finite differences") {
    const auto m = two_level_pulse({1.0, 1.5, 0.5, 0.16});
    double worst = 0.0;
    const double h = 1.0 / 512;
    for (int k = 1; k < 512; ++k) {
        const double s = k * h;
        const CMatrix fd = (1.0 / (2 * h)) * (m.evaluate(s + h) - m.evaluate(s - h));
        worst = std::max(worst, frobenius(m.evaluate_derivative(s) - fd));
    }
    CHECK(worst < 50.0 * h * h);  // second-order finite differences
}

TEST_CASE("dissipativity") {
    SECTION("builtin pulse is a contraction generator") {
        const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
        for (int k = 0; k <= 64; ++k)
            CHECK(dissipation_bound(m.evaluate(k / 64.0)) <= 1e-12);
        CHECK_NOTHROW(check_dissipativity(m));
    }
    SECTION("sign-flipped width is gain, rejected at load") {
        const std::string cfg =
            "kind = matrix_table\n"
            "dim = 2\n"
            "entry.0.1 = 0.3 0 * gaussian(0.5,0.16)\n"
            "entry.1.0 = 0.3 0 * gaussian(0.5,0.16)\n"
            "entry.1.1 = 0 0.5\n";
        CHECK_THROWS_AS(parse_model_config(cfg), DissipativityViolation);
    }
}

TEST_CASE("config round-trip for the builtin pulse") {
    const std::string cfg =
        "# pulse\n"
        "kind = two_level_pulse\n"
        "dim = 2\n"
        "gamma = 1.0\n"
        "w0 = 1.0\n"
        "s0 = 0.5\n"
        "sigma = 0.16\n";
    const auto loaded = parse_model_config(cfg);
    const auto direct = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    for (double s : {0.0, 0.25, 0.5, 0.77, 1.0})
        CHECK(frobenius(loaded.evaluate(s) - direct.evaluate(s)) == 0.0);
}

TEST_CASE("matrix_table with hermitian coupling and a decaying level") {
    const std::string cfg =
        "kind = matrix_table\n"
        "dim = 2\n"
        "entry.0.0 = 0.2 0\n"
        "entry.0.1 = 0.3 0 * gaussian(0.5,0.16)\n"
        "entry.1.0 = 0.3 0 * gaussian(0.5,0.16)\n"
        "entry.1.1 = -0.1 -0.5\n";
    const auto m = parse_model_config(cfg);
    CHECK(m.dim == 2);
    const CMatrix h = m.evaluate(0.5);
    CHECK(std::abs(h(0, 1) - 0.3) < 1e-15);
    CHECK(std::abs(h(1, 1) - Complex(-0.1, -0.5)) < 1e-15);
    // derivative only carries the gaussian parts
    const CMatrix hd = m.evaluate_derivative(0.25);
    CHECK(std::abs(hd(0, 0)) == 0.0);
    CHECK(std::abs(hd(0, 1)) > 0.0);
}

TEST_CASE("config parse errors carry position information") {
    SECTION("unknown key") {
        try {
            parse_model_config("kind = two_level_pulse\ndim = 2\nwat = 3\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
        }
    }
    SECTION("bad number") {
        try {
            parse_model_config("kind = two_level_pulse\ndim = 2\ngamma = abc\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
            CHECK(e.column > 1);
        }
    }
    SECTION("missing '='") {
        CHECK_THROWS_AS(parse_model_config("kind two_level_pulse\n"), ParseError);
    }
    SECTION("unknown kind") {
        CHECK_THROWS_AS(parse_model_config("kind = frobnicate\ndim = 2\n"),
                        UnknownModelKind);
    }
    SECTION("entry index out of range") {
        CHECK_THROWS_AS(
            parse_model_config("kind = matrix_table\ndim = 2\nentry.2.0 = 1 0\n"),
            ParseError);
    }
    SECTION("missing required keys") {
        CHECK_THROWS_AS(parse_model_config("dim = 2\n"), ParseError);
        CHECK_THROWS_AS(parse_model_config("kind = matrix_table\n"), ParseError);
    }
}

TEST_CASE("min_eigenvalue_distance") {
    const TimeGrid grid{256};
    SECTION("constant spectrum") {
        const auto m = parse_model_config(
            "kind = matrix_table\ndim = 2\nentry.1.1 = 0 -0.5\n");
        CHECK(std::abs(min_eigenvalue_distance(m, grid) - 0.5) < 1e-12);
    }
    SECTION("decoupled pulse keeps the free gap") {
        const auto m = two_level_pulse({1.0, 0.0, 0.5, 0.16});
        CHECK(std::abs(min_eigenvalue_distance(m, grid) - 0.5) < 1e-12);
    }
    SECTION("monotone in the coupling ratio, matching the closed form") {
        double prev = 0.0;
        for (double w0 : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const auto m = two_level_pulse({1.0, w0, 0.5, 0.16});
            const double d = min_eigenvalue_distance(m, grid);
            CHECK(d > prev);
            prev = d;
            oracle::PulseOracle po{1.0, w0, 0.5, 0.16};
            double dc = 1e300;
            for (int k = 0; k < grid.size(); ++k)
                dc = std::min(dc, std::abs(po.lambda(grid.point(k), 0) -
                                           po.lambda(grid.point(k), 1)));
            CHECK(std::abs(d - dc) <= 1e-9 * (1.0 + dc));
        }
    }
}

TEST_CASE("cyclicity defect of the pulse family") {
    CHECK(cyclicity_defect(two_level_pulse({1.0, 1.0, 0.5, 0.16})) < 1e-15);
    CHECK(cyclicity_defect(two_level_pulse({1.0, 1.0, 0.4, 0.16})) > 1e-3);
}
