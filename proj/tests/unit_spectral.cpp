#include <doctest.h>

#include "adagad/spectral.hpp"
#include "test_util.hpp"

using namespace adagad;

TEST_CASE("high_frequency_area on known eigenvectors") {
    SUBCASE("constant signal is in the kernel") {
        Graph g = testutil::random_graph(20, 1, 0.3, 1);
        Vector y = Vector::Constant(20, 3.5);
        CHECK(high_frequency_area(g, y) == doctest::Approx(0.0));
    }
    SUBCASE("K2 alternating signal hits lambda = 2") {
        Vector y(2);
        y << 1.0, -1.0;
        CHECK(high_frequency_area(testutil::k2(), y) == doctest::Approx(2.0));
    }
    SUBCASE("P3 with y = (1,0,-1)") {
        // oracle: y^T L y = (1-0)^2 + (0-(-1))^2 = 2, y^T y = 2
        Vector y(3);
        y << 1.0, 0.0, -1.0;
        CHECK(high_frequency_area(testutil::path3(), y) == doctest::Approx(1.0));
    }
    SUBCASE("zero signal raises") {
        CHECK_THROWS_AS(high_frequency_area(testutil::k2(), Vector::Zero(2)),
                        DegenerateSignalError);
    }
}

TEST_CASE("rayleigh quotient scale invariance") {
    Graph g = testutil::random_graph(60, 1, 0.1, 9);
    RngStream rng(4);
    Vector y(60);
    for (int i = 0; i < 60; ++i) y[i] = rng.normal();
    const double base = high_frequency_area(g, y);
    for (double c : {-3.0, 0.25, 1e6}) {
        Vector scaled = c * y;
        CHECK(high_frequency_area(g, scaled) ==
              doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("E_high bound by 2 * max degree") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Graph g = testutil::random_graph(30, 1, 0.2, s);
        int dmax = 0;
        for (int i = 0; i < 30; ++i) dmax = std::max(dmax, g.degree(i));
        RngStream rng(s + 100);
        Vector y(30);
        for (int i = 0; i < 30; ++i) y[i] = rng.normal();
        const double e = high_frequency_area(g, y);
        CHECK(e >= 0.0);
        CHECK(e <= 2.0 * dmax + 1e-9);
    }
}

TEST_CASE("attribute magnitude") {
    SUBCASE("identical rows give zero") {
        Matrix x(3, 2);
        x << 1, 2, 1, 2, 1, 2;
        Graph g(3, {{0, 1}, {1, 2}}, x);
        CHECK(attribute_anomaly_magnitude(g) == doctest::Approx(0.0));
    }
    SUBCASE("single column reduces to high_frequency_area") {
        Graph g = testutil::path3();
        CHECK(attribute_anomaly_magnitude(g) ==
              doctest::Approx(high_frequency_area(g, g.attributes().col(0))));
    }
    SUBCASE("all-zero attributes raise") {
        Graph g(2, {{0, 1}}, Matrix::Zero(2, 3));
        CHECK_THROWS_AS(attribute_anomaly_magnitude(g), DegenerateSignalError);
    }
}

TEST_CASE("structural magnitude") {
    SUBCASE("regular graph gives zero") {
        // C4 cycle, all degrees 2
        Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, Matrix::Zero(4, 1));
        CHECK(structural_anomaly_magnitude(g) == doctest::Approx(0.0));
    }
    SUBCASE("K2 degrees equal") {
        CHECK(structural_anomaly_magnitude(testutil::k2()) == doctest::Approx(0.0));
    }
    SUBCASE("star S3 oracle") {
        // d = (3,1,1,1); d^T L d = 3 * (3-1)^2 = 12; d^T d = 12
        CHECK(structural_anomaly_magnitude(testutil::star3()) == doctest::Approx(1.0));
    }
    SUBCASE("empty edge set raises") {
        Graph g(3, {}, Matrix::Ones(3, 1));
        CHECK_THROWS_AS(structural_anomaly_magnitude(g), DegenerateSignalError);
    }
}

TEST_CASE("graph magnitude is the exact sum of its parts") {
    SUBCASE("K2 with identical attributes is all zero") {
        Matrix x(2, 1);
        x << 5.0, 5.0;
        Graph g(2, {{0, 1}}, x);
        auto m = graph_anomaly_magnitude(g);
        CHECK(m.attribute == doctest::Approx(0.0));
        CHECK(m.structural == doctest::Approx(0.0));
        CHECK(m.graph() == doctest::Approx(0.0));
    }
    SUBCASE("sum identity on random graphs") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            Graph g = testutil::random_graph(25, 3, 0.2, s);
            auto m = graph_anomaly_magnitude(g);
            CHECK(m.graph() == m.attribute + m.structural);  // exact, by construction
            CHECK(m.attribute >= 0.0);
            CHECK(m.structural >= 0.0);
        }
    }
}

TEST_CASE("spectral energy") {
    SUBCASE("K2 energy concentration") {
        Vector hi(2), lo(2);
        hi << 1.0, -1.0;
        lo << 1.0, 1.0;
        auto e_hi = spectral_energy(testutil::k2(), hi);
        CHECK(e_hi.energies[1] == doctest::Approx(1.0));
        auto e_lo = spectral_energy(testutil::k2(), lo);
        CHECK(e_lo.energies[0] == doctest::Approx(1.0));
    }
    SUBCASE("identity sum(lambda_k * energy_k) = E_high") {
        RngStream rng(77);
        for (int t = 0; t < 10; ++t) {
            Graph g = testutil::random_graph(30, 1, 0.15, t);
            Vector y(30);
            for (int i = 0; i < 30; ++i) y[i] = rng.normal();
            auto se = spectral_energy(g, y);
            CHECK(se.energies.sum() == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(se.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-8));
            const double via_spectrum = se.eigenvalues.dot(se.energies);
            CHECK(via_spectrum ==
                  doctest::Approx(high_frequency_area(g, y)).epsilon(1e-6));
        }
    }
    SUBCASE("size guard") {
        Graph g = testutil::k2();
        Vector y(2);
        y << 1.0, 0.0;
        CHECK_THROWS_AS(spectral_energy(g, y, /*max_nodes=*/1), ValidationError);
    }
}
