#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cvarsr/risk.hpp"

using namespace cvarsr;

namespace {
std::vector<double> uniform_probs(std::size_t n) {
    return std::vector<double>(n, 1.0 / double(n));
}
} // namespace

TEST_CASE("projection finds the alpha-crossing atom", "[risk]") {
    SECTION("boundary crossing selects the earlier atom") {
        Projection p = project({10, 20, 30, 40}, uniform_probs(4), 0.5);
        CHECK(p.var_pos == 1); // second sorted atom
        CHECK(p.var_value == 20.0);
    }
    SECTION("constant distribution") {
        Projection p = project({7, 7, 7}, uniform_probs(3), 0.4);
        CHECK(p.var_value == 7.0);
    }
    SECTION("unsorted input with non-uniform mass") {
        Projection p = project({3, 1, 2}, {0.3, 0.4, 0.3}, 0.95);
        CHECK(p.order == std::vector<std::size_t>{1, 2, 0});
        CHECK(p.var_pos == 2);
        CHECK(p.var_value == 3.0);
    }
    SECTION("ties keep input order") {
        Projection p = project({5, 5, 1}, uniform_probs(3), 0.5);
        CHECK(p.order == std::vector<std::size_t>{2, 0, 1});
    }
    CHECK_THROWS_AS(project({}, {}, 0.5), Error);
}

TEST_CASE("cvar of the sorted projection", "[risk]") {
    Projection p = project({10, 20, 30, 40}, uniform_probs(4), 0.5);
    CHECK(cvar(p, 0.5) == Catch::Approx(35.0).margin(1e-12)); // mean of the worst half

    Projection single = project({123.0}, {1.0}, 0.9);
    CHECK(cvar(single, 0.9) == Catch::Approx(123.0));

    Projection flat = project({4, 4, 4, 4}, uniform_probs(4), 0.7);
    CHECK(cvar(flat, 0.7) == Catch::Approx(4.0));
}

TEST_CASE("objective decomposition", "[risk]") {
    RiskParams params{0.5, 0.5};
    RiskDecomposition d = evaluate_objective({10, 20, 30, 40}, uniform_probs(4), params);
    CHECK(d.expectation == Catch::Approx(25.0));
    CHECK(d.cvar == Catch::Approx(35.0));
    CHECK(d.objective == Catch::Approx(42.5));

    RiskParams neutral{0.0, 0.5};
    RiskDecomposition dn = evaluate_objective({10, 20, 30, 40}, uniform_probs(4), neutral);
    CHECK(dn.objective == Catch::Approx(dn.expectation));

    RiskParams unit{1.0, 0.9};
    RiskDecomposition ds = evaluate_objective({100.0}, {1.0}, unit);
    CHECK(ds.objective == Catch::Approx(200.0));
}

TEST_CASE("scan oracle on hand cases", "[risk]") {
    CHECK(cvar_by_scan({10, 20, 30, 40}, uniform_probs(4), 0.5) == Catch::Approx(35.0));
    CHECK(cvar_by_scan({6, 6, 6}, uniform_probs(3), 0.8) == Catch::Approx(6.0));
    CHECK(cvar_by_scan({1, 2}, {0.9, 0.1}, 0.95) == Catch::Approx(2.0));
}

TEST_CASE("cvar equals the scan oracle on random distributions", "[risk][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> val(-50.0, 100.0);
    std::uniform_real_distribution<double> alpha_d(0.05, 0.99);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 50;
        std::vector<double> v(n), p(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = val(rng);
            p[i] = 0.01 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            sum += p[i];
        }
        for (auto& x : p) x /= sum;
        double alpha = alpha_d(rng);
        Projection proj = project(v, p, alpha);
        CHECK(std::abs(cvar(proj, alpha) - cvar_by_scan(v, p, alpha)) < 1e-9);
    }
}

TEST_CASE("cvar properties", "[risk][property]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + rng() % 20;
        std::vector<double> v(n), p(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = val(rng);
            p[i] = 0.05 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            sum += p[i];
        }
        for (auto& x : p) x /= sum;

        SECTION("") {}
        // monotone in alpha
        double prev = -1e300;
        for (double a : {0.1, 0.3, 0.5, 0.7, 0.9, 0.97}) {
            double c = cvar(project(v, p, a), a);
            CHECK(c >= prev - 1e-10);
            prev = c;
        }
        // cvar >= expectation
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += p[i] * v[i];
        double c = cvar(project(v, p, 0.8), 0.8);
        CHECK(c >= mean - 1e-10);

        // translation and positive scaling equivariance
        double a_scale = 2.5, b_shift = -3.0;
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = a_scale * v[i] + b_shift;
        double cw = cvar(project(w, p, 0.8), 0.8);
        CHECK(cw == Catch::Approx(a_scale * c + b_shift).margin(1e-9));
    }

    // equality with expectation iff constant
    std::vector<double> flat(5, 3.25);
    auto pf = uniform_probs(5);
    double cf = cvar(project(flat, pf, 0.6), 0.6);
    CHECK(std::abs(cf - 3.25) < 1e-12);
}
