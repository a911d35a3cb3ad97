#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cvarsr/milp/simplex.hpp"

using namespace cvarsr::milp;

namespace {

// Add a column given as (row, coef) pairs.
int add_col(LpProblem& p, std::vector<std::pair<int, double>> entries, double lb, double ub,
            double cost) {
    p.cols.push_back(std::move(entries));
    p.col_lb.push_back(lb);
    p.col_ub.push_back(ub);
    p.cost.push_back(cost);
    return int(p.cols.size()) - 1;
}

int add_row(LpProblem& p, double lb, double ub) {
    p.row_lb.push_back(lb);
    p.row_ub.push_back(ub);
    return p.num_rows++;
}

// KKT conditions of the bounded LP, checked from the returned primal/dual pair.
void check_kkt(const LpProblem& p, const LpResult& r, double tol = 1e-6) {
    REQUIRE(r.status == LpStatus::Optimal);
    std::vector<double> row_act(std::size_t(p.num_rows), 0.0);
    for (std::size_t j = 0; j < p.cols.size(); ++j) {
        const double x = r.x[j];
        CHECK(x >= p.col_lb[j] - tol * (1 + std::abs(x)));
        CHECK(x <= p.col_ub[j] + tol * (1 + std::abs(x)));
        for (auto [row, a] : p.cols[j]) row_act[std::size_t(row)] += a * x;
    }
    for (int i = 0; i < p.num_rows; ++i) {
        const double act = row_act[std::size_t(i)];
        const double scale = 1 + std::abs(act);
        CHECK(act >= p.row_lb[std::size_t(i)] - tol * scale);
        CHECK(act <= p.row_ub[std::size_t(i)] + tol * scale);
        const double y = r.duals[std::size_t(i)];
        const bool at_lb = act <= p.row_lb[std::size_t(i)] + tol * scale;
        const bool at_ub = act >= p.row_ub[std::size_t(i)] - tol * scale;
        if (!at_lb && !at_ub) CHECK(std::abs(y) <= tol);
    }
    for (std::size_t j = 0; j < p.cols.size(); ++j) {
        double d = p.cost[j];
        for (auto [row, a] : p.cols[j]) d -= a * r.duals[std::size_t(row)];
        const double x = r.x[j];
        const bool at_lb = x <= p.col_lb[j] + tol * (1 + std::abs(x));
        const bool at_ub = x >= p.col_ub[j] - tol * (1 + std::abs(x));
        if (at_lb && !at_ub) CHECK(d >= -tol);
        else if (at_ub && !at_lb) CHECK(d <= tol);
        else if (!at_lb && !at_ub) CHECK(std::abs(d) <= tol);
    }
}

} // namespace

TEST_CASE("min x subject to x >= 3", "[simplex]") {
    LpProblem p;
    int r = add_row(p, 3.0, kInf);
    add_col(p, {{r, 1.0}}, -kInf, kInf, 1.0);
    LpResult res = solve_lp(p);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.objective == Catch::Approx(3.0));
    CHECK(res.x[0] == Catch::Approx(3.0));
}

TEST_CASE("classic 2d LP", "[simplex]") {
    // max 3a+5b st a<=4, 2b<=12, 3a+2b<=18  (min form: negate)
    LpProblem p;
    int r1 = add_row(p, -kInf, 4.0);
    int r2 = add_row(p, -kInf, 12.0);
    int r3 = add_row(p, -kInf, 18.0);
    add_col(p, {{r1, 1.0}, {r3, 3.0}}, 0.0, kInf, -3.0);
    add_col(p, {{r2, 2.0}, {r3, 2.0}}, 0.0, kInf, -5.0);
    LpResult res = solve_lp(p);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.objective == Catch::Approx(-36.0));
    CHECK(res.x[0] == Catch::Approx(2.0));
    CHECK(res.x[1] == Catch::Approx(6.0));
    check_kkt(p, res);
}

TEST_CASE("equality rows and ranged rows", "[simplex]") {
    // min x+y st x+y=2, 1 <= x-y <= 1.5, x,y >= 0
    LpProblem p;
    int r1 = add_row(p, 2.0, 2.0);
    int r2 = add_row(p, 1.0, 1.5);
    add_col(p, {{r1, 1.0}, {r2, 1.0}}, 0.0, kInf, 1.0);
    add_col(p, {{r1, 1.0}, {r2, -1.0}}, 0.0, kInf, 1.0);
    LpResult res = solve_lp(p);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.objective == Catch::Approx(2.0));
    check_kkt(p, res);
}

TEST_CASE("infeasible LP", "[simplex]") {
    LpProblem p;
    int r1 = add_row(p, 5.0, kInf);
    int r2 = add_row(p, -kInf, 4.0);
    int x = add_col(p, {}, 0.0, 10.0, 1.0);
    p.cols[std::size_t(x)] = {{r1, 1.0}, {r2, 1.0}};
    LpResult res = solve_lp(p);
    CHECK(res.status == LpStatus::Infeasible);
}

TEST_CASE("unbounded LP", "[simplex]") {
    LpProblem p;
    int r1 = add_row(p, -kInf, 4.0);
    add_col(p, {{r1, 1.0}}, -kInf, kInf, 1.0); // min x, x <= 4
    LpResult res = solve_lp(p);
    CHECK(res.status == LpStatus::Unbounded);
}

TEST_CASE("fixed variables get reduced costs", "[simplex]") {
    // min 2x + 3y st x + y >= 4, y fixed at 1
    LpProblem p;
    int r1 = add_row(p, 4.0, kInf);
    add_col(p, {{r1, 1.0}}, 0.0, kInf, 2.0);
    add_col(p, {{r1, 1.0}}, 1.0, 1.0, 3.0);
    LpResult res = solve_lp(p);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.objective == Catch::Approx(9.0));
    // V(yэ) = 2(4-yb) + 3yb -> dV/dyb = 1
    CHECK(res.reduced_costs[1] == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("random dense LPs satisfy KKT", "[simplex][property]") {
    std::mt19937_64 rng(411);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    int optimal_count = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const int n = 2 + int(rng() % 8);
        const int m = 1 + int(rng() % 8);
        LpProblem p;
        for (int i = 0; i < m; ++i) {
            double b = coef(rng) * 2;
            int kind = int(rng() % 3);
            if (kind == 0) add_row(p, -kInf, b);
            else if (kind == 1) add_row(p, b, kInf);
            else add_row(p, b, b + std::abs(coef(rng)));
        }
        for (int j = 0; j < n; ++j) {
            std::vector<std::pair<int, double>> entries;
            for (int i = 0; i < m; ++i)
                if (rng() % 100 < 70) entries.emplace_back(i, coef(rng));
            add_col(p, std::move(entries), -5.0, 5.0, coef(rng));
        }
        LpResult res = solve_lp(p);
        REQUIRE((res.status == LpStatus::Optimal || res.status == LpStatus::Infeasible));
        if (res.status == LpStatus::Optimal) {
            ++optimal_count;
            check_kkt(p, res);
        }
    }
    CHECK(optimal_count > 40); // the generator should not be degenerate
}

TEST_CASE("moderate assignment-style degenerate LP", "[simplex]") {
    // min sum c_ij x_ij st sum_j x_ij = 1, sum_i x_ij <= 1 (square), highly degenerate
    std::mt19937_64 rng(7);
    const int n = 30;
    LpProblem p;
    std::vector<int> rrows, crows;
    for (int i = 0; i < n; ++i) rrows.push_back(add_row(p, 1.0, 1.0));
    for (int j = 0; j < n; ++j) crows.push_back(add_row(p, -kInf, 1.0));
    auto c = std::vector<std::vector<double>>(std::size_t(n), std::vector<double>(std::size_t(n), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            c[std::size_t(i)][std::size_t(j)] = double(rng() % 1000) / 100.0;
            add_col(p, {{rrows[std::size_t(i)], 1.0}, {crows[std::size_t(j)], 1.0}}, 0.0, 1.0,
                    c[std::size_t(i)][std::size_t(j)]);
        }
    LpResult res = solve_lp(p);
    REQUIRE(res.status == LpStatus::Optimal);
    check_kkt(p, res);
    // LP bound of assignment problem equals integral optimum; cross-check greedily upper bound
    double greedy = 0.0;
    std::vector<bool> used(std::size_t(n), false);
    for (int i = 0; i < n; ++i) {
        int best = -1;
        for (int j = 0; j < n; ++j)
            if (!used[std::size_t(j)] && (best < 0 || c[std::size_t(i)][std::size_t(j)] < c[std::size_t(i)][std::size_t(best)]))
                best = j;
        used[std::size_t(best)] = true;
        greedy += c[std::size_t(i)][std::size_t(best)];
    }
    CHECK(res.objective <= greedy + 1e-6);
}
