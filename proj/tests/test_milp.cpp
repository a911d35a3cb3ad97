#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cvarsr/milp/branch_and_bound.hpp"
#include "cvarsr/milp/exhaustive.hpp"
#include "cvarsr/milp/model.hpp"

using namespace cvarsr;
using namespace cvarsr::milp;

TEST_CASE("continuous bound minimum", "[milp]") {
    MilpModel m;
    int x = m.add_continuous("x", -kInf, kInf);
    m.add_ge("lb", {{x, 1.0}}, 3.0);
    m.objective = {{x, 1.0}};
    MilpSolution s = solve_branch_and_bound(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == Catch::Approx(3.0));

    MilpSolution e = solve_exhaustive(m); // zero binaries: pure LP case
    REQUIRE(e.status == SolveStatus::Optimal);
    CHECK(e.objective == Catch::Approx(3.0));
}

TEST_CASE("minimum cover with binaries", "[milp]") {
    MilpModel m;
    LinExpr sum;
    for (int i = 0; i < 3; ++i) sum.push_back({m.add_binary("b" + std::to_string(i)), 1.0});
    m.add_ge("cover", sum, 2.0);
    m.objective = sum;
    MilpSolution s = solve_branch_and_bound(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == Catch::Approx(2.0));
}

TEST_CASE("infeasible toy model", "[milp]") {
    MilpModel m;
    int b = m.add_binary("b");
    m.add_ge("ge", {{b, 1.0}}, 2.0);
    m.objective = {{b, 1.0}};
    CHECK(solve_exhaustive(m).status == SolveStatus::Infeasible);
    CHECK(solve_branch_and_bound(m).status == SolveStatus::Infeasible);
}

TEST_CASE("knapsack matches subset enumeration", "[milp]") {
    const std::vector<double> value{10, 13, 7, 8, 12};
    const std::vector<double> weight{3, 4, 2, 2.5, 4.5};
    const double cap = 8.0;
    MilpModel m;
    LinExpr wsum, obj;
    for (int i = 0; i < 5; ++i) {
        int b = m.add_binary("item" + std::to_string(i));
        wsum.push_back({b, weight[std::size_t(i)]});
        obj.push_back({b, -value[std::size_t(i)]}); // maximize value
    }
    m.add_le("cap", wsum, cap);
    m.objective = obj;

    double best = 0.0;
    for (int mask = 0; mask < 32; ++mask) {
        double w = 0, v = 0;
        for (int i = 0; i < 5; ++i)
            if (mask & (1 << i)) {
                w += weight[std::size_t(i)];
                v += value[std::size_t(i)];
            }
        if (w <= cap) best = std::max(best, v);
    }

    MilpSolution bb = solve_branch_and_bound(m);
    MilpSolution ex = solve_exhaustive(m);
    REQUIRE(bb.status == SolveStatus::Optimal);
    REQUIRE(ex.status == SolveStatus::Optimal);
    CHECK(-bb.objective == Catch::Approx(best));
    CHECK(-ex.objective == Catch::Approx(best));
}

TEST_CASE("binary cap rejected by the oracle", "[milp]") {
    MilpModel m;
    LinExpr sum;
    for (int i = 0; i < 30; ++i) sum.push_back({m.add_binary("b" + std::to_string(i)), 1.0});
    m.add_ge("c", sum, 1.0);
    m.objective = sum;
    CHECK_THROWS_AS(solve_exhaustive(m), Error);
}

namespace {

MilpModel random_tiny_milp(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coef(-4.0, 4.0);
    MilpModel m;
    const int nb = 2 + int(rng() % 11); // up to 12 binaries
    const int nc = int(rng() % 4);
    for (int i = 0; i < nb; ++i) m.add_binary("b" + std::to_string(i));
    for (int i = 0; i < nc; ++i)
        m.add_continuous("x" + std::to_string(i), -3.0, 5.0);
    const int rows = 2 + int(rng() % 6);
    for (int r = 0; r < rows; ++r) {
        LinExpr terms;
        for (int j = 0; j < nb + nc; ++j)
            if (rng() % 100 < 60) terms.push_back({j, std::round(coef(rng) * 4) / 4});
        if (terms.empty()) continue;
        double rhs = std::round(coef(rng) * 4) / 2;
        switch (rng() % 3) {
            case 0: m.add_le("r" + std::to_string(r), terms, rhs); break;
            case 1: m.add_ge("r" + std::to_string(r), terms, rhs); break;
            default: m.add_range("r" + std::to_string(r), terms, rhs, rhs + double(rng() % 3)); break;
        }
    }
    for (int j = 0; j < nb + nc; ++j) m.objective.push_back({j, std::round(coef(rng) * 4) / 4});
    return m;
}

} // namespace

TEST_CASE("branch and bound agrees with the oracle on random tiny MILPs", "[milp][property]") {
    std::mt19937_64 rng(20240601);
    int feasible = 0;
    for (int trial = 0; trial < 150; ++trial) {
        MilpModel m = random_tiny_milp(rng);
        MilpSolution ex = solve_exhaustive(m);
        MilpSolution bb = solve_branch_and_bound(m);
        if (ex.status == SolveStatus::Infeasible) {
            CHECK(bb.status == SolveStatus::Infeasible);
            continue;
        }
        ++feasible;
        REQUIRE(ex.status == SolveStatus::Optimal);
        REQUIRE(bb.status == SolveStatus::Optimal);
        INFO("trial " << trial);
        CHECK(bb.objective == Catch::Approx(ex.objective).margin(1e-6));
        // reported objective consistent with reported values
        CHECK(eval_expr(m.objective, bb.values) + m.objective_offset ==
              Catch::Approx(bb.objective).margin(1e-6));
        for (std::size_t j = 0; j < m.vars.size(); ++j)
            if (m.vars[j].kind == VarKind::Binary) {
                const double v = bb.values[j];
                CHECK(std::min(std::abs(v), std::abs(v - 1.0)) < 1e-6);
            }
    }
    CHECK(feasible > 50);
}

TEST_CASE("hint accelerates and does not change the optimum", "[milp]") {
    std::mt19937_64 rng(77);
    MilpModel m = random_tiny_milp(rng);
    MilpSolution ref = solve_branch_and_bound(m);
    if (ref.status != SolveStatus::Optimal) return;
    for (std::size_t j = 0; j < m.vars.size(); ++j)
        if (m.vars[j].kind == VarKind::Binary) m.hint[int(j)] = std::round(ref.values[j]);
    MilpSolution warm = solve_branch_and_bound(m);
    REQUIRE(warm.status == SolveStatus::Optimal);
    CHECK(warm.objective == Catch::Approx(ref.objective).margin(1e-9));
}

TEST_CASE("lp text dump mentions binaries and rows", "[milp]") {
    MilpModel m;
    int b = m.add_binary("pick");
    int x = m.add_continuous("flow", 0.0, 10.0);
    m.add_le("link", {{x, 1.0}, {b, -10.0}}, 0.0);
    m.objective = {{x, -1.0}};
    std::ostringstream os;
    m.write_lp(os);
    const std::string text = os.str();
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find("pick") != std::string::npos);
    CHECK(text.find("Binaries") != std::string::npos);
}
