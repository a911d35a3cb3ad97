#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include "cvarsr/datagen.hpp"
#include "cvarsr/ipdsr.hpp"
#include "partition_oracle.hpp"

using namespace cvarsr;

namespace {

Projection random_projection(std::mt19937_64& rng, std::size_t n, double alpha,
                             bool uniform = false) {
    std::vector<double> v(n), p(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::uniform_real_distribution<double>(10.0, 200.0)(rng);
        p[i] = uniform ? 1.0 : 0.05 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return project(v, p, alpha);
}

} // namespace

TEST_CASE("aggregation arithmetic on a hand case", "[ipdsr]") {
    Projection proj = project({1, 2, 3}, {0.2, 0.3, 0.5}, 0.95);
    AggregatedObjectives agg = aggregate(proj, 2);
    REQUIRE(agg.size() == 2);
    CHECK(agg.values[0] == Catch::Approx(1.6));
    CHECK(agg.values[1] == Catch::Approx(3.0));
    CHECK(agg.probabilities[0] == Catch::Approx(0.5));
    CHECK(agg.probabilities[1] == Catch::Approx(0.5));
}

TEST_CASE("identity aggregation reproduces the sorted projection", "[ipdsr]") {
    std::mt19937_64 rng(5);
    Projection proj = random_projection(rng, 12, 0.9);
    AggregatedObjectives agg = aggregate(proj, 12);
    REQUIRE(agg.size() == 12);
    for (std::size_t s = 0; s < 12; ++s) {
        CHECK(agg.values[s] == Catch::Approx(proj.sorted_value(s)));
        CHECK(agg.member_ids[s].size() == 1);
    }
}

TEST_CASE("aggregation conservation and tail preservation", "[ipdsr][property]") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 5 + rng() % 60;
        const double alpha = 0.7 + 0.25 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        Projection proj = random_projection(rng, n, alpha);
        std::size_t n_tail = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (proj.values[i] > proj.var_value) ++n_tail;
        const std::size_t lo = n_tail + 1;
        const std::size_t n_prime = std::min(n, lo + rng() % (n - lo + 1));
        AggregatedObjectives agg = aggregate(proj, n_prime);

        double mass = 0.0;
        std::size_t members = 0;
        for (std::size_t j = 0; j < agg.size(); ++j) {
            mass += agg.probabilities[j];
            members += agg.member_ids[j].size();
            // exact probability-weighted mean
            double wsum = 0.0, msum = 0.0, lo_v = 1e300, hi_v = -1e300;
            for (std::size_t orig : agg.member_ids[j]) {
                wsum += proj.probabilities[orig] * proj.values[orig];
                msum += proj.probabilities[orig];
                lo_v = std::min(lo_v, proj.values[orig]);
                hi_v = std::max(hi_v, proj.values[orig]);
            }
            CHECK(std::abs(agg.values[j] - wsum / msum) < 1e-9);
            CHECK(agg.values[j] >= lo_v - 1e-12);
            CHECK(agg.values[j] <= hi_v + 1e-12);
            if (agg.values[j] > proj.var_value)
                CHECK(agg.member_ids[j].size() == 1); // tail atoms stay singletons
            if (j + 1 < agg.size()) CHECK(agg.values[j] <= agg.values[j + 1] + 1e-12);
        }
        CHECK(std::abs(mass - 1.0) < 1e-9);
        CHECK(members == n);
    }
}

TEST_CASE("aggregation rejects sizes below the tail count", "[ipdsr]") {
    Projection proj = project({1, 2, 100, 200, 300}, {0.3, 0.3, 0.2, 0.1, 0.1}, 0.5);
    // var at 2nd atom (value 2); three tail atoms above
    CHECK_THROWS_AS(aggregate(proj, 3), Error);
    CHECK_NOTHROW(aggregate(proj, 4));
}

TEST_CASE("partition model size", "[ipdsr]") {
    std::mt19937_64 rng(3);
    Projection proj = random_projection(rng, 6, 0.8);
    AggregatedObjectives agg = aggregate(proj, 6);
    milp::MilpModel m = build_partition_mip(agg, 3, RiskParams{0.5, 0.8}, proj.var_value);
    const std::size_t n = 6;
    CHECK(m.num_binaries() == n * n + 3 * n);
    CHECK(m.vars.size() - m.num_binaries() == 2 * n * n + 2 * n + 2);
}

TEST_CASE("lossless partition at k = N'", "[ipdsr]") {
    std::mt19937_64 rng(11);
    Projection proj = random_projection(rng, 5, 0.8, /*uniform=*/true);
    AggregatedObjectives agg = aggregate(proj, 5);
    detail::PartitionVarRefs refs;
    milp::MilpModel m = build_partition_mip(agg, 5, RiskParams{0.5, 0.8}, proj.var_value, refs);
    auto solver = milp::make_solver("exhaustive");
    PartitionResult res = solve_partition(m, refs, *solver, agg, proj);
    CHECK(res.objective_value == Catch::Approx(0.0).margin(1e-8));
    CHECK(res.representative_ids.size() == 5);
    double wsum = 0.0;
    for (double w : res.weights) wsum += w;
    CHECK(wsum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("partition MIP matches the brute-force enumerator", "[ipdsr][oracle]") {
    std::mt19937_64 rng(2027);
    auto solver = milp::make_solver("exhaustive");
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 4 + rng() % 3; // 4..6
        const std::size_t k = 1 + rng() % 3;
        const double alpha = (trial % 2 == 0) ? 0.8 : 0.9;
        const double lambda = (trial % 3 == 0) ? 0.0 : 0.5;
        Projection proj = random_projection(rng, n, alpha);
        AggregatedObjectives agg = aggregate(proj, n);
        RiskParams risk{lambda, alpha};

        detail::PartitionVarRefs refs;
        milp::MilpModel m = build_partition_mip(agg, k, risk, proj.var_value, refs);
        PartitionResult got = solve_partition(m, refs, *solver, agg, proj);
        auto want = oracle::brute_force_partition(agg, k, risk, proj.var_value);
        INFO("trial " << trial << " n " << n << " k " << k);
        REQUIRE(std::isfinite(want.objective));
        CHECK(std::abs(got.objective_value - want.objective) < 1e-6);
    }
}

TEST_CASE("decoded partitions satisfy the constraint semantics", "[ipdsr][property]") {
    std::mt19937_64 rng(909);
    auto solver = milp::make_solver("exhaustive");
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 5 + rng() % 2;
        const std::size_t k = 2 + rng() % 2;
        RiskParams risk{0.5, 0.85};
        Projection proj = random_projection(rng, n, risk.alpha);
        AggregatedObjectives agg = aggregate(proj, n);
        detail::PartitionVarRefs refs;
        milp::MilpModel m = build_partition_mip(agg, k, risk, proj.var_value, refs);
        milp::MilpSolution sol = solver->solve(m, milp::kInf, 1e-9);
        REQUIRE(sol.has_solution());
        // decode and check h/u/n/v structure plus the confidence window
        std::vector<int> u(n), h(n), nn(n);
        for (std::size_t j = 0; j < n; ++j) {
            u[j] = sol.value(refs.u[j]) > 0.5;
            h[j] = sol.value(refs.h[j]) > 0.5;
            nn[j] = sol.value(refs.nn[j]) > 0.5;
        }
        std::size_t p = n;
        int usum = 0, nsum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            usum += u[j];
            nsum += nn[j];
            if (nn[j]) p = j;
        }
        CHECK(usum == int(k));
        CHECK(nsum == 1);
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            int count = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (sol.value(refs.v[i][j]) > 0.5) {
                    ++count;
                    CHECK(u[j] == 1);
                    w[j] += agg.probabilities[i];
                }
            CHECK(count == 1);
        }
        double h_mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            // h marks selected atoms strictly before the VaR pick
            CHECK(h[j] == (u[j] == 1 && j < p ? 1 : 0));
            if (h[j]) h_mass += w[j];
        }
        CHECK(h_mass <= risk.alpha + 1e-9);
        for (std::size_t j = 0; j < n; ++j)
            if (u[j] && !h[j]) CHECK(h_mass + w[j] >= risk.alpha - 1e-9);
    }
}

TEST_CASE("ipdsr on a small instance improves on its initialization", "[ipdsr][slow]") {
    GenConfig gen;
    gen.n = 24;
    gen.t = 8;
    gen.seed = 7;
    gen.tail_prob = 0.15;
    gen.tail_magnitude = 3.0;
    ScenarioSet set = generate(gen);
    VppParams vpp = VppParams::defaults_for(set);
    vpp.es_power_kw = 100.0;
    vpp.es_energy_kwh = 100.0;
    RiskParams risk{0.5, 0.9};
    IpdsrConfig cfg;
    cfg.k = 4;
    cfg.max_iter = 4;
    cfg.agg_size = 12;
    cfg.restarts = 2;
    cfg.seed = 3;
    cfg.mip_time_limit_s = 30.0;
    auto solver = milp::make_solver("auto");
    IpdsrOutcome out = run_ipdsr(set, cfg, vpp, risk, solver.get() ? *solver : *solver);

    REQUIRE(!out.trace.records.empty());
    const double init = out.trace.records.front().validation_objective;
    double running = init;
    for (const auto& rec : out.trace.records) {
        running = std::min(running, rec.validation_objective);
        CHECK(out.validation_objective <= rec.validation_objective + 1e-9);
    }
    CHECK(out.validation_objective == Catch::Approx(running).margin(1e-9));
    CHECK(out.validation_objective <= init + 1e-9);
    out.reduced.validate_against(set);
    CHECK(out.reduced.k() == 4);

    // trace CSV has the documented header and one row per record
    std::string csv = out.trace.to_csv(init);
    CHECK(csv.find("iteration,validation_objective,og_percent,var_value") == 0);
}

TEST_CASE("initialization picks the better singleton", "[ipdsr]") {
    GenConfig gen;
    gen.n = 2;
    gen.t = 4;
    gen.seed = 12;
    ScenarioSet set = generate(gen);
    VppParams vpp = VppParams::defaults_for(set);
    RiskParams risk{0.5, 0.9};
    auto solver = milp::make_solver("auto");

    // enumerate both one-scenario reductions by hand
    double best_manual = 1e300;
    for (std::size_t pick = 0; pick < 2; ++pick) {
        ReducedScenarioSet r;
        r.source_ids = {pick};
        r.assignment = {0, 0};
        r.weights = {1.0};
        FullSolveResult fs = solve_full(materialize(r, set), vpp, risk, *solver);
        auto [proj, dec] = validate_decision(fs.decision, set, vpp, risk, *solver);
        best_manual = std::min(best_manual, dec.objective);
    }

    IpdsrConfig cfg;
    cfg.k = 1;
    cfg.restarts = 4;
    cfg.seed = 5;
    IpdsrState st = initialize(set, cfg, vpp, risk, *solver);
    CHECK(st.decomposition.objective == Catch::Approx(best_manual).epsilon(1e-6));
}

TEST_CASE("more restarts never hurt the validated initialization", "[ipdsr]") {
    GenConfig gen;
    gen.n = 14;
    gen.t = 6;
    gen.seed = 21;
    gen.tail_prob = 0.2;
    ScenarioSet set = generate(gen);
    VppParams vpp = VppParams::defaults_for(set);
    RiskParams risk{0.5, 0.85};
    auto solver = milp::make_solver("auto");

    IpdsrConfig one;
    one.k = 3;
    one.restarts = 1;
    one.seed = 9;
    IpdsrConfig five = one;
    five.restarts = 5;
    IpdsrState a = initialize(set, one, vpp, risk, *solver);
    IpdsrState b = initialize(set, five, vpp, risk, *solver);
    CHECK(b.decomposition.objective <= a.decomposition.objective + 1e-9);
}
