#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

#include "cvarsr/scenario.hpp"

using namespace cvarsr;
namespace fs = std::filesystem;

namespace {

ScenarioSet tiny_set(std::size_t n, std::size_t t) {
    ScenarioSet set;
    for (std::size_t i = 0; i < n; ++i) {
        Scenario s;
        for (std::size_t k = 0; k < t; ++k) {
            s.net_load.push_back(100.0 + 10.0 * double(i) + double(k));
            s.price.push_back(0.1 + 0.01 * double(i));
        }
        set.scenarios.push_back(s);
        set.probabilities.push_back(1.0 / double(n));
    }
    return set;
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("cvarsr_test_" + name);
}

} // namespace

TEST_CASE("singleton bundle loads with N=1", "[scenario]") {
    auto path = temp_file("single.json");
    save_scenario_set(tiny_set(1, 4), path);
    ScenarioSet set = load_scenario_set(path);
    CHECK(set.size() == 1);
    CHECK(set.horizon() == 4);
    CHECK(set.probabilities[0] == 1.0);
}

TEST_CASE("inconsistent horizon is rejected", "[scenario]") {
    nlohmann::json j{
        {"meta", {{"n", 2}, {"t", 2}, {"dt_hours", 0.25}}},
        {"scenarios",
         {{{"prob", 0.5}, {"net_load", {1.0, 2.0}}, {"price", {0.1, 0.1}}},
          {{"prob", 0.5}, {"net_load", {1.0, 2.0, 3.0}}, {"price", {0.1, 0.1, 0.1}}}}}};
    CHECK_THROWS_WITH(scenario_set_from_json(j), Catch::Matchers::ContainsSubstring("inconsistent horizon"));
}

TEST_CASE("near-1 probability sums renormalize, off sums error", "[scenario]") {
    auto make = [](double p3) {
        nlohmann::json j{{"meta", {{"dt_hours", 0.25}}}, {"scenarios", nlohmann::json::array()}};
        for (double p : {0.3, 0.3, p3})
            j["scenarios"].push_back(
                {{"prob", p}, {"net_load", {1.0}}, {"price", {0.1}}});
        return j;
    };
    ScenarioSet ok = scenario_set_from_json(make(0.4000003));
    double sum = 0.0;
    for (double p : ok.probabilities) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(ok.probabilities[0] == Catch::Approx(0.3 / 1.0000003).epsilon(1e-12));

    CHECK_THROWS_AS(scenario_set_from_json(make(0.41)), Error);
    nlohmann::json neg = make(0.4);
    neg["scenarios"][1]["prob"] = -0.1;
    CHECK_THROWS_AS(scenario_set_from_json(neg), Error);
}

TEST_CASE("reduced set round trip is exact", "[scenario]") {
    ScenarioSet original = tiny_set(5, 3);
    ReducedScenarioSet r;
    r.source_ids = {1, 4, 0};
    r.assignment = {2, 0, 0, 1, 1};
    r.weights = cluster_weights(r.assignment, original.probabilities, 3);

    auto path = temp_file("reduced.json");
    save_reduced_set(r, original, path);
    ReducedScenarioSet back = load_reduced_set(path);
    CHECK(back.source_ids == r.source_ids);
    CHECK(back.assignment == r.assignment);
    REQUIRE(back.weights.size() == r.weights.size());
    for (std::size_t i = 0; i < r.weights.size(); ++i)
        CHECK(back.weights[i] == r.weights[i]); // bit-exact via shortest-roundtrip floats
    back.validate_against(original);
}

TEST_CASE("weights carried with full precision", "[scenario]") {
    ScenarioSet original = tiny_set(2, 2);
    original.probabilities = {0.3, 0.7};
    ReducedScenarioSet r = identity_reduction(original);
    auto path = temp_file("weights.json");
    save_reduced_set(r, original, path);
    ReducedScenarioSet back = load_reduced_set(path);
    CHECK(back.weights[0] == 0.3);
    CHECK(back.weights[1] == 0.7);
}

TEST_CASE("identity reduction covers every index once", "[scenario]") {
    ScenarioSet set = tiny_set(7, 2);
    ReducedScenarioSet r = identity_reduction(set);
    r.validate_against(set);
    CHECK(r.k() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(r.source_ids[i] == i);
}

TEST_CASE("cluster weights equal probability mass on random assignments", "[scenario][property]") {
    std::mt19937_64 rng(20240811);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 30;
        std::size_t k = 1 + rng() % n;
        ScenarioSet set = tiny_set(n, 2);
        // random positive probabilities, normalized
        double sum = 0.0;
        for (auto& p : set.probabilities) {
            p = 0.05 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            sum += p;
        }
        for (auto& p : set.probabilities) p /= sum;

        ReducedScenarioSet r;
        r.assignment.resize(n);
        // ensure every cluster non-empty and the representative sits in it
        std::vector<std::size_t> ids(n);
        std::iota(ids.begin(), ids.end(), std::size_t{0});
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t c = 0; c < k; ++c) {
            r.source_ids.push_back(ids[c]);
            r.assignment[ids[c]] = c;
        }
        for (std::size_t j = k; j < n; ++j) r.assignment[ids[j]] = rng() % k;
        r.weights = cluster_weights(r.assignment, set.probabilities, k);
        r.validate_against(set);
    }
}

TEST_CASE("materialize preserves scenarios and weights", "[scenario]") {
    ScenarioSet set = tiny_set(4, 3);
    set.probabilities = {0.1, 0.2, 0.3, 0.4};
    ReducedScenarioSet r;
    r.source_ids = {2, 0};
    r.assignment = {1, 0, 0, 0};
    r.weights = cluster_weights(r.assignment, set.probabilities, 2);
    ScenarioSet m = materialize(r, set);
    CHECK(m.size() == 2);
    CHECK(m.scenarios[0].net_load == set.scenarios[2].net_load);
    CHECK(m.probabilities[0] == Catch::Approx(0.9));
    CHECK(m.probabilities[1] == Catch::Approx(0.1));
}
