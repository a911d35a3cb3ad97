#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvarsr/common.hpp"

namespace cvarsr {

// One uncertainty realization: net load (kW) and day-ahead price (currency/kWh)
// over a shared horizon. `renewable` optionally carries the renewable-output
// component of the net load; it bounds curtailment in the dispatch model.
struct Scenario {
    std::vector<double> net_load;
    std::vector<double> price;
    std::vector<double> renewable; // empty when the bundle does not carry it

    std::size_t horizon() const { return net_load.size(); }
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    std::vector<double> probabilities;
    double dt_hours = 0.25;

    std::size_t size() const { return scenarios.size(); }
    std::size_t horizon() const { return scenarios.empty() ? 0 : scenarios.front().horizon(); }

    void validate() const {
        require(!scenarios.empty(), "scenario set is empty");
        require(probabilities.size() == scenarios.size(),
                "probability count does not match scenario count");
        const std::size_t t = scenarios.front().horizon();
        require(t >= 1, "scenario horizon must be >= 1");
        double sum = 0.0;
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            const Scenario& s = scenarios[i];
            require(s.net_load.size() == t && s.price.size() == t, "inconsistent horizon");
            require(s.renewable.empty() || s.renewable.size() == t, "inconsistent horizon");
            require(all_finite(s.net_load) && all_finite(s.price) && all_finite(s.renewable),
                    "scenario values must be finite");
            require(probabilities[i] > 0.0, "non-positive scenario probability");
            sum += probabilities[i];
        }
        require(std::abs(sum - 1.0) <= 1e-9, "scenario probabilities do not sum to 1");
    }
};

// K representatives drawn from an original set: indices, weights and the
// cluster label of every original scenario (labels index into source_ids).
struct ReducedScenarioSet {
    std::vector<std::size_t> source_ids;
    std::vector<double> weights;
    std::vector<std::size_t> assignment;

    std::size_t k() const { return source_ids.size(); }

    void validate_against(const ScenarioSet& original) const {
        const std::size_t n = original.size();
        const std::size_t kk = source_ids.size();
        require(kk >= 1 && kk <= n, "reduced set has invalid cardinality");
        require(weights.size() == kk, "weight count does not match representative count");
        require(assignment.size() == n, "assignment must label every original scenario");
        std::set<std::size_t> distinct(source_ids.begin(), source_ids.end());
        require(distinct.size() == kk, "representative indices must be distinct");
        for (std::size_t id : source_ids) require(id < n, "representative index out of range");

        std::vector<double> mass(kk, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            require(assignment[i] < kk, "cluster label out of range");
            mass[assignment[i]] += original.probabilities[i];
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            require(weights[c] > 0.0, "non-positive cluster weight");
            require(mass[c] > 0.0, "empty cluster");
            require(std::abs(weights[c] - mass[c]) <= 1e-9,
                    "cluster weight does not equal its probability mass");
            require(assignment[source_ids[c]] == c,
                    "representative is not assigned to its own cluster");
            sum += weights[c];
        }
        require(std::abs(sum - 1.0) <= 1e-9, "cluster weights do not sum to 1");
    }
};

// Risk-aversion weight and CVaR confidence level shared by every piece of
// CVaR arithmetic. lambda = 0 is the risk-neutral case.
struct RiskParams {
    double lambda = 0.5;
    double alpha = 0.95;

    void validate() const {
        require(lambda >= 0.0, "lambda must be >= 0");
        require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    }
};

// ---------------------------------------------------------------------------
// Bundle I/O. Format:
//   {"meta":{"n":N,"t":T,"dt_hours":0.25},
//    "scenarios":[{"prob":g,"net_load":[...],"price":[...],"renewable":[...]}]}
// "renewable" is optional. Extra keys inside "meta" are preserved on load and
// ignored by consumers that do not understand them.
// ---------------------------------------------------------------------------

inline nlohmann::json scenario_set_to_json(const ScenarioSet& set,
                                           const nlohmann::json& extra_meta = {}) {
    nlohmann::json meta{{"n", set.size()}, {"t", set.horizon()}, {"dt_hours", set.dt_hours}};
    if (extra_meta.is_object())
        for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
    nlohmann::json scen = nlohmann::json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
        nlohmann::json s{{"prob", set.probabilities[i]},
                         {"net_load", set.scenarios[i].net_load},
                         {"price", set.scenarios[i].price}};
        if (!set.scenarios[i].renewable.empty()) s["renewable"] = set.scenarios[i].renewable;
        scen.push_back(std::move(s));
    }
    return nlohmann::json{{"meta", std::move(meta)}, {"scenarios", std::move(scen)}};
}

inline void save_scenario_set(const ScenarioSet& set, const std::filesystem::path& path,
                              const nlohmann::json& extra_meta = {}) {
    set.validate();
    atomic_write_file(path, scenario_set_to_json(set, extra_meta).dump());
}

inline ScenarioSet scenario_set_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("meta") && j.contains("scenarios"),
            "malformed scenario bundle");
    const auto& meta = j.at("meta");
    ScenarioSet set;
    set.dt_hours = meta.value("dt_hours", 0.25);
    require(set.dt_hours > 0.0, "dt_hours must be positive");
    const auto& arr = j.at("scenarios");
    require(arr.is_array() && !arr.empty(), "scenario bundle has no scenarios");

    double sum = 0.0;
    for (const auto& js : arr) {
        Scenario s;
        s.net_load = js.at("net_load").get<std::vector<double>>();
        s.price = js.at("price").get<std::vector<double>>();
        if (js.contains("renewable")) s.renewable = js.at("renewable").get<std::vector<double>>();
        double p = js.at("prob").get<double>();
        require(p > 0.0, "non-positive scenario probability");
        sum += p;
        set.probabilities.push_back(p);
        set.scenarios.push_back(std::move(s));
    }
    if (meta.contains("n"))
        require(meta.at("n").get<std::size_t>() == set.size(), "meta.n does not match scenario count");
    if (meta.contains("t"))
        require(meta.at("t").get<std::size_t>() == set.horizon(), "inconsistent horizon");

    // Tolerate rounding noise in the stored probabilities, reject real errors.
    require(std::abs(sum - 1.0) <= 1e-6, "scenario probabilities sum is off by more than 1e-6");
    for (double& p : set.probabilities) p /= sum;

    set.validate();
    return set;
}

inline ScenarioSet load_scenario_set(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed scenario bundle " + path.string() + ": " + e.what());
    }
    return scenario_set_from_json(j);
}

inline nlohmann::json load_bundle_meta(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    return j.value("meta", nlohmann::json::object());
}

inline void save_reduced_set(const ReducedScenarioSet& set, const ScenarioSet& original,
                             const std::filesystem::path& path) {
    set.validate_against(original);
    nlohmann::json j{{"source_ids", set.source_ids},
                     {"weights", set.weights},
                     {"assignment", set.assignment}};
    atomic_write_file(path, j.dump());
}

inline ReducedScenarioSet load_reduced_set(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed reduced-set file " + path.string() + ": " + e.what());
    }
    ReducedScenarioSet set;
    set.source_ids = j.at("source_ids").get<std::vector<std::size_t>>();
    set.weights = j.at("weights").get<std::vector<double>>();
    set.assignment = j.at("assignment").get<std::vector<std::size_t>>();
    return set;
}

// Materialize the reduced set as a stand-alone weighted ScenarioSet, the form
// consumed by the reduced-problem solve.
inline ScenarioSet materialize(const ReducedScenarioSet& reduced, const ScenarioSet& original) {
    reduced.validate_against(original);
    ScenarioSet out;
    out.dt_hours = original.dt_hours;
    for (std::size_t c = 0; c < reduced.k(); ++c) {
        out.scenarios.push_back(original.scenarios[reduced.source_ids[c]]);
        out.probabilities.push_back(reduced.weights[c]);
    }
    // Weight rounding noise must not trip downstream sum checks.
    double sum = 0.0;
    for (double w : out.probabilities) sum += w;
    for (double& w : out.probabilities) w /= sum;
    return out;
}

// Cluster-mass weights for a given assignment; the construction rule shared by
// every reduction method.
inline std::vector<double> cluster_weights(const std::vector<std::size_t>& assignment,
                                           const std::vector<double>& probabilities,
                                           std::size_t k) {
    std::vector<double> w(k, 0.0);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        require(assignment[i] < k, "cluster label out of range");
        w[assignment[i]] += probabilities[i];
    }
    return w;
}

inline ReducedScenarioSet identity_reduction(const ScenarioSet& set) {
    ReducedScenarioSet r;
    r.source_ids.resize(set.size());
    r.assignment.resize(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        r.source_ids[i] = i;
        r.assignment[i] = i;
    }
    r.weights = set.probabilities;
    return r;
}

} // namespace cvarsr
