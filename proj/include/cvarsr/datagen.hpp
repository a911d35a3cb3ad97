#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "json.hpp"

#include "cvarsr/common.hpp"
#include "cvarsr/scenario.hpp"

namespace cvarsr {

// Seeded net-load and price scenario generator. A smooth diurnal base profile
// plus stationary AR(1) noise, wind subtracted up to its capacity, and an
// optional coincident load-and-price spike that plants genuine right-tail cost
// atoms. Every scenario draws from its own seed-derived stream.
struct GenConfig {
    std::size_t n = 100;
    int t = 96;
    std::uint64_t seed = 42;
    double dt_hours = 0.25;

    double base_load_kw = 600.0;
    double load_morning_peak_kw = 180.0; // bump centered at 08:30
    double load_evening_peak_kw = 320.0; // bump centered at 19:00
    double wind_capacity_kw = 1000.0;
    double wind_mean_level = 0.35;

    double price_base = 0.22;       // currency/kWh
    double price_peak = 0.16;       // diurnal amplitude on top of the base
    double price_load_coupling = 0.35;

    double noise_scale_load = 50.0; // stationary sd of the load AR(1), kW
    double noise_scale_price = 0.025;
    double ar1_phi = 0.85;

    double tail_prob = 0.0;
    double tail_magnitude = 3.0;    // multiplier on the spike bump

    void validate() const {
        require(n >= 1 && t >= 1, "n and t must be positive");
        require(dt_hours > 0.0, "dt_hours must be positive");
        require(base_load_kw > 0.0 && wind_capacity_kw >= 0.0, "scales must be positive");
        require(noise_scale_load > 0.0 && noise_scale_price > 0.0, "noise scales must be positive");
        require(ar1_phi >= 0.0 && ar1_phi < 1.0, "AR(1) coefficient must lie in [0,1)");
        require(tail_prob >= 0.0 && tail_prob < 1.0, "tail_prob must lie in [0,1)");
        require(tail_magnitude > 0.0, "tail_magnitude must be positive");
    }
};

inline void to_json(nlohmann::json& j, const GenConfig& c) {
    j = nlohmann::json{{"n", c.n},
                       {"t", c.t},
                       {"seed", c.seed},
                       {"dt_hours", c.dt_hours},
                       {"base_load_kw", c.base_load_kw},
                       {"load_morning_peak_kw", c.load_morning_peak_kw},
                       {"load_evening_peak_kw", c.load_evening_peak_kw},
                       {"wind_capacity_kw", c.wind_capacity_kw},
                       {"wind_mean_level", c.wind_mean_level},
                       {"price_base", c.price_base},
                       {"price_peak", c.price_peak},
                       {"price_load_coupling", c.price_load_coupling},
                       {"noise_scale_load", c.noise_scale_load},
                       {"noise_scale_price", c.noise_scale_price},
                       {"ar1_phi", c.ar1_phi},
                       {"tail_prob", c.tail_prob},
                       {"tail_magnitude", c.tail_magnitude}};
}

inline void from_json(const nlohmann::json& j, GenConfig& c) {
    GenConfig d;
    c.n = j.value("n", d.n);
    c.t = j.value("t", d.t);
    c.seed = j.value("seed", d.seed);
    c.dt_hours = j.value("dt_hours", d.dt_hours);
    c.base_load_kw = j.value("base_load_kw", d.base_load_kw);
    c.load_morning_peak_kw = j.value("load_morning_peak_kw", d.load_morning_peak_kw);
    c.load_evening_peak_kw = j.value("load_evening_peak_kw", d.load_evening_peak_kw);
    c.wind_capacity_kw = j.value("wind_capacity_kw", d.wind_capacity_kw);
    c.wind_mean_level = j.value("wind_mean_level", d.wind_mean_level);
    c.price_base = j.value("price_base", d.price_base);
    c.price_peak = j.value("price_peak", d.price_peak);
    c.price_load_coupling = j.value("price_load_coupling", d.price_load_coupling);
    c.noise_scale_load = j.value("noise_scale_load", d.noise_scale_load);
    c.noise_scale_price = j.value("noise_scale_price", d.noise_scale_price);
    c.ar1_phi = j.value("ar1_phi", d.ar1_phi);
    c.tail_prob = j.value("tail_prob", d.tail_prob);
    c.tail_magnitude = j.value("tail_magnitude", d.tail_magnitude);
}

namespace detail {

inline double bump(double hour, double center, double width) {
    const double x = (hour - center) / width;
    return std::exp(-0.5 * x * x);
}

// Stationary AR(1) stream with unit marginal sd.
class Ar1 {
public:
    Ar1(std::mt19937_64& rng, double phi) : rng_(&rng), phi_(phi) {
        x_ = normal_();
    }
    double next() {
        const double innov = std::sqrt(1.0 - phi_ * phi_) * normal_();
        x_ = phi_ * x_ + innov;
        return x_;
    }

private:
    double normal_() { return std::normal_distribution<double>(0.0, 1.0)(*rng_); }
    std::mt19937_64* rng_;
    double phi_;
    double x_ = 0.0;
};

} // namespace detail

struct GeneratedSet {
    ScenarioSet set;
    std::vector<std::size_t> spiked_ids;
};

inline GeneratedSet generate_with_info(const GenConfig& cfg) {
    cfg.validate();
    GeneratedSet out;
    out.set.dt_hours = cfg.dt_hours;

    for (std::size_t i = 0; i < cfg.n; ++i) {
        std::mt19937_64 rng(mix_seed(cfg.seed, i));
        detail::Ar1 load_noise(rng, cfg.ar1_phi);
        detail::Ar1 wind_noise(rng, cfg.ar1_phi);
        detail::Ar1 price_noise(rng, cfg.ar1_phi);
        const double wind_level =
            cfg.wind_mean_level * (0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng));

        const bool spiked =
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.tail_prob;
        const int spike_start =
            int(cfg.t * (0.3 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng)));
        const double spike_width_h = 1.5;

        Scenario s;
        s.net_load.resize(std::size_t(cfg.t));
        s.price.resize(std::size_t(cfg.t));
        s.renewable.resize(std::size_t(cfg.t));
        for (int t = 0; t < cfg.t; ++t) {
            const double hour = std::fmod(double(t) * cfg.dt_hours, 24.0);
            const double ln = load_noise.next();
            double load = cfg.base_load_kw + cfg.load_morning_peak_kw * detail::bump(hour, 8.5, 2.0) +
                          cfg.load_evening_peak_kw * detail::bump(hour, 19.0, 2.5) +
                          cfg.noise_scale_load * ln;
            double wind = cfg.wind_capacity_kw *
                          std::clamp(wind_level + 0.15 * wind_noise.next(), 0.0, 1.0);
            double price = (cfg.price_base + cfg.price_peak * detail::bump(hour, 19.5, 3.0)) *
                               (1.0 + cfg.price_load_coupling * 0.2 * ln) +
                           cfg.noise_scale_price * price_noise.next();
            if (spiked) {
                const double spike_hour = double(spike_start) * cfg.dt_hours;
                const double shape = detail::bump(hour, spike_hour, spike_width_h);
                load += cfg.tail_magnitude * 0.6 * cfg.base_load_kw * shape;
                wind *= std::max(0.0, 1.0 - 0.9 * shape); // lull coincides with the spike
                price += cfg.tail_magnitude * cfg.price_base * shape;
            }
            s.net_load[std::size_t(t)] = load - wind;
            s.renewable[std::size_t(t)] = wind;
            s.price[std::size_t(t)] = std::max(0.01, price);
        }
        out.set.scenarios.push_back(std::move(s));
        out.set.probabilities.push_back(1.0 / double(cfg.n));
        if (spiked) out.spiked_ids.push_back(i);
    }
    out.set.validate();
    return out;
}

inline ScenarioSet generate(const GenConfig& cfg) { return generate_with_info(cfg).set; }

// Bundle writer; generator provenance rides along in the meta block.
inline void generate_to_file(const GenConfig& cfg, const std::filesystem::path& path) {
    GeneratedSet g = generate_with_info(cfg);
    nlohmann::json meta{{"generator", nlohmann::json(cfg)}, {"spiked_ids", g.spiked_ids}};
    save_scenario_set(g.set, path, meta);
}

} // namespace cvarsr
