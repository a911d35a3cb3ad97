#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "cvarsr/common.hpp"
#include "cvarsr/scenario.hpp"

namespace cvarsr {

// A discrete cost distribution projected into the problem space: per-scenario
// objective values in input order, the sorting permutation, and the VaR atom.
//
// The VaR atom is the first sorted position whose cumulative probability
// reaches alpha; at an exact cumulative boundary the earlier atom is selected.
struct Projection {
    std::vector<double> values;        // input order
    std::vector<double> probabilities; // input order
    std::vector<std::size_t> order;    // order[s] = input index of the s-th smallest value
    std::size_t var_pos = 0;           // position of the VaR atom in sorted order (0-based)
    double var_value = 0.0;
    double alpha = 0.0;

    std::size_t size() const { return values.size(); }
    double sorted_value(std::size_t s) const { return values[order[s]]; }
    double sorted_prob(std::size_t s) const { return probabilities[order[s]]; }
};

struct RiskDecomposition {
    double expectation = 0.0;
    double var = 0.0;
    double cvar = 0.0;
    double objective = 0.0;
};

namespace detail {
inline void check_distribution(const std::vector<double>& values,
                               const std::vector<double>& probabilities) {
    require(!values.empty(), "empty distribution");
    require(values.size() == probabilities.size(), "value/probability length mismatch");
    double sum = 0.0;
    for (double p : probabilities) {
        require(p > 0.0, "non-positive probability");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, "probabilities do not sum to 1");
}
} // namespace detail

inline Projection project(const std::vector<double>& values,
                          const std::vector<double>& probabilities, double alpha) {
    detail::check_distribution(values, probabilities);
    require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");

    Projection p;
    p.values = values;
    p.probabilities = probabilities;
    p.alpha = alpha;
    p.order.resize(values.size());
    std::iota(p.order.begin(), p.order.end(), std::size_t{0});
    // Stable: ties keep input order, so the VaR index is deterministic.
    std::stable_sort(p.order.begin(), p.order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double cum = 0.0;
    p.var_pos = p.order.size() - 1;
    for (std::size_t s = 0; s < p.order.size(); ++s) {
        cum += probabilities[p.order[s]];
        if (cum >= alpha) {
            p.var_pos = s;
            break;
        }
    }
    p.var_value = p.sorted_value(p.var_pos);
    return p;
}

inline double cvar(const Projection& proj, double alpha) {
    require(proj.alpha == alpha, "projection was built with a different alpha");
    double tail = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i)
        tail += proj.probabilities[i] * std::max(0.0, proj.values[i] - proj.var_value);
    return proj.var_value + tail / (1.0 - alpha);
}

inline RiskDecomposition evaluate_objective(const std::vector<double>& values,
                                            const std::vector<double>& probabilities,
                                            const RiskParams& params) {
    params.validate();
    Projection proj = project(values, probabilities, params.alpha);
    RiskDecomposition d;
    for (std::size_t i = 0; i < values.size(); ++i)
        d.expectation += probabilities[i] * values[i];
    d.var = proj.var_value;
    d.cvar = cvar(proj, params.alpha);
    d.objective = d.expectation + params.lambda * d.cvar;
    return d;
}

inline RiskDecomposition evaluate_objective(const Projection& proj, const RiskParams& params) {
    params.validate();
    require(proj.alpha == params.alpha, "projection was built with a different alpha");
    RiskDecomposition d;
    for (std::size_t i = 0; i < proj.size(); ++i)
        d.expectation += proj.probabilities[i] * proj.values[i];
    d.var = proj.var_value;
    d.cvar = cvar(proj, params.alpha);
    d.objective = d.expectation + params.lambda * d.cvar;
    return d;
}

// Independent oracle: Rockafellar-Uryasev objective scanned over every atom as
// the candidate threshold. The minimum over candidates equals CVaR.
inline double cvar_by_scan(const std::vector<double>& values,
                           const std::vector<double>& probabilities, double alpha) {
    detail::check_distribution(values, probabilities);
    require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    double best = std::numeric_limits<double>::infinity();
    for (double v : values) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            acc += probabilities[i] * std::max(0.0, values[i] - v);
        best = std::min(best, v + acc / (1.0 - alpha));
    }
    return best;
}

} // namespace cvarsr
