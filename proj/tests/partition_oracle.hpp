#pragma once

// Test-side brute-force enumerator for the scenario partition/selection
// problem: representatives x assignments x VaR picks, under the same closed
// confidence-window convention as the MIP. Independent of the MIP encoding.

#include <cmath>
#include <limits>
#include <vector>

#include "cvarsr/ipdsr.hpp"

namespace oracle {

struct PartitionBest {
    double objective = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> reps;
    std::size_t var_pick = 0;
};

inline PartitionBest brute_force_partition(const cvarsr::AggregatedObjectives& agg, std::size_t K,
                                           const cvarsr::RiskParams& risk, double v_xi) {
    const std::size_t n = agg.size();
    const double c = risk.lambda / (1.0 - risk.alpha);
    PartitionBest best;

    std::vector<std::size_t> S;
    std::vector<std::size_t> others;

    auto eval_assignment = [&](const std::vector<std::size_t>& assign_to /*per atom: rep atom*/,
                               std::size_t p) {
        // masses per representative
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) w[assign_to[i]] += agg.probabilities[i];
        double h_mass = 0.0;
        for (std::size_t j : S)
            if (j < p) h_mass += w[j];
        if (h_mass > risk.alpha + 1e-12) return;
        for (std::size_t kk : S)
            if (kk >= p && h_mass + w[kk] < risk.alpha - 1e-12) return;

        const double v_zeta = agg.values[p];
        double sum = risk.lambda * (v_xi - v_zeta);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = assign_to[i];
            const double tail_i = std::max(0.0, agg.values[i] - v_xi);
            const double q_j = std::max(0.0, agg.values[j] - v_zeta);
            sum += agg.probabilities[i] * (agg.values[i] - agg.values[j] + c * (tail_i - q_j));
        }
        const double obj = std::abs(sum);
        if (obj < best.objective - 1e-15) {
            best.objective = obj;
            best.reps = S;
            best.var_pick = p;
        }
    };

    std::vector<std::size_t> assign_to(n, 0);
    std::function<void(std::size_t, std::size_t)> assign_rec = [&](std::size_t oi, std::size_t p) {
        if (oi == others.size()) {
            eval_assignment(assign_to, p);
            return;
        }
        for (std::size_t j : S) {
            assign_to[others[oi]] = j;
            assign_rec(oi + 1, p);
        }
    };

    std::function<void(std::size_t)> choose_rec = [&](std::size_t start) {
        if (S.size() == K) {
            others.clear();
            for (std::size_t i = 0; i < n; ++i) {
                bool sel = false;
                for (std::size_t j : S)
                    if (j == i) sel = true;
                if (sel)
                    assign_to[i] = i; // representatives belong to their own cluster
                else
                    others.push_back(i);
            }
            for (std::size_t p : S) assign_rec(0, p);
            return;
        }
        for (std::size_t j = start; j < n; ++j) {
            S.push_back(j);
            choose_rec(j + 1);
            S.pop_back();
        }
    };
    choose_rec(0);
    return best;
}

} // namespace oracle
