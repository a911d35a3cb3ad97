#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cvarsr/common.hpp"
#include "cvarsr/scenario.hpp"

namespace cvarsr {

enum class DistanceKind { EuclideanFlat, Wasserstein1D };

namespace detail {

// Flattened 2T feature vectors, each channel standardized by its global
// standard deviation so load (kW) and price (currency) weigh comparably.
inline std::vector<std::vector<double>> standardized_features(const ScenarioSet& set) {
    const std::size_t n = set.size(), t = set.horizon();
    double mean_l = 0.0, mean_p = 0.0;
    for (const auto& s : set.scenarios)
        for (std::size_t u = 0; u < t; ++u) {
            mean_l += s.net_load[u];
            mean_p += s.price[u];
        }
    mean_l /= double(n * t);
    mean_p /= double(n * t);
    double var_l = 0.0, var_p = 0.0;
    for (const auto& s : set.scenarios)
        for (std::size_t u = 0; u < t; ++u) {
            var_l += (s.net_load[u] - mean_l) * (s.net_load[u] - mean_l);
            var_p += (s.price[u] - mean_p) * (s.price[u] - mean_p);
        }
    const double sd_l = std::max(std::sqrt(var_l / double(n * t)), 1e-12);
    const double sd_p = std::max(std::sqrt(var_p / double(n * t)), 1e-12);

    std::vector<std::vector<double>> f(n, std::vector<double>(2 * t));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t u = 0; u < t; ++u) {
            f[i][u] = set.scenarios[i].net_load[u] / sd_l;
            f[i][t + u] = set.scenarios[i].price[u] / sd_p;
        }
    return f;
}

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t u = 0; u < a.size(); ++u) acc += (a[u] - b[u]) * (a[u] - b[u]);
    return acc;
}

// 1-D empirical Wasserstein distance between two equal-length samples:
// mean absolute difference of the sorted values.
inline double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (std::size_t u = 0; u < a.size(); ++u) acc += std::abs(a[u] - b[u]);
    return acc / double(a.size());
}

inline std::vector<std::vector<double>> distance_matrix(const ScenarioSet& set,
                                                        DistanceKind kind) {
    const std::size_t n = set.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    if (kind == DistanceKind::EuclideanFlat) {
        auto f = standardized_features(set);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                d[i][j] = d[j][i] = std::sqrt(sqdist(f[i], f[j]));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double wl =
                    wasserstein_1d(set.scenarios[i].net_load, set.scenarios[j].net_load);
                const double wp = wasserstein_1d(set.scenarios[i].price, set.scenarios[j].price);
                d[i][j] = d[j][i] = 0.5 * (wl + wp);
            }
    }
    return d;
}

inline ReducedScenarioSet assemble_reduction(const ScenarioSet& set,
                                             const std::vector<std::size_t>& medoids,
                                             const std::vector<std::size_t>& assignment) {
    ReducedScenarioSet r;
    r.source_ids = medoids;
    r.assignment = assignment;
    r.weights = cluster_weights(assignment, set.probabilities, medoids.size());
    r.validate_against(set);
    return r;
}

} // namespace detail

// Lloyd's algorithm on standardized flat features, representatives converted
// to in-cluster medoids so every reduction is evaluable through the recourse
// problem. Restarts pick the lowest-inertia run.
inline ReducedScenarioSet kmeans_reduce(const ScenarioSet& set, std::size_t k,
                                        std::uint64_t seed, int restarts = 1) {
    set.validate();
    const std::size_t n = set.size();
    require(k >= 1 && k <= n, "k must lie in [1, N]");
    auto features = detail::standardized_features(set);

    std::vector<std::size_t> best_assign;
    double best_inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < std::max(1, restarts); ++restart) {
        for (int attempt = 0; attempt < 10; ++attempt) { // re-seed on empty clusters
            std::mt19937_64 rng(mix_seed(seed, std::uint64_t(restart) * 16 + std::uint64_t(attempt)));

            // k-means++ seeding over distinct indices
            std::vector<std::size_t> centers;
            std::vector<double> d2(n, std::numeric_limits<double>::infinity());
            centers.push_back(std::size_t(rng() % n));
            while (centers.size() < k) {
                double total = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    d2[i] = std::min(d2[i], detail::sqdist(features[i], features[centers.back()]));
                    total += d2[i];
                }
                std::size_t pick = 0;
                if (total <= 1e-300) {
                    std::vector<std::size_t> unchosen;
                    for (std::size_t i = 0; i < n; ++i)
                        if (std::find(centers.begin(), centers.end(), i) == centers.end())
                            unchosen.push_back(i);
                    pick = unchosen[rng() % unchosen.size()];
                } else {
                    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
                    for (; pick + 1 < n; ++pick) {
                        r -= d2[pick];
                        if (r <= 0) break;
                    }
                    if (std::find(centers.begin(), centers.end(), pick) != centers.end()) continue;
                }
                centers.push_back(pick);
            }

            std::vector<std::vector<double>> centroids;
            for (std::size_t c : centers) centroids.push_back(features[c]);
            std::vector<std::size_t> assign(n, 0);
            for (int iter = 0; iter < 200; ++iter) {
                bool changed = false;
                for (std::size_t i = 0; i < n; ++i) {
                    std::size_t bestc = 0;
                    double bestd = std::numeric_limits<double>::infinity();
                    for (std::size_t c = 0; c < k; ++c) {
                        const double dd = detail::sqdist(features[i], centroids[c]);
                        if (dd < bestd - 1e-15) {
                            bestd = dd;
                            bestc = c;
                        }
                    }
                    if (assign[i] != bestc) {
                        assign[i] = bestc;
                        changed = true;
                    }
                }
                std::vector<std::vector<double>> sums(k, std::vector<double>(features[0].size(), 0.0));
                std::vector<std::size_t> counts(k, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    ++counts[assign[i]];
                    for (std::size_t u = 0; u < features[i].size(); ++u)
                        sums[assign[i]][u] += features[i][u];
                }
                for (std::size_t c = 0; c < k; ++c) {
                    if (counts[c] == 0) {
                        // re-seed at the farthest point
                        std::size_t far = 0;
                        double fard = -1.0;
                        for (std::size_t i = 0; i < n; ++i) {
                            const double dd = detail::sqdist(features[i], centroids[assign[i]]);
                            if (dd > fard) {
                                fard = dd;
                                far = i;
                            }
                        }
                        centroids[c] = features[far];
                        changed = true;
                    } else {
                        for (std::size_t u = 0; u < sums[c].size(); ++u)
                            centroids[c][u] = sums[c][u] / double(counts[c]);
                    }
                }
                if (!changed) break;
            }

            // duplicate-heavy inputs can leave empty clusters: steal members
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t a : assign) ++counts[a];
            bool repaired = true;
            for (std::size_t c = 0; c < k && repaired; ++c) {
                while (counts[c] == 0) {
                    std::size_t donor = std::size_t(
                        std::max_element(counts.begin(), counts.end()) - counts.begin());
                    if (counts[donor] <= 1) {
                        repaired = false;
                        break;
                    }
                    for (std::size_t i = 0; i < n; ++i)
                        if (assign[i] == donor) {
                            assign[i] = c;
                            --counts[donor];
                            ++counts[c];
                            break;
                        }
                }
            }
            if (!repaired) continue; // next attempt

            std::vector<std::vector<double>> means(k, std::vector<double>(features[0].size(), 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t u = 0; u < features[i].size(); ++u)
                    means[assign[i]][u] += features[i][u] / double(counts[assign[i]]);
            double inertia = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                inertia += detail::sqdist(features[i], means[assign[i]]);
            if (inertia < best_inertia - 1e-12) {
                best_inertia = inertia;
                best_assign = assign;
            }
            break; // attempt succeeded
        }
    }
    require(!best_assign.empty(), "k-means failed to produce k non-empty clusters");

    // medoid per cluster: member closest to the centroid
    std::vector<std::vector<double>> centroids(k, std::vector<double>(features[0].size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++counts[best_assign[i]];
        for (std::size_t u = 0; u < features[i].size(); ++u)
            centroids[best_assign[i]][u] += features[i][u];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (auto& v : centroids[c]) v /= double(counts[c]);
    std::vector<std::size_t> medoids(k, 0);
    std::vector<double> bestd(k, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = best_assign[i];
        const double dd = detail::sqdist(features[i], centroids[c]);
        if (dd < bestd[c] - 1e-15) {
            bestd[c] = dd;
            medoids[c] = i;
        }
    }
    return detail::assemble_reduction(set, medoids, best_assign);
}

// Random medoid draw: k distinct scenarios picked k-means++ style, everything
// assigned to its nearest pick. Cheap diversity for validated restarts.
inline ReducedScenarioSet random_medoid_reduction(const ScenarioSet& set, std::size_t k,
                                                  std::uint64_t seed) {
    set.validate();
    const std::size_t n = set.size();
    require(k >= 1 && k <= n, "k must lie in [1, N]");
    auto features = detail::standardized_features(set);
    std::mt19937_64 rng(seed);

    std::vector<std::size_t> medoids;
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    medoids.push_back(std::size_t(rng() % n));
    while (medoids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], detail::sqdist(features[i], features[medoids.back()]));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total <= 1e-300) {
            std::vector<std::size_t> unchosen;
            for (std::size_t i = 0; i < n; ++i)
                if (std::find(medoids.begin(), medoids.end(), i) == medoids.end())
                    unchosen.push_back(i);
            pick = unchosen[rng() % unchosen.size()];
        } else {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r <= 0) break;
            }
            if (std::find(medoids.begin(), medoids.end(), pick) != medoids.end()) continue;
        }
        medoids.push_back(pick);
    }

    std::vector<std::size_t> assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double dd = detail::sqdist(features[i], features[medoids[c]]);
            if (dd < best - 1e-15) {
                best = dd;
                assign[i] = c;
            }
        }
    }
    for (std::size_t c = 0; c < k; ++c) assign[medoids[c]] = c;
    return detail::assemble_reduction(set, medoids, assign);
}

// Average-linkage agglomeration down to k clusters, medoid representatives.
inline ReducedScenarioSet hierarchical_reduce(const ScenarioSet& set, std::size_t k,
                                              DistanceKind kind) {
    set.validate();
    const std::size_t n = set.size();
    require(k >= 1 && k <= n, "k must lie in [1, N]");
    auto dist = detail::distance_matrix(set, kind);

    std::vector<std::vector<std::size_t>> clusters(n);
    for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
    std::vector<std::vector<double>> cd = dist; // cluster-level average distances
    std::vector<bool> alive(n, true);

    for (std::size_t live = n; live > k; --live) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                if (cd[i][j] < best - 1e-15) {
                    best = cd[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        // Lance-Williams update for average linkage
        const double wi = double(clusters[bi].size()), wj = double(clusters[bj].size());
        for (std::size_t c = 0; c < n; ++c) {
            if (!alive[c] || c == bi || c == bj) continue;
            cd[bi][c] = cd[c][bi] = (wi * cd[bi][c] + wj * cd[bj][c]) / (wi + wj);
        }
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        alive[bj] = false;
    }

    std::vector<std::size_t> medoids;
    std::vector<std::size_t> assign(n, 0);
    std::size_t label = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (!alive[c]) continue;
        // medoid: member with the lowest total distance to its cluster
        std::size_t med = clusters[c][0];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : clusters[c]) {
            double acc = 0.0;
            for (std::size_t j : clusters[c]) acc += dist[i][j];
            if (acc < best - 1e-15) {
                best = acc;
                med = i;
            }
        }
        medoids.push_back(med);
        for (std::size_t i : clusters[c]) assign[i] = label;
        ++label;
    }
    return detail::assemble_reduction(set, medoids, assign);
}

} // namespace cvarsr
