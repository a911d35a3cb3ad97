#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "cvarsr/baselines.hpp"
#include "cvarsr/common.hpp"
#include "cvarsr/milp/backend.hpp"
#include "cvarsr/risk.hpp"
#include "cvarsr/scenario.hpp"
#include "cvarsr/vpp.hpp"

namespace cvarsr {

struct IpdsrConfig {
    std::size_t k = 10;
    int max_iter = 10;
    std::size_t agg_size = 100;
    int restarts = 3;
    double rel_improve_tol = 1e-4;
    double mip_time_limit_s = 60.0;
    double mip_rel_gap = 1e-6;
    std::uint64_t seed = 0;
    int threads = 0;

    void validate(std::size_t n) const {
        require(k >= 1 && k <= n, "k must lie in [1, N]");
        require(agg_size >= k, "agg_size must be at least k");
        require(max_iter >= 1, "max_iter must be >= 1");
        require(restarts >= 1, "restarts must be >= 1");
    }
};

// Projected objective values grouped into weighted atoms: equal-mass quantile
// bins below the VaR threshold, one singleton per atom strictly above it so
// the tail survives aggregation unchanged.
struct AggregatedObjectives {
    std::vector<double> values;        // non-decreasing
    std::vector<double> probabilities; // sums to 1
    std::vector<std::vector<std::size_t>> member_ids; // original scenario ids

    std::size_t size() const { return values.size(); }
};

struct PartitionResult {
    std::vector<std::size_t> representative_ids; // original scenario ids
    std::vector<std::size_t> assignment;         // cluster label per original scenario
    std::vector<double> weights;
    std::size_t var_rep_id = 0;
    double objective_value = 0.0;
    milp::SolveStatus status = milp::SolveStatus::Optimal;

    ReducedScenarioSet to_reduced() const {
        ReducedScenarioSet r;
        r.source_ids = representative_ids;
        r.assignment = assignment;
        r.weights = weights;
        return r;
    }
};

struct IterationRecord {
    int iteration = 0;
    double validation_objective = 0.0;
    double var_value = 0.0;
    double mip_objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> representatives;
};

struct IterationTrace {
    std::vector<IterationRecord> records;

    // CSV in the documented four-column layout; the gap column needs the
    // benchmark optimum and stays empty without it.
    std::string to_csv(std::optional<double> benchmark_objective = std::nullopt) const {
        std::ostringstream os;
        os << "iteration,validation_objective,og_percent,var_value\n";
        os.setf(std::ios::fmtflags(0), std::ios::floatfield);
        os.precision(12);
        for (const auto& r : records) {
            os << r.iteration << "," << r.validation_objective << ",";
            if (benchmark_objective && *benchmark_objective > 0.0)
                os << 100.0 * (r.validation_objective - *benchmark_objective) /
                          *benchmark_objective;
            os << "," << r.var_value << "\n";
        }
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// Objective aggregation
// ---------------------------------------------------------------------------

inline AggregatedObjectives aggregate(const Projection& proj, std::size_t n_prime) {
    const std::size_t n = proj.size();
    require(n_prime >= 1 && n_prime <= n, "aggregation size must lie in [1, N]");

    const double v_alpha = proj.var_value;
    std::size_t first_tail = n;
    for (std::size_t s = 0; s < n; ++s)
        if (proj.sorted_value(s) > v_alpha) {
            first_tail = s;
            break;
        }
    const std::size_t n_tail = n - first_tail;
    const std::size_t body_count = first_tail;
    require(n_prime >= n_tail + (body_count > 0 ? 1 : 0),
            "aggregation size is smaller than the tail atom count");

    AggregatedObjectives agg;
    const std::size_t bins = std::min(n_prime - n_tail, body_count);
    if (body_count > 0) {
        double body_mass = 0.0;
        for (std::size_t s = 0; s < body_count; ++s) body_mass += proj.sorted_prob(s);
        std::size_t idx = 0;
        double cum = 0.0;
        for (std::size_t b = 0; b < bins; ++b) {
            const std::size_t need_later = bins - b - 1;
            const double target = body_mass * double(b + 1) / double(bins);
            std::vector<std::size_t> members;
            double mass = 0.0, weighted = 0.0;
            do {
                const std::size_t orig = proj.order[idx];
                members.push_back(orig);
                mass += proj.probabilities[orig];
                weighted += proj.probabilities[orig] * proj.values[orig];
                cum += proj.probabilities[orig];
                ++idx;
            } while (idx < body_count - need_later && cum + 1e-15 < target);
            agg.values.push_back(weighted / mass);
            agg.probabilities.push_back(mass);
            agg.member_ids.push_back(std::move(members));
        }
    }
    for (std::size_t s = first_tail; s < n; ++s) {
        const std::size_t orig = proj.order[s];
        agg.values.push_back(proj.values[orig]);
        agg.probabilities.push_back(proj.probabilities[orig]);
        agg.member_ids.push_back({orig});
    }
    return agg;
}

// ---------------------------------------------------------------------------
// Scenario partition and representative selection MIP
// ---------------------------------------------------------------------------

namespace detail {

struct PartitionVarRefs {
    std::vector<int> u, nn, h;             // selection, VaR pick, pre-VaR indicator
    std::vector<std::vector<int>> v;       // v[i][j]: atom i assigned to representative j
    std::vector<int> c;                    // cumulative sum of n
    std::vector<int> q;                    // positive part of (value_j - var)
    int v_zeta = -1;                       // reduced-set VaR value
    int t_epi = -1;                        // epigraph of |approximation error|
    double big_m = 0.0;
};

} // namespace detail

// Linearized selection model over the aggregated atoms: choose K
// representatives, assign every atom, pick the reduced-set VaR atom, and
// minimize the absolute gap between the reduced and original risk-adjusted
// sums at the incumbent decision. All products are binary-by-binary or
// binary-by-bounded-continuous, so the linearization is exact.
inline milp::MilpModel build_partition_mip(const AggregatedObjectives& agg, std::size_t k,
                                           const RiskParams& risk, double v_xi_alpha,
                                           detail::PartitionVarRefs& refs) {
    using milp::LinExpr;
    risk.validate();
    const std::size_t n = agg.size();
    require(k >= 1 && k <= n, "k must lie in [1, N']");
    for (std::size_t j = 0; j + 1 < n; ++j)
        require(agg.values[j] <= agg.values[j + 1] + 1e-12, "aggregated values must be sorted");

    const double c_tail = risk.lambda / (1.0 - risk.alpha);
    const double f_min = agg.values.front(), f_max = agg.values.back();
    const double big_m = f_max - f_min;
    refs.big_m = big_m;

    milp::MilpModel m;
    refs.u.resize(n);
    refs.nn.resize(n);
    refs.h.resize(n);
    for (std::size_t j = 0; j < n; ++j) refs.u[j] = m.add_binary("u" + std::to_string(j));
    for (std::size_t j = 0; j < n; ++j) refs.nn[j] = m.add_binary("n" + std::to_string(j));
    for (std::size_t j = 0; j < n; ++j) refs.h[j] = m.add_binary("h" + std::to_string(j));
    refs.v.assign(n, std::vector<int>(n, -1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            refs.v[i][j] = m.add_binary("v" + std::to_string(i) + "_" + std::to_string(j));

    refs.c.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        refs.c[i] = m.add_continuous("c" + std::to_string(i), 0.0, 1.0);
    refs.q.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        refs.q[j] = m.add_continuous("q" + std::to_string(j), 0.0, std::max(big_m, 0.0));
    refs.v_zeta = m.add_continuous("v_zeta", f_min, f_max);
    refs.t_epi = m.add_continuous("t", 0.0, milp::kInf);

    // r[i][j] = v[i][j] * q[j]; s[i][j] = h[j] AND v[i][j]
    auto rvar = std::vector<std::vector<int>>(n, std::vector<int>(n, -1));
    auto svar = std::vector<std::vector<int>>(n, std::vector<int>(n, -1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            rvar[i][j] = m.add_continuous("r" + std::to_string(i) + "_" + std::to_string(j), 0.0,
                                          std::max(big_m, 0.0));
            svar[i][j] =
                m.add_continuous("s" + std::to_string(i) + "_" + std::to_string(j), 0.0, 1.0);
        }

    // selection and assignment structure
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j)
                m.add_eq("vj" + std::to_string(j), {{refs.v[j][j], 1.0}, {refs.u[j], -1.0}}, 0.0);
            else
                m.add_le("vu" + std::to_string(i) + "_" + std::to_string(j),
                         {{refs.v[i][j], 1.0}, {refs.u[j], -1.0}}, 0.0);
        }
        m.add_le("nu" + std::to_string(j), {{refs.nn[j], 1.0}, {refs.u[j], -1.0}}, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        LinExpr row;
        for (std::size_t j = 0; j < n; ++j) row.push_back({refs.v[i][j], 1.0});
        m.add_eq("assign" + std::to_string(i), std::move(row), 1.0);
    }
    {
        LinExpr su, sn;
        for (std::size_t j = 0; j < n; ++j) {
            su.push_back({refs.u[j], 1.0});
            sn.push_back({refs.nn[j], 1.0});
        }
        m.add_eq("numreps", std::move(su), double(k));
        m.add_eq("onevar", std::move(sn), 1.0);
    }
    {
        LinExpr row{{refs.v_zeta, -1.0}};
        for (std::size_t j = 0; j < n; ++j) row.push_back({refs.nn[j], agg.values[j]});
        m.add_eq("vzeta", std::move(row), 0.0);
    }

    // cumulative c_i = sum_{p<=i} n_p and the pre-VaR indicator
    // h_i = u_i (1 - c_i), linearized over binaries
    for (std::size_t i = 0; i < n; ++i) {
        LinExpr row{{refs.c[i], 1.0}};
        for (std::size_t p = 0; p <= i; ++p) row.push_back({refs.nn[p], -1.0});
        m.add_eq("cum" + std::to_string(i), std::move(row), 0.0);
        m.add_le("hu" + std::to_string(i), {{refs.h[i], 1.0}, {refs.u[i], -1.0}}, 0.0);
        m.add_le("hc" + std::to_string(i), {{refs.h[i], 1.0}, {refs.c[i], 1.0}}, 1.0);
        m.add_ge("huc" + std::to_string(i),
                 {{refs.h[i], 1.0}, {refs.u[i], -1.0}, {refs.c[i], 1.0}}, 0.0);
    }

    // q_j = (value_j - v_zeta) when the representative sits at or after the
    // VaR atom (e_j = u_j - h_j), 0 otherwise
    for (std::size_t j = 0; j < n; ++j) {
        const std::string sj = std::to_string(j);
        m.add_ge("qlo" + sj,
                 {{refs.q[j], 1.0}, {refs.v_zeta, 1.0}, {refs.u[j], -big_m}, {refs.h[j], big_m}},
                 agg.values[j] - big_m);
        m.add_le("qhi" + sj,
                 {{refs.q[j], 1.0}, {refs.v_zeta, 1.0}, {refs.u[j], big_m}, {refs.h[j], -big_m}},
                 agg.values[j] + big_m);
        m.add_le("qe" + sj, {{refs.q[j], 1.0}, {refs.u[j], -big_m}, {refs.h[j], big_m}}, 0.0);
    }

    // exact products
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::string sij = std::to_string(i) + "_" + std::to_string(j);
            m.add_le("rm" + sij, {{rvar[i][j], 1.0}, {refs.v[i][j], -big_m}}, 0.0);
            m.add_le("rq" + sij, {{rvar[i][j], 1.0}, {refs.q[j], -1.0}}, 0.0);
            m.add_ge("rl" + sij, {{rvar[i][j], 1.0}, {refs.q[j], -1.0}, {refs.v[i][j], -big_m}},
                     -big_m);
            m.add_le("sh" + sij, {{svar[i][j], 1.0}, {refs.h[j], -1.0}}, 0.0);
            m.add_le("sv" + sij, {{svar[i][j], 1.0}, {refs.v[i][j], -1.0}}, 0.0);
            m.add_ge("shv" + sij,
                     {{svar[i][j], 1.0}, {refs.h[j], -1.0}, {refs.v[i][j], -1.0}}, -1.0);
        }

    // VaR confidence window on the reduced weights
    {
        LinExpr row;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                row.push_back({svar[i][j], agg.probabilities[i]});
        m.add_le("var_mass_le", std::move(row), risk.alpha);
    }
    for (std::size_t kk = 0; kk < n; ++kk) {
        LinExpr row;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                row.push_back({svar[i][j], agg.probabilities[i]});
        for (std::size_t i = 0; i < n; ++i) {
            row.push_back({refs.v[i][kk], agg.probabilities[i]});
            row.push_back({svar[i][kk], -agg.probabilities[i]});
        }
        row.push_back({refs.u[kk], -risk.alpha});
        row.push_back({refs.h[kk], risk.alpha});
        m.add_ge("var_mass_ge" + std::to_string(kk), std::move(row), 0.0);
    }

    // epigraph of the absolute approximation error
    {
        LinExpr plus{{refs.t_epi, 1.0}, {refs.v_zeta, risk.lambda}};
        LinExpr minus{{refs.t_epi, 1.0}, {refs.v_zeta, -risk.lambda}};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double tail_i = std::max(0.0, agg.values[i] - v_xi_alpha);
                const double a_ij =
                    agg.probabilities[i] * (agg.values[i] - agg.values[j] + c_tail * tail_i);
                if (a_ij != 0.0) {
                    plus.push_back({refs.v[i][j], -a_ij});
                    minus.push_back({refs.v[i][j], a_ij});
                }
                const double b_ij = c_tail * agg.probabilities[i];
                if (b_ij != 0.0) {
                    plus.push_back({rvar[i][j], b_ij});
                    minus.push_back({rvar[i][j], -b_ij});
                }
            }
        m.add_ge("epi_plus", std::move(plus), risk.lambda * v_xi_alpha);
        m.add_ge("epi_minus", std::move(minus), -risk.lambda * v_xi_alpha);
    }

    m.objective = {{refs.t_epi, 1.0}};
    return m;
}

inline milp::MilpModel build_partition_mip(const AggregatedObjectives& agg, std::size_t k,
                                           const RiskParams& risk, double v_xi_alpha) {
    detail::PartitionVarRefs refs;
    return build_partition_mip(agg, k, risk, v_xi_alpha, refs);
}

// Decode a partition solve and re-map aggregated atoms to original scenarios:
// each selected atom is represented by the member whose projected value is
// closest to the atom mean (ties to the lower index); memberships expand
// through the atom member lists and weights are rebuilt from original
// probabilities.
inline PartitionResult solve_partition(const milp::MilpModel& model,
                                       const detail::PartitionVarRefs& refs,
                                       milp::MilpSolver& solver, const AggregatedObjectives& agg,
                                       const Projection& original_proj,
                                       double time_limit_s = milp::kInf, double rel_gap = 1e-6) {
    milp::MilpSolution sol = solver.solve(model, time_limit_s, rel_gap);
    if (sol.status == milp::SolveStatus::Infeasible)
        throw Error("partition MIP infeasible: alpha is inconsistent with the atom weights");
    require(sol.has_solution(), "partition MIP returned no solution");

    const std::size_t n = agg.size();
    std::vector<std::size_t> selected;
    for (std::size_t j = 0; j < n; ++j)
        if (sol.value(refs.u[j]) > 0.5) selected.push_back(j);

    // atom -> original representative
    std::vector<std::size_t> rep_of_atom(n, 0);
    std::vector<std::size_t> cluster_of_atom(n, 0);
    std::vector<std::size_t> rep_ids;
    for (std::size_t c = 0; c < selected.size(); ++c) {
        const std::size_t j = selected[c];
        std::size_t best = agg.member_ids[j].front();
        double bestd = std::numeric_limits<double>::infinity();
        for (std::size_t orig : agg.member_ids[j]) {
            const double d = std::abs(original_proj.values[orig] - agg.values[j]);
            if (d < bestd - 1e-15 || (std::abs(d - bestd) <= 1e-15 && orig < best)) {
                bestd = d;
                best = orig;
            }
        }
        rep_ids.push_back(best);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t assigned = n;
        for (std::size_t c = 0; c < selected.size(); ++c)
            if (sol.value(refs.v[i][selected[c]]) > 0.5) {
                assigned = c;
                break;
            }
        require(assigned < n, "partition decode: atom has no representative");
        cluster_of_atom[i] = assigned;
        rep_of_atom[i] = rep_ids[assigned];
    }

    PartitionResult out;
    out.status = sol.status;
    out.objective_value = sol.objective;
    out.representative_ids = rep_ids;
    out.assignment.assign(original_proj.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t orig : agg.member_ids[i]) out.assignment[orig] = cluster_of_atom[i];
    out.weights = cluster_weights(out.assignment, original_proj.probabilities, rep_ids.size());

    std::size_t var_atom = n;
    for (std::size_t j = 0; j < n; ++j)
        if (sol.value(refs.nn[j]) > 0.5) var_atom = j;
    require(var_atom < n, "partition decode: no VaR atom selected");
    for (std::size_t c = 0; c < selected.size(); ++c)
        if (selected[c] == var_atom) out.var_rep_id = rep_ids[c];
    return out;
}

// ---------------------------------------------------------------------------
// Algorithm driver
// ---------------------------------------------------------------------------

struct IpdsrState {
    ReducedScenarioSet reduced;
    FullSolveResult solution;
    Projection validation;
    RiskDecomposition decomposition;
};

struct IpdsrOutcome {
    ReducedScenarioSet reduced;
    FullSolveResult solution;
    double validation_objective = 0.0;
    IterationTrace trace;
};

namespace detail {

inline IpdsrState evaluate_candidate(const ReducedScenarioSet& candidate, const ScenarioSet& set,
                                     const VppParams& vpp, const RiskParams& risk,
                                     milp::MilpSolver& solver, int threads) {
    IpdsrState st;
    st.reduced = candidate;
    st.solution = solve_full(materialize(candidate, set), vpp, risk, solver);
    auto [proj, dec] = validate_decision(st.solution.decision, set, vpp, risk, solver, threads);
    st.validation = std::move(proj);
    st.decomposition = dec;
    return st;
}

// Warm-start hint for the partition MIP from the incumbent reduction, mapped
// into atom space. Best effort: skipped when two representatives collapse
// into one atom.
inline void attach_partition_hint(milp::MilpModel& model, const PartitionVarRefs& refs,
                                  const AggregatedObjectives& agg,
                                  const ReducedScenarioSet& incumbent, double alpha) {
    const std::size_t n = agg.size();
    std::vector<std::size_t> atom_of(incumbent.assignment.size(), n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t orig : agg.member_ids[a]) atom_of[orig] = a;

    std::vector<std::size_t> rep_atom(incumbent.k());
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < incumbent.k(); ++c) {
        const std::size_t a = atom_of[incumbent.source_ids[c]];
        if (used[a]) return; // collapsed representatives; no usable hint
        used[a] = true;
        rep_atom[c] = a;
    }
    for (std::size_t j = 0; j < n; ++j) model.hint[refs.u[j]] = used[j] ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cluster = incumbent.assignment[agg.member_ids[i].front()];
        for (std::size_t j = 0; j < n; ++j) model.hint[refs.v[i][j]] = 0.0;
        model.hint[refs.v[i][rep_atom[cluster]]] = 1.0;
    }
    // VaR pick: the alpha-crossing cluster of the incumbent weights, walked in
    // atom order (atoms are sorted by value).
    std::vector<std::size_t> order(incumbent.k());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rep_atom[a] < rep_atom[b]; });
    std::size_t var_cluster = order.back();
    double cum = 0.0;
    for (std::size_t s = 0; s < order.size(); ++s) {
        cum += incumbent.weights[order[s]];
        if (cum >= alpha) {
            var_cluster = order[s];
            break;
        }
    }
    for (std::size_t j = 0; j < n; ++j) model.hint[refs.nn[j]] = 0.0;
    model.hint[refs.nn[rep_atom[var_cluster]]] = 1.0;
}

} // namespace detail

// Distribution-driven initialization: the first restart is plain k-means, the
// rest draw diverse random medoid sets; every restart is validated on the full
// set and the best validated one wins.
inline IpdsrState initialize(const ScenarioSet& set, const IpdsrConfig& cfg, const VppParams& vpp,
                             const RiskParams& risk, milp::MilpSolver& solver) {
    cfg.validate(set.size());
    std::optional<IpdsrState> best;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t rseed = mix_seed(cfg.seed, std::uint64_t(r));
        ReducedScenarioSet red = r == 0 ? kmeans_reduce(set, cfg.k, rseed, 1)
                                        : random_medoid_reduction(set, cfg.k, rseed);
        IpdsrState st = detail::evaluate_candidate(red, set, vpp, risk, solver, cfg.threads);
        if (!best || st.decomposition.objective < best->decomposition.objective - 1e-12)
            best = std::move(st);
    }
    return *best;
}

// The iterative reduction loop: project through the incumbent decision,
// aggregate, select representatives with the partition MIP, re-solve the
// reduced problem, and keep the iterate whose validated objective is
// smallest. Stops early after three stagnant iterations.
inline IpdsrOutcome run_ipdsr(const ScenarioSet& set, const IpdsrConfig& cfg, const VppParams& vpp,
                              const RiskParams& risk, milp::MilpSolver& solver) {
    set.validate();
    cfg.validate(set.size());

    IpdsrState current = initialize(set, cfg, vpp, risk, solver);
    IpdsrState best = current;

    // The partition model collapses under propagation once its binaries are
    // fixed and its LP relaxation carries no bound (the epigraph of an
    // absolute value reaches zero), so the budgeted enumeration backend beats
    // LP-based branch and bound on it. An explicit CVAR_SR_SOLVER choice
    // overrides this routing.
    std::shared_ptr<milp::MilpSolver> partition_solver;
    milp::MilpSolver* psolver = &solver;
    if (!std::getenv("CVAR_SR_SOLVER")) {
        partition_solver = std::make_shared<milp::ExhaustiveSolver>(std::size_t(1) << 20);
        psolver = partition_solver.get();
    }

    IpdsrOutcome out;
    IterationRecord rec0;
    rec0.iteration = 0;
    rec0.validation_objective = current.decomposition.objective;
    rec0.var_value = current.validation.var_value;
    rec0.representatives = current.reduced.source_ids;
    out.trace.records.push_back(rec0);

    int stagnant = 0;
    for (int kappa = 0; kappa < cfg.max_iter; ++kappa) {
        const double prev_best = best.decomposition.objective;

        AggregatedObjectives agg =
            aggregate(current.validation, std::min(cfg.agg_size, set.size()));
        detail::PartitionVarRefs refs;
        milp::MilpModel model =
            build_partition_mip(agg, cfg.k, risk, current.validation.var_value, refs);
        detail::attach_partition_hint(model, refs, agg, current.reduced, risk.alpha);

        PartitionResult part;
        try {
            part = solve_partition(model, refs, *psolver, agg, current.validation,
                                   cfg.mip_time_limit_s, cfg.mip_rel_gap);
        } catch (const Error&) {
            break; // no candidate available within the budget; keep the best iterate
        }

        ReducedScenarioSet candidate = part.to_reduced();
        candidate.validate_against(set);
        IpdsrState next =
            detail::evaluate_candidate(candidate, set, vpp, risk, solver, cfg.threads);

        IterationRecord rec;
        rec.iteration = kappa + 1;
        rec.validation_objective = next.decomposition.objective;
        rec.var_value = next.validation.var_value;
        rec.mip_objective = part.objective_value;
        rec.representatives = candidate.source_ids;
        out.trace.records.push_back(rec);

        if (next.decomposition.objective < best.decomposition.objective - 1e-12) best = next;
        current = std::move(next); // the chain follows the newest iterate

        const double improve =
            (prev_best - best.decomposition.objective) / std::max(1.0, std::abs(prev_best));
        stagnant = improve < cfg.rel_improve_tol ? stagnant + 1 : 0;
        if (stagnant >= 3) break;
    }

    out.reduced = best.reduced;
    out.solution = best.solution;
    out.validation_objective = best.decomposition.objective;
    return out;
}

} // namespace cvarsr
