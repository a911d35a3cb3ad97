#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "cvarsr/milp/model.hpp"
#include "cvarsr/milp/simplex.hpp"

namespace cvarsr::milp {

// LP relaxation of the model under the given variable domains.
inline LpProblem make_lp(const MilpModel& m, const std::vector<double>& lo,
                         const std::vector<double>& hi) {
    LpProblem p;
    p.num_rows = int(m.rows.size());
    p.row_lb.reserve(m.rows.size());
    p.row_ub.reserve(m.rows.size());
    for (const auto& r : m.rows) {
        p.row_lb.push_back(r.lb);
        p.row_ub.push_back(r.ub);
    }
    p.cols.assign(m.vars.size(), {});
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        for (const auto& t : m.rows[i].terms)
            if (t.coef != 0.0) p.cols[std::size_t(t.var)].emplace_back(int(i), t.coef);
    p.col_lb = lo;
    p.col_ub = hi;
    p.cost.assign(m.vars.size(), 0.0);
    for (const auto& t : m.objective) p.cost[std::size_t(t.var)] += t.coef;
    p.obj_offset = m.objective_offset;
    return p;
}

inline LpProblem make_lp(const MilpModel& m) {
    std::vector<double> lo(m.vars.size()), hi(m.vars.size());
    for (std::size_t j = 0; j < m.vars.size(); ++j) {
        lo[j] = m.vars[j].lb;
        hi[j] = m.vars[j].ub;
    }
    return make_lp(m, lo, hi);
}

inline bool rows_feasible(const MilpModel& m, const std::vector<double>& x, double tol = 1e-6) {
    for (const auto& r : m.rows) {
        double act = eval_expr(r.terms, x);
        const double scale = 1.0 + std::abs(act);
        if (r.lb > -kInf && act < r.lb - tol * scale) return false;
        if (r.ub < kInf && act > r.ub + tol * scale) return false;
    }
    return true;
}

// Exact evaluation of a fully fixed binary assignment. Tightens intervals with
// zero slack until fixpoint; most models of interest collapse to a point, the
// rest fall back to a residual LP over the continuous part.
//
// Returns nullopt when the assignment is infeasible.
inline std::optional<std::pair<double, std::vector<double>>> evaluate_leaf(
    const MilpModel& m, const std::vector<std::pair<int, double>>& binary_values) {
    const std::size_t n = m.vars.size();
    std::vector<double> lo(n), hi(n);
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = m.vars[j].lb;
        hi[j] = m.vars[j].ub;
    }
    for (const auto& [v, val] : binary_values) {
        lo[std::size_t(v)] = val;
        hi[std::size_t(v)] = val;
    }

    const double feas_tol = 1e-7;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool changed = false;
        for (const auto& row : m.rows) {
            double amin = 0.0, amax = 0.0;
            int ninf_min = 0, ninf_max = 0;
            for (const auto& t : row.terms) {
                const double cl = t.coef > 0 ? t.coef * lo[std::size_t(t.var)] : t.coef * hi[std::size_t(t.var)];
                const double ch = t.coef > 0 ? t.coef * hi[std::size_t(t.var)] : t.coef * lo[std::size_t(t.var)];
                if (std::isfinite(cl)) amin += cl; else ++ninf_min;
                if (std::isfinite(ch)) amax += ch; else ++ninf_max;
            }
            const double rscale = 1.0 + std::abs(row.lb == -kInf ? 0.0 : row.lb) +
                                  std::abs(row.ub == kInf ? 0.0 : row.ub);
            if ((ninf_min == 0 && amin > row.ub + feas_tol * rscale) ||
                (ninf_max == 0 && amax < row.lb - feas_tol * rscale))
                return std::nullopt;
            for (const auto& t : row.terms) {
                if (t.coef == 0.0) continue;
                const std::size_t v = std::size_t(t.var);
                const double cl = t.coef > 0 ? t.coef * lo[v] : t.coef * hi[v];
                const double ch = t.coef > 0 ? t.coef * hi[v] : t.coef * lo[v];
                const double rest_min = (ninf_min - (std::isfinite(cl) ? 0 : 1)) > 0
                                            ? -kInf
                                            : amin - (std::isfinite(cl) ? cl : 0.0);
                const double rest_max = (ninf_max - (std::isfinite(ch) ? 0 : 1)) > 0
                                            ? kInf
                                            : amax - (std::isfinite(ch) ? ch : 0.0);
                double nl = -kInf, nh = kInf;
                if (t.coef > 0) {
                    if (row.ub < kInf && rest_min > -kInf) nh = (row.ub - rest_min) / t.coef;
                    if (row.lb > -kInf && rest_max < kInf) nl = (row.lb - rest_max) / t.coef;
                } else {
                    if (row.ub < kInf && rest_min > -kInf) nl = (row.ub - rest_min) / t.coef;
                    if (row.lb > -kInf && rest_max < kInf) nh = (row.lb - rest_max) / t.coef;
                }
                const double step = 1e-11 * (1.0 + std::abs(lo[v]) + std::abs(hi[v]));
                if (nh < hi[v] - step) {
                    hi[v] = nh;
                    changed = true;
                    if (hi[v] < lo[v] - feas_tol * (1 + std::abs(hi[v]))) return std::nullopt;
                }
                if (nl > lo[v] + step) {
                    lo[v] = nl;
                    changed = true;
                    if (lo[v] > hi[v] + feas_tol * (1 + std::abs(lo[v]))) return std::nullopt;
                }
            }
        }
        if (!changed) break;
    }

    // Candidate point: fixed vars at their value, remaining ones at the bound
    // that favors the objective.
    std::vector<double> cost(n, 0.0);
    for (const auto& t : m.objective) cost[std::size_t(t.var)] += t.coef;
    std::vector<double> x(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double width = hi[j] - lo[j];
        if (width <= 1e-7 * (1.0 + std::abs(lo[j]))) {
            x[j] = 0.5 * (lo[j] + hi[j]);
        } else if (cost[j] > 0.0) {
            x[j] = lo[j];
        } else if (cost[j] < 0.0) {
            x[j] = hi[j];
        } else {
            x[j] = std::isfinite(lo[j]) ? lo[j] : (std::isfinite(hi[j]) ? hi[j] : 0.0);
        }
        if (!std::isfinite(x[j])) x[j] = 0.0;
    }
    if (rows_feasible(m, x)) {
        double obj = m.objective_offset;
        for (std::size_t j = 0; j < n; ++j) obj += cost[j] * x[j];
        return std::make_pair(obj, std::move(x));
    }

    // Residual LP over the continuous part.
    LpProblem lp = make_lp(m, lo, hi);
    LpResult res = solve_lp(lp);
    if (res.status == LpStatus::Infeasible) return std::nullopt;
    if (res.status != LpStatus::Optimal) return std::nullopt;
    return std::make_pair(res.objective, std::move(res.x));
}

} // namespace cvarsr::milp
