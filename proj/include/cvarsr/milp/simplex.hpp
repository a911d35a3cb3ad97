#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "cvarsr/common.hpp"
#include "cvarsr/milp/model.hpp"

namespace cvarsr::milp {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

struct LpOptions {
    double feas_tol = 1e-8;
    double dual_tol = 1e-7;
    double pivot_tol = 1e-9;
    long iter_limit = 500000;
    int refactor_interval = 100;
};

struct LpResult {
    LpStatus status = LpStatus::IterLimit;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x;             // structural values
    std::vector<double> reduced_costs; // structural reduced costs
    std::vector<double> duals;         // row duals
    long iterations = 0;
};

// LP in computational form: min c'x, row_lb <= Ax <= row_ub, col_lb <= x <= col_ub,
// with A stored column-wise.
struct LpProblem {
    int num_rows = 0;
    std::vector<std::vector<std::pair<int, double>>> cols;
    std::vector<double> col_lb, col_ub, cost;
    std::vector<double> row_lb, row_ub;
    double obj_offset = 0.0;

    int num_cols() const { return int(cols.size()); }
};

// Bounded-variable primal simplex, two phases, with a product-form update on
// top of an Eigen SparseLU basis factorization.
class SimplexSolver {
public:
    SimplexSolver(const LpProblem& p, LpOptions opt = {}) : p_(&p), opt_(opt) {
        n_ = p.num_cols();
        m_ = p.num_rows;
        nt_ = n_ + m_;
    }

    LpResult solve() {
        if (m_ == 0) return solve_boxed(); // pure bound minimization
        init();

        // Phase 1: drive basic infeasibilities to zero.
        LpStatus st = run(true);
        if (st == LpStatus::IterLimit) return finish(LpStatus::IterLimit);
        if (max_violation() > feas_exit()) return finish(LpStatus::Infeasible);

        // Phase 2.
        st = run(false);
        if (st == LpStatus::Unbounded) return finish(LpStatus::Unbounded);
        if (st == LpStatus::IterLimit) return finish(LpStatus::IterLimit);

        // Verification round: refactorize, recompute, re-price.
        for (int round = 0; round < 3; ++round) {
            refactorize();
            if (max_violation() > feas_exit()) {
                LpStatus s1 = run(true);
                if (s1 == LpStatus::IterLimit) return finish(LpStatus::IterLimit);
                if (max_violation() > feas_exit()) return finish(LpStatus::Infeasible);
                st = run(false);
                if (st != LpStatus::Optimal) return finish(st);
                continue;
            }
            if (!has_attractive_candidate()) break;
            st = run(false);
            if (st != LpStatus::Optimal) return finish(st);
        }
        return finish(LpStatus::Optimal);
    }

private:
    enum class VState : std::uint8_t { AtLower, AtUpper, Basic, FreeNB };

    struct Eta {
        int r;
        double wr;
        std::vector<std::pair<int, double>> entries; // excludes r
    };

    // ---- setup ----------------------------------------------------------

    double collb(int j) const { return j < n_ ? p_->col_lb[std::size_t(j)] : p_->row_lb[std::size_t(j - n_)]; }
    double colub(int j) const { return j < n_ ? p_->col_ub[std::size_t(j)] : p_->row_ub[std::size_t(j - n_)]; }
    double colcost(int j) const { return j < n_ ? p_->cost[std::size_t(j)] : 0.0; }

    template <typename F>
    void for_col(int j, F&& f) const {
        if (j < n_) {
            for (const auto& [r, a] : p_->cols[std::size_t(j)]) f(r, a);
        } else {
            f(j - n_, -1.0);
        }
    }

    void init() {
        x_.assign(std::size_t(nt_), 0.0);
        state_.assign(std::size_t(nt_), VState::AtLower);
        basis_.assign(std::size_t(m_), -1);
        pos_in_basis_.assign(std::size_t(nt_), -1);
        for (int j = 0; j < nt_; ++j) set_nonbasic_start(j);
        crash_basis();
        bound_scale_ = 1.0;
        for (int j = 0; j < nt_; ++j) {
            if (std::isfinite(collb(j))) bound_scale_ = std::max(bound_scale_, std::abs(collb(j)));
            if (std::isfinite(colub(j))) bound_scale_ = std::max(bound_scale_, std::abs(colub(j)));
        }
        work_.assign(std::size_t(m_), 0.0);
        etas_.clear();
        refactorize();
    }

    // Triangular crash: repeatedly place a structural column that has exactly
    // one nonzero among the still-uncovered rows, preferring free and
    // wide-bounded columns. The selected set is permuted-triangular, so the
    // first factorization cannot be singular. Remaining rows keep slacks.
    void crash_basis() {
        auto row_cols = std::vector<std::vector<int>>(std::size_t(m_));
        for (int j = 0; j < n_; ++j)
            for (const auto& [r, a] : p_->cols[std::size_t(j)])
                if (std::abs(a) > 1e-7) row_cols[std::size_t(r)].push_back(j);

        auto col_priority = [&](int j) {
            const double l = p_->col_lb[std::size_t(j)], u = p_->col_ub[std::size_t(j)];
            if (!std::isfinite(l) && !std::isfinite(u)) return 0; // free first
            if (!std::isfinite(l) || !std::isfinite(u)) return 1;
            if (u - l > 0.0) return 2;
            return 3; // fixed: never useful as basic
        };

        std::vector<int> cover_count(std::size_t(n_), 0);
        std::vector<bool> row_covered(std::size_t(m_), false);
        std::vector<bool> col_used(std::size_t(n_), false);
        for (int j = 0; j < n_; ++j) {
            for (const auto& [r, a] : p_->cols[std::size_t(j)])
                if (std::abs(a) > 1e-7) ++cover_count[std::size_t(j)];
            (void)0;
        }
        std::vector<std::vector<int>> ready(3);
        for (int j = 0; j < n_; ++j)
            if (cover_count[std::size_t(j)] == 1 && col_priority(j) <= 2)
                ready[std::size_t(col_priority(j))].push_back(j);

        auto place = [&](int j) {
            int row = -1;
            for (const auto& [r, a] : p_->cols[std::size_t(j)])
                if (std::abs(a) > 1e-7 && !row_covered[std::size_t(r)]) row = r;
            if (row < 0) return;
            basis_[std::size_t(row)] = j;
            col_used[std::size_t(j)] = true;
            row_covered[std::size_t(row)] = true;
            for (int jj : row_cols[std::size_t(row)]) {
                if (col_used[std::size_t(jj)]) continue;
                if (--cover_count[std::size_t(jj)] == 1 && col_priority(jj) <= 2)
                    ready[std::size_t(col_priority(jj))].push_back(jj);
            }
        };

        bool progress = true;
        while (progress) {
            progress = false;
            for (auto& q : ready) {
                while (!q.empty()) {
                    const int j = q.back();
                    q.pop_back();
                    if (col_used[std::size_t(j)] || cover_count[std::size_t(j)] != 1) continue;
                    place(j);
                    progress = true;
                    break;
                }
                if (progress) break;
            }
        }
        for (int i = 0; i < m_; ++i)
            if (basis_[std::size_t(i)] < 0) basis_[std::size_t(i)] = n_ + i;
        for (int i = 0; i < m_; ++i) {
            const int j = basis_[std::size_t(i)];
            pos_in_basis_[std::size_t(j)] = i;
            state_[std::size_t(j)] = VState::Basic;
        }
    }

    void set_nonbasic_start(int j) {
        const double l = collb(j), u = colub(j);
        if (std::isfinite(l) && (!std::isfinite(u) || std::abs(l) <= std::abs(u))) {
            state_[std::size_t(j)] = VState::AtLower;
            x_[std::size_t(j)] = l;
        } else if (std::isfinite(u)) {
            state_[std::size_t(j)] = VState::AtUpper;
            x_[std::size_t(j)] = u;
        } else {
            state_[std::size_t(j)] = VState::FreeNB;
            x_[std::size_t(j)] = 0.0;
        }
    }

    // ---- basis factorization --------------------------------------------

    void refactorize() {
        etas_.clear();
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < m_; ++i) {
            const int j = basis_[std::size_t(i)];
            for_col(j, [&](int r, double a) { trips.emplace_back(r, i, a); });
        }
        Eigen::SparseMatrix<double> B(m_, m_);
        B.setFromTriplets(trips.begin(), trips.end());
        B.makeCompressed();
        lu_.analyzePattern(B);
        lu_.factorize(B);
        if (lu_.info() != Eigen::Success) {
            if (++singular_resets_ > 3) throw Error("simplex: repeated singular basis");
            reset_to_slack_basis();
            return;
        }
        recompute_basics();
    }

    void reset_to_slack_basis() {
        for (int j = 0; j < nt_; ++j)
            if (state_[std::size_t(j)] == VState::Basic) set_nonbasic_start(j);
        basis_.clear();
        pos_in_basis_.assign(std::size_t(nt_), -1);
        for (int i = 0; i < m_; ++i) {
            const int s = n_ + i;
            basis_.push_back(s);
            pos_in_basis_[std::size_t(s)] = i;
            state_[std::size_t(s)] = VState::Basic;
        }
        refactorize();
    }

    void recompute_basics() {
        // B x_B = -sum over nonbasic columns of a_j x_j
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
        for (int j = 0; j < nt_; ++j) {
            if (state_[std::size_t(j)] == VState::Basic) continue;
            const double v = x_[std::size_t(j)];
            if (v == 0.0) continue;
            for_col(j, [&](int r, double a) { rhs[r] -= a * v; });
        }
        Eigen::VectorXd xb = lu_.solve(rhs);
        for (int i = 0; i < m_; ++i) x_[std::size_t(basis_[std::size_t(i)])] = xb[i];
    }

    void ftran(std::vector<double>& v) {
        Eigen::Map<Eigen::VectorXd> mv(v.data(), m_);
        Eigen::VectorXd z = lu_.solve(mv);
        std::copy(z.data(), z.data() + m_, v.begin());
        for (const Eta& e : etas_) {
            const double zr = v[std::size_t(e.r)] / e.wr;
            if (zr != 0.0)
                for (const auto& [i, wi] : e.entries) v[std::size_t(i)] -= wi * zr;
            v[std::size_t(e.r)] = zr;
        }
    }

    void btran(std::vector<double>& v) {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double dot = it->wr * v[std::size_t(it->r)];
            for (const auto& [i, wi] : it->entries) dot += wi * v[std::size_t(i)];
            v[std::size_t(it->r)] += (v[std::size_t(it->r)] - dot) / it->wr;
        }
        Eigen::Map<Eigen::VectorXd> mv(v.data(), m_);
        Eigen::VectorXd y = lu_.transpose().solve(mv);
        std::copy(y.data(), y.data() + m_, v.begin());
    }

    // ---- feasibility bookkeeping ----------------------------------------

    double tol_for(int j) const {
        return opt_.feas_tol * (1.0 + std::abs(x_[std::size_t(j)]));
    }
    double violation(int j) const {
        const double x = x_[std::size_t(j)];
        const double below = collb(j) - x, above = x - colub(j);
        return std::max({below, above, 0.0});
    }
    // Largest relative bound violation over the basic variables.
    double max_violation() const {
        double worst = 0.0;
        for (int i = 0; i < m_; ++i) {
            const int b = basis_[std::size_t(i)];
            worst = std::max(worst, violation(b) / (1.0 + std::abs(x_[std::size_t(b)])));
        }
        return worst;
    }
    double feas_exit() const { return 4.0 * opt_.feas_tol; }

    // ---- main iteration loop ---------------------------------------------

    LpStatus run(bool phase1) {
        long degenerate_streak = 0;
        int no_event_streak = 0;
        bool bland = false;
        skip_epoch_.assign(std::size_t(nt_), -1);
        pivot_epoch_ = 0;
        while (true) {
            if (++iterations_ > opt_.iter_limit) return LpStatus::IterLimit;
            if (int(etas_.size()) >= opt_.refactor_interval) refactorize();

            if (phase1 && max_violation() <= feas_exit()) return LpStatus::Optimal;

            // costs of basic variables
            std::vector<double> y(std::size_t(m_), 0.0);
            bool any_infeasible = false;
            for (int i = 0; i < m_; ++i) {
                const int b = basis_[std::size_t(i)];
                if (phase1) {
                    const double xv = x_[std::size_t(b)];
                    if (xv < collb(b) - tol_for(b)) {
                        y[std::size_t(i)] = -1.0;
                        any_infeasible = true;
                    } else if (xv > colub(b) + tol_for(b)) {
                        y[std::size_t(i)] = 1.0;
                        any_infeasible = true;
                    }
                } else {
                    y[std::size_t(i)] = colcost(b);
                }
            }
            if (phase1 && !any_infeasible) return LpStatus::Optimal;
            btran(y);

            // pricing: Dantzig over a rotating partial window; a full scan with
            // no candidate proves optimality. Bland mode scans from column 0.
            int q = -1;
            double best = 0.0;
            int dir = +1;
            const int window = std::max(512, nt_ / 16);
            int scanned = 0;
            int j = bland ? 0 : price_start_;
            while (scanned < nt_) {
                const VState st = state_[std::size_t(j)];
                if (st != VState::Basic && skip_epoch_[std::size_t(j)] != pivot_epoch_ &&
                    colub(j) - collb(j) > 0.0) {
                    double d = phase1 ? 0.0 : colcost(j);
                    double dot = 0.0;
                    for_col(j, [&](int r, double a) { dot += a * y[std::size_t(r)]; });
                    d -= dot;
                    double score = 0.0;
                    int jdir = 0;
                    if (st == VState::AtLower && d < -opt_.dual_tol) {
                        score = -d;
                        jdir = +1;
                    } else if (st == VState::AtUpper && d > opt_.dual_tol) {
                        score = d;
                        jdir = -1;
                    } else if (st == VState::FreeNB && std::abs(d) > opt_.dual_tol) {
                        score = std::abs(d);
                        jdir = d < 0 ? +1 : -1;
                    }
                    if (jdir != 0) {
                        if (bland) {
                            q = j;
                            dir = jdir;
                            break;
                        }
                        if (score > best) {
                            best = score;
                            q = j;
                            dir = jdir;
                        }
                    }
                }
                ++scanned;
                ++j;
                if (j >= nt_) j = 0;
                if (!bland && q >= 0 && scanned >= window) break;
            }
            if (!bland) price_start_ = j;
            if (q < 0) {
                if (phase1) return LpStatus::Optimal; // priced out; violation checked by caller
                return LpStatus::Optimal;
            }

            // direction through the basis
            std::vector<double> w(std::size_t(m_), 0.0);
            for_col(q, [&](int r, double a) { w[std::size_t(r)] = a; });
            ftran(w);

            // ratio test
            double t_best = kInf;
            int leave = -1; // -2 = bound flip
            double leave_pivot = 0.0;
            bool leave_to_upper = false;
            if (state_[std::size_t(q)] != VState::FreeNB && std::isfinite(collb(q)) &&
                std::isfinite(colub(q))) {
                t_best = colub(q) - collb(q);
                leave = -2;
            }
            for (int i = 0; i < m_; ++i) {
                const double wi = w[std::size_t(i)];
                if (std::abs(wi) < opt_.pivot_tol) continue;
                const int b = basis_[std::size_t(i)];
                const double slope = -double(dir) * wi;
                const double xv = x_[std::size_t(b)];
                const double l = collb(b), u = colub(b);
                const double tb = tol_for(b);
                double t = kInf;
                bool to_upper = false;
                if (phase1 && xv < l - tb) {
                    if (slope > 0) { t = (l - xv) / slope; to_upper = false; }
                } else if (phase1 && xv > u + tb) {
                    if (slope < 0) { t = (u - xv) / slope; to_upper = true; }
                } else {
                    const double expand = bland ? 0.0 : tb; // strict ratios under Bland's rule
                    if (slope > 0 && std::isfinite(u)) { t = (u - xv + expand) / slope; to_upper = true; }
                    else if (slope < 0 && std::isfinite(l)) { t = (l - xv - expand) / slope; to_upper = false; }
                }
                if (t == kInf) continue;
                t = std::max(t, 0.0);
                const bool better =
                    bland ? (t < t_best - 1e-12 || (t <= t_best + 1e-12 && (leave < 0 || b < basis_[std::size_t(leave)])))
                          : (t < t_best - 1e-12 ||
                             (t <= t_best + 1e-12 && std::abs(wi) > std::abs(leave_pivot)));
                if (better) {
                    t_best = t;
                    leave = i;
                    leave_pivot = wi;
                    leave_to_upper = to_upper;
                }
            }

            if (leave == -1) {
                // No blocking event. On a bounded LP this is numerical noise in
                // the reduced cost; retry against a fresh factorization, then
                // blacklist the candidate until the next successful pivot.
                if (!etas_.empty()) {
                    refactorize();
                    continue;
                }
                if (++no_event_streak > 2 * nt_ + 100)
                    return phase1 ? LpStatus::IterLimit : LpStatus::Unbounded;
                if (phase1 || best < 1e3 * opt_.dual_tol) {
                    skip_epoch_[std::size_t(q)] = pivot_epoch_;
                    continue;
                }
                return LpStatus::Unbounded;
            }
            no_event_streak = 0;

            if (t_best <= 1e-12) {
                if (++degenerate_streak > 400 + m_ && !bland) bland = true;
            } else {
                degenerate_streak = 0;
                bland = false;
            }

            // apply the step
            if (leave >= 0 && std::abs(leave_pivot) < opt_.pivot_tol * 10 && !etas_.empty()) {
                refactorize(); // recompute the direction against a fresh factorization
                continue;
            }

            x_[std::size_t(q)] += dir * t_best;
            if (t_best != 0.0)
                for (int i = 0; i < m_; ++i)
                    if (w[std::size_t(i)] != 0.0)
                        x_[std::size_t(basis_[std::size_t(i)])] -= dir * t_best * w[std::size_t(i)];

            ++pivot_epoch_;
            if (leave == -2) {
                state_[std::size_t(q)] =
                    state_[std::size_t(q)] == VState::AtLower ? VState::AtUpper : VState::AtLower;
                x_[std::size_t(q)] = state_[std::size_t(q)] == VState::AtLower ? collb(q) : colub(q);
                continue;
            }

            const int lv = basis_[std::size_t(leave)];
            state_[std::size_t(lv)] = leave_to_upper ? VState::AtUpper : VState::AtLower;
            x_[std::size_t(lv)] = leave_to_upper ? colub(lv) : collb(lv); // snap
            pos_in_basis_[std::size_t(lv)] = -1;
            basis_[std::size_t(leave)] = q;
            pos_in_basis_[std::size_t(q)] = leave;
            state_[std::size_t(q)] = VState::Basic;

            Eta e;
            e.r = leave;
            e.wr = w[std::size_t(leave)];
            for (int i = 0; i < m_; ++i)
                if (i != leave && std::abs(w[std::size_t(i)]) > 1e-13)
                    e.entries.emplace_back(i, w[std::size_t(i)]);
            etas_.push_back(std::move(e));
        }
    }

    bool has_attractive_candidate() {
        std::vector<double> y(std::size_t(m_), 0.0);
        for (int i = 0; i < m_; ++i) y[std::size_t(i)] = colcost(basis_[std::size_t(i)]);
        btran(y);
        for (int j = 0; j < nt_; ++j) {
            const VState st = state_[std::size_t(j)];
            if (st == VState::Basic || colub(j) - collb(j) <= 0.0) continue;
            double d = colcost(j);
            for_col(j, [&](int r, double a) { d -= a * y[std::size_t(r)]; });
            if ((st == VState::AtLower && d < -10 * opt_.dual_tol) ||
                (st == VState::AtUpper && d > 10 * opt_.dual_tol) ||
                (st == VState::FreeNB && std::abs(d) > 10 * opt_.dual_tol))
                return true;
        }
        return false;
    }

    LpResult solve_boxed() {
        LpResult res;
        res.status = LpStatus::Optimal;
        res.x.resize(std::size_t(n_));
        res.reduced_costs = p_->cost;
        for (int j = 0; j < n_; ++j) {
            const double c = p_->cost[std::size_t(j)];
            const double l = p_->col_lb[std::size_t(j)], u = p_->col_ub[std::size_t(j)];
            double v;
            if (c > 0) v = l;
            else if (c < 0) v = u;
            else v = std::isfinite(l) ? l : (std::isfinite(u) ? u : 0.0);
            if (!std::isfinite(v)) {
                res.status = LpStatus::Unbounded;
                v = 0.0;
            }
            res.x[std::size_t(j)] = v;
        }
        res.objective = p_->obj_offset;
        for (int j = 0; j < n_; ++j) res.objective += p_->cost[std::size_t(j)] * res.x[std::size_t(j)];
        return res;
    }

    LpResult finish(LpStatus st) {
        LpResult res;
        res.status = st;
        res.iterations = iterations_;
        res.x.assign(p_->cols.size(), 0.0);
        for (int j = 0; j < n_; ++j) res.x[std::size_t(j)] = x_[std::size_t(j)];
        if (st == LpStatus::Optimal) {
            res.objective = p_->obj_offset;
            for (int j = 0; j < n_; ++j) res.objective += p_->cost[std::size_t(j)] * res.x[std::size_t(j)];
            std::vector<double> y(std::size_t(m_), 0.0);
            for (int i = 0; i < m_; ++i) y[std::size_t(i)] = colcost(basis_[std::size_t(i)]);
            btran(y);
            res.duals = y;
            res.reduced_costs.assign(std::size_t(n_), 0.0);
            for (int j = 0; j < n_; ++j) {
                if (state_[std::size_t(j)] == VState::Basic) continue;
                double d = p_->cost[std::size_t(j)];
                for (const auto& [r, a] : p_->cols[std::size_t(j)]) d -= a * y[std::size_t(r)];
                res.reduced_costs[std::size_t(j)] = d;
            }
        }
        return res;
    }

    const LpProblem* p_;
    LpOptions opt_;
    int n_ = 0, m_ = 0, nt_ = 0;
    std::vector<double> x_;
    std::vector<VState> state_;
    std::vector<int> basis_;
    std::vector<int> pos_in_basis_;
    std::vector<double> work_;
    double bound_scale_ = 1.0;
    long iterations_ = 0;
    int price_start_ = 0;
    std::vector<long> skip_epoch_;
    long pivot_epoch_ = 0;
    int singular_resets_ = 0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    std::vector<Eta> etas_;
};

inline LpResult solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
    return SimplexSolver(p, opt).solve();
}

} // namespace cvarsr::milp
