#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include "cvarsr/milp/model.hpp"

namespace cvarsr::milp {

// Interval propagation over the rows of a MilpModel. Maintains row activity
// bounds incrementally and supports trail-based rollback, which makes it
// usable both as a branch-and-bound presolve and as the workhorse of the
// exhaustive search.
//
// Deductions are conservative: derived bounds carry a small relaxing pad, so
// no integer-feasible point is ever cut off. Binary bounds are rounded with
// exact integer reasoning.
class Propagator {
public:
    explicit Propagator(const MilpModel& model)
        : model_(&model), lo_(model.vars.size()), hi_(model.vars.size()) {
        const std::size_t n = model.vars.size();
        var_rows_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            lo_[j] = model.vars[j].lb;
            hi_[j] = model.vars[j].ub;
        }
        const std::size_t m = model.rows.size();
        act_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (const auto& t : model.rows[i].terms) {
                if (t.coef == 0.0) continue;
                var_rows_[std::size_t(t.var)].push_back(VarRow{int(i), t.coef});
            }
            recompute_activity(int(i));
        }
        in_queue_.assign(m, false);
    }

    double lo(int v) const { return lo_[std::size_t(v)]; }
    double hi(int v) const { return hi_[std::size_t(v)]; }
    bool fixed(int v) const { return hi_[std::size_t(v)] - lo_[std::size_t(v)] <= kFixTol; }
    const std::vector<double>& lower_bounds() const { return lo_; }
    const std::vector<double>& upper_bounds() const { return hi_; }

    // Returns false if the domain becomes empty.
    bool set_lo(int v, double x) {
        double& l = lo_[std::size_t(v)];
        const double h = hi_[std::size_t(v)];
        if (x > h + kFeasTol) return false;
        x = std::min(x, h);
        if (x <= l) return true;
        trail_.push_back(TrailEntry{v, true, l});
        update_activities(v, l, x, true);
        l = x;
        enqueue_rows(v);
        return true;
    }
    bool set_hi(int v, double x) {
        double& h = hi_[std::size_t(v)];
        const double l = lo_[std::size_t(v)];
        if (x < l - kFeasTol) return false;
        x = std::max(x, l);
        if (x >= h) return true;
        trail_.push_back(TrailEntry{v, false, h});
        update_activities(v, h, x, false);
        h = x;
        enqueue_rows(v);
        return true;
    }
    bool fix(int v, double x) { return set_lo(v, x) && set_hi(v, x); }

    std::size_t trail_mark() const { return trail_.size(); }
    void rollback(std::size_t mark) {
        while (trail_.size() > mark) {
            const TrailEntry e = trail_.back();
            trail_.pop_back();
            if (e.is_lo) {
                update_activities(e.var, lo_[std::size_t(e.var)], e.old_value, true);
                lo_[std::size_t(e.var)] = e.old_value;
            } else {
                update_activities(e.var, hi_[std::size_t(e.var)], e.old_value, false);
                hi_[std::size_t(e.var)] = e.old_value;
            }
        }
        queue_.clear();
        std::fill(in_queue_.begin(), in_queue_.end(), false);
    }

    // Propagate queued rows to a fixpoint. Returns false on infeasibility.
    bool propagate() {
        int rounds = 0;
        while (!queue_.empty()) {
            int r = queue_.front();
            queue_.pop_front();
            in_queue_[std::size_t(r)] = false;
            if (!examine_row(r)) return false;
            if (++rounds > kMaxRounds) { // fixpoint cap; staying here is still sound
                queue_.clear();
                std::fill(in_queue_.begin(), in_queue_.end(), false);
                break;
            }
        }
        return true;
    }

    bool propagate_all() {
        for (std::size_t i = 0; i < model_->rows.size(); ++i) enqueue_row(int(i));
        return propagate();
    }

    // Bounds of a linear expression under current domains.
    std::pair<double, double> expr_bounds(const LinExpr& terms) const {
        double mn = 0.0, mx = 0.0;
        for (const auto& t : terms) {
            const double a = t.coef;
            const double l = lo_[std::size_t(t.var)], h = hi_[std::size_t(t.var)];
            if (a >= 0) {
                mn += a * l;
                mx += a * h;
            } else {
                mn += a * h;
                mx += a * l;
            }
        }
        return {mn, mx};
    }

    static constexpr double kFeasTol = 1e-7;
    static constexpr double kFixTol = 1e-9;

private:
    struct TrailEntry {
        int var;
        bool is_lo;
        double old_value;
    };
    struct VarRow {
        int row;
        double coef;
    };
    struct Activity {
        double min_finite = 0.0, max_finite = 0.0;
        int min_inf = 0, max_inf = 0;
    };

    void recompute_activity(int r) {
        Activity a;
        for (const auto& t : model_->rows[std::size_t(r)].terms) {
            if (t.coef == 0.0) continue;
            const double l = lo_[std::size_t(t.var)], h = hi_[std::size_t(t.var)];
            const double cl = t.coef > 0 ? t.coef * l : t.coef * h;
            const double ch = t.coef > 0 ? t.coef * h : t.coef * l;
            if (std::isfinite(cl)) a.min_finite += cl; else ++a.min_inf;
            if (std::isfinite(ch)) a.max_finite += ch; else ++a.max_inf;
        }
        act_[std::size_t(r)] = a;
    }

    void update_activities(int v, double bound_old, double bound_new, bool is_lo) {
        for (const VarRow& vr : var_rows_[std::size_t(v)]) {
            Activity& a = act_[std::size_t(vr.row)];
            const double c_old = vr.coef * bound_old, c_new = vr.coef * bound_new;
            const bool hits_min = (vr.coef > 0) == is_lo;
            if (hits_min) {
                if (std::isfinite(c_old)) a.min_finite -= c_old; else --a.min_inf;
                if (std::isfinite(c_new)) a.min_finite += c_new; else ++a.min_inf;
            } else {
                if (std::isfinite(c_old)) a.max_finite -= c_old; else --a.max_inf;
                if (std::isfinite(c_new)) a.max_finite += c_new; else ++a.max_inf;
            }
        }
    }

    void enqueue_row(int r) {
        if (!in_queue_[std::size_t(r)]) {
            in_queue_[std::size_t(r)] = true;
            queue_.push_back(r);
        }
    }
    void enqueue_rows(int v) {
        for (const VarRow& vr : var_rows_[std::size_t(v)]) enqueue_row(vr.row);
    }

    bool examine_row(int r) {
        const Row& row = model_->rows[std::size_t(r)];
        const Activity& a = act_[std::size_t(r)];
        const double amin = a.min_inf > 0 ? -kInf : a.min_finite;
        const double amax = a.max_inf > 0 ? kInf : a.max_finite;
        const double pad = kFeasTol * (1.0 + std::abs(row.lb == -kInf ? 0.0 : row.lb) +
                                       std::abs(row.ub == kInf ? 0.0 : row.ub));
        if (amin > row.ub + pad || amax < row.lb - pad) return false;

        for (const auto& t : row.terms) {
            if (t.coef == 0.0) continue;
            const int v = t.var;
            const double l = lo_[std::size_t(v)], h = hi_[std::size_t(v)];
            double rest_min, rest_max;
            {
                const double cl = t.coef > 0 ? t.coef * l : t.coef * h;
                const double ch = t.coef > 0 ? t.coef * h : t.coef * l;
                int min_inf = a.min_inf - (std::isfinite(cl) ? 0 : 1);
                int max_inf = a.max_inf - (std::isfinite(ch) ? 0 : 1);
                rest_min = min_inf > 0 ? -kInf : a.min_finite - (std::isfinite(cl) ? cl : 0.0);
                rest_max = max_inf > 0 ? kInf : a.max_finite - (std::isfinite(ch) ? ch : 0.0);
            }
            double new_lo = -kInf, new_hi = kInf;
            if (t.coef > 0) {
                if (row.ub < kInf && rest_min > -kInf) new_hi = (row.ub - rest_min + pad) / t.coef;
                if (row.lb > -kInf && rest_max < kInf) new_lo = (row.lb - rest_max - pad) / t.coef;
            } else {
                if (row.ub < kInf && rest_min > -kInf) new_lo = (row.ub - rest_min + pad) / t.coef;
                if (row.lb > -kInf && rest_max < kInf) new_hi = (row.lb - rest_max - pad) / t.coef;
            }
            if (model_->vars[std::size_t(v)].kind == VarKind::Binary) {
                if (new_hi < 1.0) new_hi = new_hi < 0.5 ? 0.0 : 1.0;
                if (new_lo > 0.0) new_lo = new_lo > 0.5 ? 1.0 : 0.0;
            }
            if (new_hi < h - kImproveTol && !set_hi(v, new_hi)) return false;
            if (new_lo > l + kImproveTol && !set_lo(v, new_lo)) return false;
        }
        return true;
    }

    static constexpr double kImproveTol = 1e-9;
    static constexpr int kMaxRounds = 200000;

    const MilpModel* model_;
    std::vector<double> lo_, hi_;
    std::vector<std::vector<VarRow>> var_rows_;
    std::vector<Activity> act_;
    std::deque<int> queue_;
    std::vector<bool> in_queue_;
    std::vector<TrailEntry> trail_;
};

} // namespace cvarsr::milp
