#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "cvarsr/common.hpp"
#include "cvarsr/milp/model.hpp"
#include "cvarsr/milp/propagation.hpp"
#include "cvarsr/milp/relaxation.hpp"

namespace cvarsr::milp {

struct BbOptions {
    double time_limit_s = kInf;
    double rel_gap = 1e-9;
    double abs_gap = 1e-9;
    long node_limit = 5000000;
    double int_tol = 1e-6;
    LpOptions lp;
};

// LP-based branch and bound over the binary variables. Best-bound node order,
// most-fractional branching, propagation presolve per node, and two primal
// heuristics: a warm-start dive from the model hint and LP rounding.
class BranchAndBound {
public:
    BranchAndBound(const MilpModel& model, BbOptions opt) : model_(&model), opt_(opt) {}

    MilpSolution run() {
        model_->validate();
        for (std::size_t j = 0; j < model_->vars.size(); ++j)
            if (model_->vars[j].kind == VarKind::Binary) binaries_.push_back(int(j));
        binary_rows_.assign(model_->vars.size(), {});
        for (std::size_t i = 0; i < model_->rows.size(); ++i)
            for (const auto& t : model_->rows[i].terms)
                if (model_->vars[std::size_t(t.var)].kind == VarKind::Binary)
                    binary_rows_[std::size_t(t.var)].push_back(int(i));

        Propagator prop(*model_);
        if (!prop.propagate_all()) return infeasible();
        root_mark_ = prop.trail_mark();

        if (binaries_.empty()) return solve_pure_lp(prop);

        if (!model_->hint.empty()) try_hint(prop);

        // root node
        {
            NodeLp root = node_lp(prop);
            if (root.kind == NodeLpKind::Infeasible) return infeasible();
            require(root.kind == NodeLpKind::Ok, "branch and bound: root LP stalled");
            obj_lb_ = root.res.objective;
            process_lp(prop, root.res, {}, true);
        }

        long nodes = 0;
        while (!queue_.empty()) {
            if (watch_.seconds() > opt_.time_limit_s || ++nodes > opt_.node_limit)
                return found_limit();
            Node node = queue_.top();
            queue_.pop();
            obj_lb_ = node.bound;
            if (incumbent_ && node.bound >= incumbent_->first - gap_margin()) break;

            const std::size_t mark = prop.trail_mark();
            bool ok = true;
            for (const auto& [v, val] : node.fixings)
                if (!prop.fix(v, double(val)) || !prop.propagate()) {
                    ok = false;
                    break;
                }
            if (ok) {
                NodeLp res = node_lp(prop);
                if (res.kind == NodeLpKind::Ok) {
                    process_lp(prop, res.res, node.fixings, (nodes % 16) == 0);
                } else if (res.kind == NodeLpKind::Stuck) {
                    handle_stuck_node(prop, node);
                }
            }
            prop.rollback(mark);
        }
        if (queue_.empty()) obj_lb_ = incumbent_ ? incumbent_->first : obj_lb_;
        if (!incumbent_) return infeasible();
        polish(prop);
        return found(SolveStatus::Optimal, obj_lb_);
    }

private:
    struct Node {
        double bound;
        long id;
        std::vector<std::pair<int, std::uint8_t>> fixings;
        bool operator<(const Node& o) const { // inverted for min-heap
            if (bound != o.bound) return bound > o.bound;
            return id > o.id;
        }
    };

    double gap_margin() const {
        const double scale = incumbent_ ? std::abs(incumbent_->first) : 1.0;
        return std::max(opt_.abs_gap, opt_.rel_gap * std::max(1.0, scale));
    }

    MilpSolution infeasible() const {
        MilpSolution s;
        s.status = SolveStatus::Infeasible;
        return s;
    }

    MilpSolution found(SolveStatus st, double lb) const {
        MilpSolution s;
        s.status = st;
        s.values = incumbent_->second;
        s.objective = incumbent_->first;
        s.gap = std::max(0.0, incumbent_->first - lb) / std::max(1.0, std::abs(incumbent_->first));
        return s;
    }

    MilpSolution found_limit() const {
        if (!incumbent_) {
            MilpSolution s;
            s.status = SolveStatus::TimeLimit;
            return s;
        }
        double lb = obj_lb_;
        if (!queue_.empty()) lb = std::min(lb, queue_.top().bound);
        return found(SolveStatus::Feasible, lb);
    }

    MilpSolution solve_pure_lp(Propagator& prop) {
        auto res = node_lp(prop);
        if (!res) return infeasible();
        MilpSolution s;
        s.status = SolveStatus::Optimal;
        s.values = res->x;
        s.objective = res->objective;
        s.gap = 0.0;
        return s;
    }

    enum class NodeLpKind { Ok, Infeasible, Stuck };
    struct NodeLp {
        NodeLpKind kind = NodeLpKind::Stuck;
        LpResult res;
    };

    NodeLp node_lp(const Propagator& prop) {
        LpProblem lp = make_lp(*model_, prop.lower_bounds(), prop.upper_bounds());
        NodeLp out;
        out.res = solve_lp(lp, opt_.lp);
        if (out.res.status == LpStatus::Infeasible) out.kind = NodeLpKind::Infeasible;
        else if (out.res.status == LpStatus::Optimal) out.kind = NodeLpKind::Ok;
        else if (out.res.status == LpStatus::Unbounded)
            throw Error("branch and bound: model is unbounded");
        else out.kind = NodeLpKind::Stuck; // numerically stalled; resolved by branching
        return out;
    }

    // Examine a solved node: integral -> incumbent; else branch (+ optionally
    // run the rounding heuristic).
    void process_lp(Propagator& prop, const LpResult& res,
                    const std::vector<std::pair<int, std::uint8_t>>& fixings, bool heuristics) {
        if (incumbent_ && res.objective >= incumbent_->first - gap_margin()) return;

        int branch_var = -1;
        double best_dist = opt_.int_tol;
        for (int b : binaries_) {
            const double x = res.x[std::size_t(b)];
            const double dist = std::abs(x - std::round(x));
            if (dist > best_dist) {
                best_dist = dist;
                branch_var = b;
            }
        }
        if (branch_var < 0) {
            update_incumbent(res.objective, res.x);
            return;
        }
        if (heuristics) round_dive(prop, res);
        for (std::uint8_t val : {std::uint8_t(1), std::uint8_t(0)}) {
            Node child;
            child.bound = res.objective;
            child.id = next_id_++;
            child.fixings = fixings;
            child.fixings.emplace_back(branch_var, val);
            queue_.push(std::move(child));
        }
    }

    void update_incumbent(double obj, const std::vector<double>& x) {
        if (!incumbent_ || obj < incumbent_->first - 1e-12) incumbent_ = {obj, x};
    }

    // A node whose LP stalled numerically: branch blind on the first unfixed
    // binary (keeping the parent bound), or evaluate the leaf exactly when
    // everything is already pinned.
    void handle_stuck_node(const Propagator& prop, const Node& node) {
        int branch_var = -1;
        for (int b : binaries_)
            if (prop.hi(b) - prop.lo(b) > 0.5) {
                branch_var = b;
                break;
            }
        if (branch_var < 0) {
            std::vector<std::pair<int, double>> fixing;
            for (int b : binaries_) fixing.emplace_back(b, prop.lo(b) > 0.5 ? 1.0 : 0.0);
            auto leaf = evaluate_leaf(*model_, fixing);
            if (leaf) update_incumbent(leaf->first, leaf->second);
            return;
        }
        for (std::uint8_t val : {std::uint8_t(1), std::uint8_t(0)}) {
            Node child;
            child.bound = node.bound;
            child.id = next_id_++;
            child.fixings = node.fixings;
            child.fixings.emplace_back(branch_var, val);
            queue_.push(std::move(child));
        }
    }

    // Violation of the rows touching variable b when it is set to `val` while
    // everything else stays at the LP point. Fractional indicator binaries
    // must round toward the side that keeps their indicated activity feasible.
    double rounding_violation(int b, double val, const std::vector<double>& x) const {
        double total = 0.0;
        for (int ri : binary_rows_[std::size_t(b)]) {
            const Row& row = model_->rows[std::size_t(ri)];
            double act = 0.0;
            for (const auto& t : row.terms)
                act += t.coef * (t.var == b ? val : x[std::size_t(t.var)]);
            if (row.lb > -kInf) total += std::max(0.0, row.lb - act);
            if (row.ub < kInf) total += std::max(0.0, act - row.ub);
        }
        return total;
    }

    // One-shot rounding dive: pick each binary's value by row violation at the
    // LP point, propagate, then solve the residual LP.
    void round_dive(Propagator& prop, const LpResult& res) {
        const std::size_t mark = prop.trail_mark();
        bool ok = true;
        for (int b : binaries_) {
            if (prop.hi(b) - prop.lo(b) < 0.5) continue;
            const double nearest = std::round(res.x[std::size_t(b)]);
            double val = nearest;
            const double v_near = rounding_violation(b, nearest, res.x);
            if (v_near > 1e-9 &&
                rounding_violation(b, 1.0 - nearest, res.x) < v_near - 1e-12)
                val = 1.0 - nearest;
            if (!prop.fix(b, val) || !prop.propagate()) {
                ok = false;
                break;
            }
        }
        if (ok) {
            NodeLp lpres = node_lp(prop);
            if (lpres.kind == NodeLpKind::Ok && binaries_integral(lpres.res.x))
                update_incumbent(lpres.res.objective, lpres.res.x);
        }
        prop.rollback(mark);
    }

    void try_hint(Propagator& prop) {
        const std::size_t mark = prop.trail_mark();
        bool ok = true;
        for (int b : binaries_) {
            auto it = model_->hint.find(b);
            if (it == model_->hint.end()) continue;
            if (!prop.fix(b, it->second > 0.5 ? 1.0 : 0.0) || !prop.propagate()) {
                ok = false;
                break;
            }
        }
        if (ok) {
            NodeLp lpres = node_lp(prop);
            if (lpres.kind == NodeLpKind::Ok) {
                if (binaries_integral(lpres.res.x)) {
                    update_incumbent(lpres.res.objective, lpres.res.x);
                } else {
                    round_dive(prop, lpres.res);
                }
            }
        }
        prop.rollback(mark);
    }

    bool binaries_integral(const std::vector<double>& x) const {
        for (int b : binaries_)
            if (std::abs(x[std::size_t(b)] - std::round(x[std::size_t(b)])) > opt_.int_tol)
                return false;
        return true;
    }

    // Re-solve with the incumbent's binaries pinned so the reported solution
    // carries exact 0/1 values.
    void polish(Propagator& prop) {
        const std::size_t mark = prop.trail_mark();
        bool ok = true;
        for (int b : binaries_) {
            const double val = std::round(incumbent_->second[std::size_t(b)]);
            if (!prop.fix(b, val) || !prop.propagate()) {
                ok = false;
                break;
            }
        }
        if (ok) {
            NodeLp lpres = node_lp(prop);
            if (lpres.kind == NodeLpKind::Ok &&
                lpres.res.objective <=
                    incumbent_->first + 1e-9 * (1.0 + std::abs(incumbent_->first))) {
                std::vector<double> x = lpres.res.x;
                for (int b : binaries_) x[std::size_t(b)] = std::round(x[std::size_t(b)]);
                incumbent_ = {std::min(incumbent_->first, lpres.res.objective), std::move(x)};
            }
        }
        prop.rollback(mark);
    }

    const MilpModel* model_;
    BbOptions opt_;
    std::vector<int> binaries_;
    std::vector<std::vector<int>> binary_rows_;
    std::priority_queue<Node> queue_;
    std::optional<std::pair<double, std::vector<double>>> incumbent_;
    double obj_lb_ = -kInf;
    long next_id_ = 0;
    std::size_t root_mark_ = 0;
    StopWatch watch_;
};

inline MilpSolution solve_branch_and_bound(const MilpModel& model, BbOptions opt = {}) {
    return BranchAndBound(model, opt).run();
}

} // namespace cvarsr::milp
