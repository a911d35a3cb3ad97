#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "cvarsr/common.hpp"
#include "cvarsr/milp/model.hpp"
#include "cvarsr/milp/propagation.hpp"
#include "cvarsr/milp/relaxation.hpp"

namespace cvarsr::milp {

struct ExhaustiveOptions {
    std::size_t max_binaries = 25;
    double time_limit_s = kInf;
    long node_limit = 400000000;
};

// Depth-first enumeration of binary assignments with interval propagation and
// incumbent pruning. Fully fixed leaves are evaluated exactly; the continuous
// part must collapse under propagation or reduce to a small residual LP.
class ExhaustiveSearch {
public:
    ExhaustiveSearch(const MilpModel& model, ExhaustiveOptions opt)
        : model_(&model), opt_(opt), prop_(model) {}

    MilpSolution run() {
        model_->validate();
        for (std::size_t j = 0; j < model_->vars.size(); ++j)
            if (model_->vars[j].kind == VarKind::Binary) binaries_.push_back(int(j));
        require(binaries_.size() <= opt_.max_binaries,
                "too many binaries for exhaustive search (" + std::to_string(binaries_.size()) +
                    " > " + std::to_string(opt_.max_binaries) + ")");

        MilpSolution out;
        if (!prop_.propagate_all()) {
            out.status = SolveStatus::Infeasible;
            return out;
        }
        truncated_ = false;
        dfs(0);

        if (!incumbent_) {
            out.status = truncated_ ? SolveStatus::TimeLimit : SolveStatus::Infeasible;
            return out;
        }
        out.status = truncated_ ? SolveStatus::Feasible : SolveStatus::Optimal;
        out.values = std::move(incumbent_->second);
        out.objective = incumbent_->first;
        out.gap = truncated_ ? kInf : 0.0;
        return out;
    }

private:
    void dfs(std::size_t next_hint) {
        if (truncated_) return;
        if (++nodes_ % 8192 == 0 &&
            (watch_.seconds() > opt_.time_limit_s || nodes_ > opt_.node_limit)) {
            truncated_ = true;
            return;
        }

        // incumbent pruning on the propagated objective range
        if (incumbent_) {
            auto [obj_lo, obj_hi] = prop_.expr_bounds(model_->objective);
            (void)obj_hi;
            if (obj_lo + model_->objective_offset >= incumbent_->first - 1e-12) return;
        }

        // next unfixed binary, in declaration order
        int v = -1;
        for (std::size_t k = next_hint; k < binaries_.size(); ++k) {
            const int cand = binaries_[k];
            if (prop_.hi(cand) - prop_.lo(cand) > 0.5) {
                v = cand;
                next_hint = k;
                break;
            }
        }

        if (v < 0) {
            evaluate_current_leaf();
            return;
        }

        double first = 0.0;
        if (auto it = model_->hint.find(v); it != model_->hint.end() && it->second > 0.5)
            first = 1.0;
        for (double val : {first, 1.0 - first}) {
            const std::size_t mark = prop_.trail_mark();
            if (prop_.fix(v, val) && prop_.propagate()) dfs(next_hint + 1);
            prop_.rollback(mark);
            if (truncated_) return;
        }
    }

    void evaluate_current_leaf() {
        std::vector<std::pair<int, double>> fixing;
        fixing.reserve(binaries_.size());
        for (int b : binaries_) fixing.emplace_back(b, prop_.lo(b) > 0.5 ? 1.0 : 0.0);
        auto leaf = evaluate_leaf(*model_, fixing);
        if (!leaf) return;
        if (!incumbent_ || leaf->first < incumbent_->first - 1e-12)
            incumbent_ = std::move(leaf);
    }

    const MilpModel* model_;
    ExhaustiveOptions opt_;
    Propagator prop_;
    std::vector<int> binaries_;
    std::optional<std::pair<double, std::vector<double>>> incumbent_;
    long nodes_ = 0;
    bool truncated_ = false;
    StopWatch watch_;
};

// Exact optimum of a tiny MILP by enumerating binary assignments. The spec
// contract for the built-in oracle: at most 25 binaries.
inline MilpSolution solve_exhaustive(const MilpModel& model, ExhaustiveOptions opt = {}) {
    return ExhaustiveSearch(model, opt).run();
}

} // namespace cvarsr::milp
