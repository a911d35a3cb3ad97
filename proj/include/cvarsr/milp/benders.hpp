#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <thread>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "cvarsr/common.hpp"
#include "cvarsr/milp/branch_and_bound.hpp"
#include "cvarsr/milp/model.hpp"
#include "cvarsr/milp/propagation.hpp"
#include "cvarsr/milp/relaxation.hpp"

namespace cvarsr::milp {

struct BendersOptions {
    double time_limit_s = kInf;
    double rel_gap = 1e-8;
    double abs_gap = 1e-7;
    int max_iterations = 2000;
    int threads = 0; // 0 = hardware concurrency
    LpOptions lp;
};

// Multicut Benders (L-shaped) decomposition of a block-annotated model.
// Master holds the shared variables plus one epigraph per block; subproblem
// cuts come from the reduced costs of the shared variables, which are pinned
// in every block solve. Block integer variables are relaxed for cut
// generation; candidate upper bounds are evaluated with the true block MILPs,
// so a nonzero integrality gap is reported honestly instead of being hidden.
class BendersSolver {
public:
    BendersSolver(const MilpModel& model, BendersOptions opt) : model_(&model), opt_(opt) {}

    MilpSolution run() {
        model_->validate();
        split();

        // master model: shared vars + one epigraph per block
        MilpModel master;
        master_of_.assign(model_->vars.size(), -1);
        for (int gv : master_vars_) {
            const Var& v = model_->vars[std::size_t(gv)];
            require(v.kind == VarKind::Continuous,
                    "benders master requires continuous shared variables");
            master_of_[std::size_t(gv)] = master.add_continuous(v.name, v.lb, v.ub);
        }
        for (const auto& r : master_rows_) {
            LinExpr terms;
            for (const auto& t : r->terms) terms.push_back({master_of_[std::size_t(t.var)], t.coef});
            master.add_range(r->name, std::move(terms), r->lb, r->ub);
        }
        // epigraph lower bounds from one propagation pass over the full model
        Propagator prop(*model_);
        prop.propagate_all();
        std::vector<int> theta(std::size_t(nblocks_), -1);
        for (int b = 0; b < nblocks_; ++b) {
            auto [lo, hi] = prop.expr_bounds(block_obj_[std::size_t(b)]);
            (void)hi;
            if (!std::isfinite(lo)) lo = -1e12;
            theta[std::size_t(b)] = master.add_continuous("theta" + std::to_string(b), lo, kInf);
        }
        for (const auto& t : master_obj_) master.objective.push_back({master_of_[std::size_t(t.var)], t.coef});
        for (int b = 0; b < nblocks_; ++b) master.objective.push_back({theta[std::size_t(b)], 1.0});
        master.objective_offset = model_->objective_offset;

        const int nthreads = opt_.threads > 0
                                 ? opt_.threads
                                 : std::max(1u, std::thread::hardware_concurrency());

        double best_ub = kInf;
        double best_lb = -kInf;
        std::vector<double> best_master;                  // shared var values
        std::vector<std::vector<double>> best_block_vals; // per block sub-model values

        // Box trust region around the incumbent. The boxed master keeps the
        // iterates near points that already evaluate well; the unboxed master
        // certifies the global lower bound every few iterations.
        std::vector<double> center, radius, range;
        for (int gv : master_vars_) {
            const Var& v = model_->vars[std::size_t(gv)];
            const double lo = std::isfinite(v.lb) ? v.lb : -1e6;
            const double hi = std::isfinite(v.ub) ? v.ub : 1e6;
            range.push_back(std::max(1.0, hi - lo));
        }

        auto solve_master = [&](bool boxed) {
            std::vector<double> save_lb, save_ub;
            if (boxed && !center.empty()) {
                for (std::size_t k = 0; k < master_vars_.size(); ++k) {
                    Var& v = master.vars[std::size_t(master_of_[std::size_t(master_vars_[k])])];
                    save_lb.push_back(v.lb);
                    save_ub.push_back(v.ub);
                    v.lb = std::max(v.lb, center[k] - radius[k]);
                    v.ub = std::min(v.ub, center[k] + radius[k]);
                }
            }
            LpProblem mlp = make_lp(master);
            LpResult res = solve_lp(mlp, opt_.lp);
            if (boxed && !center.empty())
                for (std::size_t k = 0; k < master_vars_.size(); ++k) {
                    Var& v = master.vars[std::size_t(master_of_[std::size_t(master_vars_[k])])];
                    v.lb = save_lb[k];
                    v.ub = save_ub[k];
                }
            return res;
        };

        auto eval_blocks = [&](const std::vector<double>& zeval,
                               std::vector<BlockResult>& results) {
            results.resize(std::size_t(nblocks_));
            auto worker = [&](int lo_b, int hi_b) {
                for (int b = lo_b; b < hi_b; ++b)
                    results[std::size_t(b)] = solve_block(b, zeval);
            };
            if (nthreads <= 1 || nblocks_ <= 1) {
                worker(0, nblocks_);
            } else {
                std::vector<std::future<void>> futs;
                const int chunk = (nblocks_ + nthreads - 1) / nthreads;
                for (int s = 0; s < nblocks_; s += chunk)
                    futs.push_back(std::async(std::launch::async, worker, s,
                                              std::min(nblocks_, s + chunk)));
                for (auto& f : futs) f.get();
            }
            double total = 0.0;
            for (const auto& r : results) {
                if (!r.feasible)
                    throw Error("benders: block subproblem infeasible; the model lacks "
                                "relatively complete recourse");
                total += r.true_value;
            }
            return total;
        };

        auto master_cost_at = [&](const std::vector<double>& z) {
            double acc = model_->objective_offset;
            for (const auto& t : master_obj_)
                for (std::size_t k = 0; k < master_vars_.size(); ++k)
                    if (master_vars_[k] == t.var) {
                        acc += t.coef * z[k];
                        break;
                    }
            return acc;
        };

        auto add_cuts = [&](const std::vector<double>& zeval,
                            const std::vector<BlockResult>& results, const LpResult& mres,
                            int iter) {
            int added = 0;
            for (int b = 0; b < nblocks_; ++b) {
                const BlockResult& r = results[std::size_t(b)];
                const double th = mres.x[std::size_t(theta[std::size_t(b)])];
                if (r.lp_value <= th + 1e-10 * (1.0 + std::abs(r.lp_value))) continue;
                LinExpr terms{{theta[std::size_t(b)], 1.0}};
                double rhs = r.lp_value;
                for (std::size_t k = 0; k < master_vars_.size(); ++k) {
                    const double d = r.master_rc[k];
                    if (d == 0.0) continue;
                    terms.push_back({master_of_[std::size_t(master_vars_[k])], -d});
                    rhs -= d * zeval[k];
                }
                master.add_ge("cut" + std::to_string(b) + "_" + std::to_string(iter),
                              std::move(terms), rhs);
                ++added;
            }
            return added;
        };

        MilpSolution out;
        const double tr_shrink = 0.5, tr_grow = 2.0;
        int since_global_lb = 0;
        for (int iter = 0; iter < opt_.max_iterations; ++iter) {
            if (watch_.seconds() > opt_.time_limit_s) break;

            const bool boxed = !center.empty() && since_global_lb < 8;
            LpResult mres = solve_master(boxed);
            if (mres.status == LpStatus::Infeasible) {
                out.status = SolveStatus::Infeasible;
                return out;
            }
            if (mres.status != LpStatus::Optimal && std::getenv("CVARSR_DUMP_FAILED_LP")) {
                atomic_write_file(std::getenv("CVARSR_DUMP_FAILED_LP"), master.to_json().dump());
            }
            require(mres.status == LpStatus::Optimal,
                    std::string("benders: master LP did not solve (status ") +
                        std::to_string(int(mres.status)) + ")");
            if (!boxed) {
                best_lb = std::max(best_lb, mres.objective);
                since_global_lb = 0;
            } else {
                ++since_global_lb;
            }

            std::vector<double> zhat(master_vars_.size());
            for (std::size_t k = 0; k < master_vars_.size(); ++k)
                zhat[k] = mres.x[std::size_t(master_of_[std::size_t(master_vars_[k])])];

            std::vector<BlockResult> results;
            const double blocks_value = eval_blocks(zhat, results);
            const double ub_cand = master_cost_at(zhat) + blocks_value;

            bool accepted = false;
            if (ub_cand < best_ub - 1e-10 * (1.0 + std::abs(ub_cand))) {
                accepted = true;
                best_ub = ub_cand;
                best_master = zhat;
                best_block_vals.clear();
                best_block_vals.reserve(std::size_t(nblocks_));
                for (const auto& r : results) best_block_vals.push_back(r.values);
            }

            if (center.empty()) {
                center = zhat;
                radius.clear();
                for (double rg : range) radius.push_back(0.1 * rg);
            } else {
                const double predicted = mres.objective; // model value at zhat
                const double actual = ub_cand;
                if (accepted) {
                    center = zhat;
                    // grow when the cut model was trustworthy inside the box
                    if (actual <= predicted + 0.25 * std::abs(best_ub - predicted) + 1e-12)
                        for (std::size_t k = 0; k < radius.size(); ++k)
                            radius[k] = std::min(tr_grow * radius[k], range[k]);
                } else if (boxed) {
                    for (std::size_t k = 0; k < radius.size(); ++k)
                        radius[k] = std::max(tr_shrink * radius[k], 1e-6 * range[k]);
                }
            }

            if (std::getenv("CVARSR_BENDERS_LOG"))
                std::fprintf(stderr,
                             "[benders] it=%d %s%s lb=%.6f ub=%.6f t=%.2fs rows=%zu r0=%.3g\n",
                             iter, boxed ? "TR" : "GL", accepted ? "+" : " ", best_lb, best_ub,
                             watch_.seconds(), master.rows.size(),
                             radius.empty() ? 0.0 : radius[0]);

            const double gap_abs = best_ub - best_lb;
            if (gap_abs <= std::max(opt_.abs_gap, opt_.rel_gap * std::max(1.0, std::abs(best_ub))))
                break;

            const int added = add_cuts(zhat, results, mres, iter);
            if (added == 0 && !boxed) break; // unboxed master optimal for the LP relaxation
            if (added == 0) since_global_lb = 8; // force a global step next
        }

        if (!std::isfinite(best_ub)) {
            out.status = SolveStatus::TimeLimit;
            return out;
        }
        out.objective = best_ub;
        out.gap = std::max(0.0, best_ub - best_lb) / std::max(1.0, std::abs(best_ub));
        out.status = out.gap <= std::max(opt_.abs_gap, opt_.rel_gap * 10.0)
                         ? SolveStatus::Optimal
                         : SolveStatus::Feasible;
        out.values.assign(model_->vars.size(), 0.0);
        for (std::size_t k = 0; k < master_vars_.size(); ++k)
            out.values[std::size_t(master_vars_[k])] = best_master[k];
        for (int b = 0; b < nblocks_; ++b) {
            const auto& sub_vars = block_vars_[std::size_t(b)];
            for (std::size_t k = 0; k < sub_vars.size(); ++k)
                out.values[std::size_t(sub_vars[k])] =
                    best_block_vals[std::size_t(b)][master_vars_.size() + k];
        }
        return out;
    }

private:
    struct BlockResult {
        bool feasible = false;
        double lp_value = 0.0;
        double true_value = 0.0;          // MILP value when integers are present
        std::vector<double> master_rc;    // subgradient wrt shared vars
        std::vector<double> values;       // sub-model variable values
    };

    void split() {
        nblocks_ = model_->num_blocks();
        require(nblocks_ >= 1, "benders requires a block-annotated model");
        block_vars_.assign(std::size_t(nblocks_), {});
        for (std::size_t j = 0; j < model_->vars.size(); ++j) {
            const int b = model_->vars[j].block;
            if (b == 0) master_vars_.push_back(int(j));
            else block_vars_[std::size_t(b - 1)].push_back(int(j));
        }
        block_rows_.assign(std::size_t(nblocks_), {});
        for (const auto& r : model_->rows) {
            int b = 0;
            for (const auto& t : r.terms) {
                const int vb = model_->vars[std::size_t(t.var)].block;
                if (vb == 0) continue;
                require(b == 0 || b == vb, "row " + r.name + " couples two blocks");
                b = vb;
            }
            if (b == 0) master_rows_.push_back(&r);
            else block_rows_[std::size_t(b - 1)].push_back(&r);
        }
        block_obj_.assign(std::size_t(nblocks_), {});
        for (const auto& t : model_->objective) {
            const int vb = model_->vars[std::size_t(t.var)].block;
            if (vb == 0) master_obj_.push_back(t);
            else block_obj_[std::size_t(vb - 1)].push_back(t);
        }

        // per-block sub-models: shared vars first (pinned per iterate), then block vars
        sub_models_.resize(std::size_t(nblocks_));
        sub_has_binaries_.assign(std::size_t(nblocks_), false);
        for (int b = 0; b < nblocks_; ++b) {
            MilpModel& sub = sub_models_[std::size_t(b)];
            std::vector<int> sub_of(model_->vars.size(), -1);
            for (int gv : master_vars_) {
                const Var& v = model_->vars[std::size_t(gv)];
                sub_of[std::size_t(gv)] = sub.add_continuous(v.name, v.lb, v.ub);
            }
            for (int gv : block_vars_[std::size_t(b)]) {
                const Var& v = model_->vars[std::size_t(gv)];
                sub_of[std::size_t(gv)] = sub.add_var(v.name, v.kind, v.lb, v.ub);
                if (v.kind == VarKind::Binary) sub_has_binaries_[std::size_t(b)] = true;
            }
            for (const Row* r : block_rows_[std::size_t(b)]) {
                LinExpr terms;
                for (const auto& t : r->terms) terms.push_back({sub_of[std::size_t(t.var)], t.coef});
                sub.add_range(r->name, std::move(terms), r->lb, r->ub);
            }
            for (const auto& t : block_obj_[std::size_t(b)])
                sub.objective.push_back({sub_of[std::size_t(t.var)], t.coef});
        }
    }

    BlockResult solve_block(int b, const std::vector<double>& zhat) const {
        MilpModel sub = sub_models_[std::size_t(b)]; // cheap copy; bounds get pinned
        for (std::size_t k = 0; k < master_vars_.size(); ++k) {
            sub.vars[k].lb = zhat[k];
            sub.vars[k].ub = zhat[k];
        }
        BlockResult r;
        LpProblem lp = make_lp(sub);
        LpResult res = solve_lp(lp, opt_.lp);
        if (res.status == LpStatus::Infeasible) return r;
        require(res.status == LpStatus::Optimal,
                "benders: block LP did not solve (" + std::to_string(b) + ")");
        r.feasible = true;
        r.lp_value = res.objective;
        r.master_rc.assign(master_vars_.size(), 0.0);
        for (std::size_t k = 0; k < master_vars_.size(); ++k)
            r.master_rc[k] = res.reduced_costs[k];

        bool integral = true;
        if (sub_has_binaries_[std::size_t(b)]) {
            for (std::size_t j = 0; j < sub.vars.size(); ++j)
                if (sub.vars[j].kind == VarKind::Binary &&
                    std::abs(res.x[j] - std::round(res.x[j])) > 1e-6) {
                    integral = false;
                    break;
                }
        }
        if (integral) {
            r.true_value = res.objective;
            r.values = res.x;
        } else {
            BbOptions bopt;
            bopt.lp = opt_.lp;
            bopt.time_limit_s = 60.0;
            MilpSolution ms = solve_branch_and_bound(sub, bopt);
            require(ms.has_solution(), "benders: block MILP did not solve");
            r.true_value = ms.objective;
            r.values = ms.values;
        }
        return r;
    }

    const MilpModel* model_;
    BendersOptions opt_;
    int nblocks_ = 0;
    std::vector<int> master_vars_;
    std::vector<std::vector<int>> block_vars_;
    std::vector<const Row*> master_rows_;
    std::vector<std::vector<const Row*>> block_rows_;
    LinExpr master_obj_;
    std::vector<LinExpr> block_obj_;
    std::vector<MilpModel> sub_models_;
    std::vector<bool> sub_has_binaries_;
    std::vector<int> master_of_;
    StopWatch watch_;
};

inline MilpSolution solve_benders(const MilpModel& model, BendersOptions opt = {}) {
    return BendersSolver(model, opt).run();
}

} // namespace cvarsr::milp
