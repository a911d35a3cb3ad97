#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "cvarsr/common.hpp"
#include "cvarsr/milp/benders.hpp"
#include "cvarsr/milp/branch_and_bound.hpp"
#include "cvarsr/milp/exhaustive.hpp"
#include "cvarsr/milp/model.hpp"

namespace cvarsr::milp {

// Abstract solver backend. Two bundled implementations: the branch-and-bound
// engine (which hands large block-annotated models to the Benders driver) and
// the exhaustive oracle for tiny instances.
class MilpSolver {
public:
    virtual ~MilpSolver() = default;
    virtual MilpSolution solve(const MilpModel& model, double time_limit_s, double rel_gap) = 0;
    virtual std::string name() const = 0;
};

class BranchAndBoundSolver : public MilpSolver {
public:
    enum class Mode { Auto, Direct, Benders };

    explicit BranchAndBoundSolver(Mode mode = Mode::Auto) : mode_(mode) {}

    MilpSolution solve(const MilpModel& model, double time_limit_s, double rel_gap) override {
        const bool decompose =
            mode_ == Mode::Benders ||
            (mode_ == Mode::Auto && model.num_blocks() >= 2 && model.rows.size() > 2000);
        if (decompose) {
            BendersOptions opt;
            opt.time_limit_s = time_limit_s;
            opt.rel_gap = std::max(rel_gap, 1e-9);
            opt.abs_gap = 1e-7;
            return solve_benders(model, opt);
        }
        BbOptions opt;
        opt.time_limit_s = time_limit_s;
        opt.rel_gap = std::max(rel_gap, 1e-9);
        return solve_branch_and_bound(model, opt);
    }

    std::string name() const override {
        switch (mode_) {
            case Mode::Direct: return "bb";
            case Mode::Benders: return "benders";
            default: return "auto";
        }
    }

private:
    Mode mode_;
};

// Propagation-driven enumeration as a backend. The search budget is node
// based, so results are deterministic for a fixed budget; the wall-clock limit
// is only a generous safety stop.
class ExhaustiveSolver : public MilpSolver {
public:
    explicit ExhaustiveSolver(std::size_t max_binaries = 128) : max_binaries_(max_binaries) {}

    MilpSolution solve(const MilpModel& model, double time_limit_s, double /*rel_gap*/) override {
        ExhaustiveOptions opt;
        opt.max_binaries = max_binaries_;
        if (std::isfinite(time_limit_s)) {
            opt.node_limit = std::max<long>(2000000, long(1.5e6 * time_limit_s));
            opt.time_limit_s = 3.0 * time_limit_s;
        }
        return solve_exhaustive(model, opt);
    }

    std::string name() const override { return "exhaustive"; }

private:
    std::size_t max_binaries_;
};

inline std::shared_ptr<MilpSolver> make_solver(const std::string& name) {
    if (name.empty() || name == "auto" || name == "bb")
        return std::make_shared<BranchAndBoundSolver>(
            name == "bb" ? BranchAndBoundSolver::Mode::Direct : BranchAndBoundSolver::Mode::Auto);
    if (name == "benders")
        return std::make_shared<BranchAndBoundSolver>(BranchAndBoundSolver::Mode::Benders);
    if (name == "exhaustive") return std::make_shared<ExhaustiveSolver>();
    throw Error("unknown MILP backend: " + name + " (expected auto|bb|benders|exhaustive)");
}

// Backend selected by the CVAR_SR_SOLVER environment variable; defaults to the
// auto-routing branch and bound.
inline std::shared_ptr<MilpSolver> default_solver() {
    const char* env = std::getenv("CVAR_SR_SOLVER");
    return make_solver(env ? std::string(env) : "auto");
}

} // namespace cvarsr::milp
