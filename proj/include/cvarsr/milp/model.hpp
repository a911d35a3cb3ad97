#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cvarsr/common.hpp"

namespace cvarsr::milp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary };

struct Var {
    std::string name;
    VarKind kind = VarKind::Continuous;
    double lb = 0.0;
    double ub = kInf;
    int block = 0; // 0 = shared/first stage; b >= 1 = scenario block b
};

struct Term {
    int var = -1;
    double coef = 0.0;
};

using LinExpr = std::vector<Term>;

// lb <= terms <= ub; equality rows have lb == ub.
struct Row {
    LinExpr terms;
    double lb = -kInf;
    double ub = kInf;
    std::string name;
};

// Solver-agnostic MILP in minimize form. Rows are ranged; senses <=, =, >=
// map onto one-sided or equal range bounds. `block` annotations mark the
// two-stage structure a decomposing solver may exploit; single-block models
// leave every var at block 0.
struct MilpModel {
    std::vector<Var> vars;
    std::vector<Row> rows;
    LinExpr objective;
    double objective_offset = 0.0;
    std::unordered_map<int, double> hint; // optional warm-start values by var id

    int add_var(const std::string& name, VarKind kind, double lb, double ub, int block = 0) {
        require(lb <= ub, "variable " + name + " has empty bound interval");
        if (kind == VarKind::Binary) require(lb >= 0.0 && ub <= 1.0, "binary bounds outside [0,1]");
        vars.push_back(Var{name, kind, lb, ub, block});
        return int(vars.size()) - 1;
    }
    int add_continuous(const std::string& name, double lb, double ub, int block = 0) {
        return add_var(name, VarKind::Continuous, lb, ub, block);
    }
    int add_binary(const std::string& name, int block = 0) {
        return add_var(name, VarKind::Binary, 0.0, 1.0, block);
    }

    void add_range(const std::string& name, LinExpr terms, double lb, double ub) {
        rows.push_back(Row{std::move(terms), lb, ub, name});
    }
    void add_le(const std::string& name, LinExpr terms, double rhs) {
        add_range(name, std::move(terms), -kInf, rhs);
    }
    void add_ge(const std::string& name, LinExpr terms, double rhs) {
        add_range(name, std::move(terms), rhs, kInf);
    }
    void add_eq(const std::string& name, LinExpr terms, double rhs) {
        add_range(name, std::move(terms), rhs, rhs);
    }

    std::size_t num_binaries() const {
        std::size_t k = 0;
        for (const auto& v : vars)
            if (v.kind == VarKind::Binary) ++k;
        return k;
    }
    int num_blocks() const {
        int b = 0;
        for (const auto& v : vars) b = std::max(b, v.block);
        return b;
    }

    void validate() const {
        auto check_terms = [&](const LinExpr& terms, const std::string& where) {
            for (const auto& t : terms) {
                require(t.var >= 0 && t.var < int(vars.size()),
                        where + " references an undeclared variable");
                require(std::isfinite(t.coef), where + " has a non-finite coefficient");
            }
        };
        for (const auto& r : rows) {
            check_terms(r.terms, "row " + r.name);
            require(r.lb <= r.ub, "row " + r.name + " has empty range");
        }
        check_terms(objective, "objective");
    }

    // Text dump in LP format, for debugging.
    void write_lp(std::ostream& os) const;

    nlohmann::json to_json() const;
    static MilpModel from_json(const nlohmann::json& j);
};

enum class SolveStatus { Optimal, Feasible, Infeasible, TimeLimit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::TimeLimit: return "time_limit";
    }
    return "?";
}

struct MilpSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();

    bool has_solution() const {
        return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
    }
    double value(int var) const { return values.at(std::size_t(var)); }
    double value(const MilpModel& m, const std::string& name) const {
        for (std::size_t j = 0; j < m.vars.size(); ++j)
            if (m.vars[j].name == name) return values.at(j);
        throw Error("unknown variable: " + name);
    }
};

inline double eval_expr(const LinExpr& terms, const std::vector<double>& x) {
    double acc = 0.0;
    for (const auto& t : terms) acc += t.coef * x[std::size_t(t.var)];
    return acc;
}

inline nlohmann::json MilpModel::to_json() const {
    auto enc = [](double x) -> nlohmann::json {
        if (x == kInf) return "inf";
        if (x == -kInf) return "-inf";
        return x;
    };
    nlohmann::json jv = nlohmann::json::array();
    for (const auto& v : vars)
        jv.push_back({{"n", v.name},
                      {"k", v.kind == VarKind::Binary ? "b" : "c"},
                      {"lb", enc(v.lb)},
                      {"ub", enc(v.ub)},
                      {"blk", v.block}});
    auto enc_terms = [](const LinExpr& terms) {
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& t : terms) jt.push_back({t.var, t.coef});
        return jt;
    };
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : rows)
        jr.push_back({{"n", r.name}, {"lb", enc(r.lb)}, {"ub", enc(r.ub)}, {"t", enc_terms(r.terms)}});
    return nlohmann::json{{"vars", jv},
                          {"rows", jr},
                          {"obj", enc_terms(objective)},
                          {"off", objective_offset}};
}

inline MilpModel MilpModel::from_json(const nlohmann::json& j) {
    auto dec = [](const nlohmann::json& x) -> double {
        if (x.is_string()) return x.get<std::string>() == "inf" ? kInf : -kInf;
        return x.get<double>();
    };
    auto dec_terms = [](const nlohmann::json& jt) {
        LinExpr terms;
        for (const auto& e : jt) terms.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
        return terms;
    };
    MilpModel m;
    for (const auto& v : j.at("vars"))
        m.add_var(v.at("n").get<std::string>(),
                  v.at("k").get<std::string>() == "b" ? VarKind::Binary : VarKind::Continuous,
                  dec(v.at("lb")), dec(v.at("ub")), v.value("blk", 0));
    for (const auto& r : j.at("rows"))
        m.add_range(r.at("n").get<std::string>(), dec_terms(r.at("t")), dec(r.at("lb")),
                    dec(r.at("ub")));
    m.objective = dec_terms(j.at("obj"));
    m.objective_offset = j.value("off", 0.0);
    return m;
}

inline void MilpModel::write_lp(std::ostream& os) const {
    auto emit = [&](const LinExpr& terms) {
        bool first = true;
        for (const auto& t : terms) {
            if (t.coef == 0.0) continue;
            double c = t.coef;
            if (first) {
                if (c < 0) os << "- ";
                first = false;
            } else {
                os << (c < 0 ? " - " : " + ");
            }
            os << std::abs(c) << " " << vars[std::size_t(t.var)].name;
        }
        if (first) os << "0";
    };
    os << "Minimize\n obj: ";
    emit(objective);
    if (objective_offset != 0.0) os << " + " << objective_offset;
    os << "\nSubject To\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        std::string nm = r.name.empty() ? ("c" + std::to_string(i)) : r.name;
        if (r.lb == r.ub) {
            os << " " << nm << ": ";
            emit(r.terms);
            os << " = " << r.lb << "\n";
        } else {
            if (r.ub < kInf) {
                os << " " << nm << "_u: ";
                emit(r.terms);
                os << " <= " << r.ub << "\n";
            }
            if (r.lb > -kInf) {
                os << " " << nm << "_l: ";
                emit(r.terms);
                os << " >= " << r.lb << "\n";
            }
        }
    }
    os << "Bounds\n";
    for (const auto& v : vars) {
        if (v.lb == -kInf)
            os << " -inf <= " << v.name;
        else
            os << " " << v.lb << " <= " << v.name;
        if (v.ub == kInf)
            os << " <= +inf\n";
        else
            os << " <= " << v.ub << "\n";
    }
    os << "Binaries\n";
    for (const auto& v : vars)
        if (v.kind == VarKind::Binary) os << " " << v.name;
    os << "\nEnd\n";
}

} // namespace cvarsr::milp
