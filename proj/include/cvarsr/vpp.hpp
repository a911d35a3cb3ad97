#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cvarsr/common.hpp"
#include "cvarsr/milp/backend.hpp"
#include "cvarsr/risk.hpp"
#include "cvarsr/scenario.hpp"

namespace cvarsr {

// Parameters of the VPP day-ahead offering problem: storage ratings and
// efficiencies, SoC window, trade window per step, intraday balancing caps and
// the buy/sell price factors.
struct VppParams {
    double dt_hours = 0.25;
    int horizon = 96;
    double es_power_kw = 200.0;
    double es_energy_kwh = 400.0;
    double eta_c = 0.95;
    double eta_d = 0.95;
    double soc_min = 0.1;
    double soc_max = 0.9;
    double soc_init = 0.5;
    std::vector<double> trade_cap_kw; // one entry broadcasts to all steps
    double intraday_up_cap_kw = 0.0;
    double intraday_down_cap_kw = 0.0;
    double buy_markup = 1.3;
    double sell_markdown = 0.7;

    double trade_cap(int t) const {
        return trade_cap_kw.size() == 1 ? trade_cap_kw[0] : trade_cap_kw.at(std::size_t(t));
    }

    void validate() const {
        require(dt_hours > 0.0, "dt_hours must be positive");
        require(horizon >= 1, "horizon must be >= 1");
        require(es_power_kw > 0.0 && es_energy_kwh > 0.0, "storage ratings must be positive");
        require(eta_c > 0.0 && eta_c <= 1.0 && eta_d > 0.0 && eta_d <= 1.0,
                "efficiencies must lie in (0,1]");
        require(0.0 <= soc_min && soc_min <= soc_init && soc_init <= soc_max && soc_max <= 1.0,
                "SoC window must satisfy 0 <= min <= init <= max <= 1");
        require(!trade_cap_kw.empty() &&
                    (trade_cap_kw.size() == 1 || trade_cap_kw.size() == std::size_t(horizon)),
                "trade cap must be a scalar or one value per step");
        for (double c : trade_cap_kw) require(c > 0.0, "trade caps must be positive");
        require(intraday_up_cap_kw > 0.0 && intraday_down_cap_kw > 0.0,
                "intraday caps must be positive");
        require(buy_markup > 1.0, "buy markup must exceed 1");
        require(sell_markdown > 0.0 && sell_markdown < 1.0, "sell markdown must lie in (0,1)");
    }

    // Data-driven caps that guarantee a feasible completion for every
    // first-stage profile within the trade window (relatively complete
    // recourse): the window covers the largest net load, and the balancing
    // caps cover net load plus storage plus any in-window trade.
    static VppParams defaults_for(const ScenarioSet& set) {
        VppParams p;
        p.dt_hours = set.dt_hours;
        p.horizon = int(set.horizon());
        double max_abs_load = 1.0;
        for (const auto& s : set.scenarios)
            for (double v : s.net_load) max_abs_load = std::max(max_abs_load, std::abs(v));
        const double cap = max_abs_load + p.es_power_kw;
        p.trade_cap_kw = {cap};
        p.intraday_up_cap_kw = max_abs_load + p.es_power_kw + cap;
        p.intraday_down_cap_kw = p.intraday_up_cap_kw;
        return p;
    }
};

inline void to_json(nlohmann::json& j, const VppParams& p) {
    j = nlohmann::json{{"dt_hours", p.dt_hours},
                       {"horizon", p.horizon},
                       {"es_power_kw", p.es_power_kw},
                       {"es_energy_kwh", p.es_energy_kwh},
                       {"eta_c", p.eta_c},
                       {"eta_d", p.eta_d},
                       {"soc_min", p.soc_min},
                       {"soc_max", p.soc_max},
                       {"soc_init", p.soc_init},
                       {"trade_cap_kw", p.trade_cap_kw},
                       {"intraday_up_cap_kw", p.intraday_up_cap_kw},
                       {"intraday_down_cap_kw", p.intraday_down_cap_kw},
                       {"buy_markup", p.buy_markup},
                       {"sell_markdown", p.sell_markdown}};
}

inline void from_json(const nlohmann::json& j, VppParams& p) {
    VppParams d;
    p.dt_hours = j.value("dt_hours", d.dt_hours);
    p.horizon = j.value("horizon", d.horizon);
    p.es_power_kw = j.value("es_power_kw", d.es_power_kw);
    p.es_energy_kwh = j.value("es_energy_kwh", d.es_energy_kwh);
    p.eta_c = j.value("eta_c", d.eta_c);
    p.eta_d = j.value("eta_d", d.eta_d);
    p.soc_min = j.value("soc_min", d.soc_min);
    p.soc_max = j.value("soc_max", d.soc_max);
    p.soc_init = j.value("soc_init", d.soc_init);
    if (j.contains("trade_cap_kw")) {
        if (j.at("trade_cap_kw").is_number())
            p.trade_cap_kw = {j.at("trade_cap_kw").get<double>()};
        else
            p.trade_cap_kw = j.at("trade_cap_kw").get<std::vector<double>>();
    }
    p.intraday_up_cap_kw = j.value("intraday_up_cap_kw", d.intraday_up_cap_kw);
    p.intraday_down_cap_kw = j.value("intraday_down_cap_kw", d.intraday_down_cap_kw);
    p.buy_markup = j.value("buy_markup", d.buy_markup);
    p.sell_markdown = j.value("sell_markdown", d.sell_markdown);
}

struct FirstStage {
    std::vector<double> trade_kw;
};

struct RecourseSolution {
    double cost = 0.0;
    std::vector<double> intraday_up, intraday_down;
    std::vector<double> charge, discharge;
    std::vector<double> curtail;
    std::vector<double> soc; // T+1 values, soc[0] = soc_init
    std::vector<int> charge_state, trade_state;
};

struct FullSolveResult {
    FirstStage decision;
    double objective = 0.0;
    std::vector<double> per_scenario_costs;
    double var_value = 0.0;
    milp::SolveStatus status = milp::SolveStatus::Optimal;
    double gap = 0.0;
};

namespace detail {

struct VppVarRefs {
    std::vector<int> trade;
    int v_aux = -1;
    struct Scen {
        std::vector<int> up, down, charge, discharge, curtail, soc;
        std::vector<int> d_es, d_tr;
        int cost = -1;
        int shortfall = -1;
    };
    std::vector<Scen> scen;
};

inline double curtail_bound(const Scenario& s, int t) {
    if (!s.renewable.empty()) return std::max(0.0, s.renewable[std::size_t(t)]);
    return std::max(0.0, -s.net_load[std::size_t(t)]);
}

// The scenario-cost magnitude bound used for the CVaR threshold variable and
// the per-scenario cost variable boxes.
inline double cost_bound(const ScenarioSet& set, const VppParams& vpp) {
    double bound = 1.0;
    for (const auto& s : set.scenarios) {
        double b = 0.0;
        for (int t = 0; t < vpp.horizon; ++t) {
            const double pi = std::abs(s.price[std::size_t(t)]);
            b += vpp.dt_hours * pi *
                 (vpp.trade_cap(t) + vpp.buy_markup * vpp.intraday_up_cap_kw +
                  vpp.sell_markdown * vpp.intraday_down_cap_kw);
        }
        bound = std::max(bound, b);
    }
    return bound;
}

// Day-ahead offering model. One block per scenario; the trade profile and the
// CVaR threshold are the shared first stage. Passing `fixed_trade` pins the
// first stage, which turns the model into pure recourse.
inline milp::MilpModel build_vpp_model(const ScenarioSet& set, const VppParams& vpp,
                                       const RiskParams& risk, VppVarRefs& refs,
                                       const FirstStage* fixed_trade = nullptr) {
    using milp::LinExpr;
    set.validate();
    vpp.validate();
    risk.validate();
    require(int(set.horizon()) == vpp.horizon, "scenario horizon does not match VppParams");
    if (fixed_trade)
        require(int(fixed_trade->trade_kw.size()) == vpp.horizon,
                "first-stage profile has the wrong length");

    milp::MilpModel m;
    const int T = vpp.horizon;
    const std::size_t N = set.size();
    const bool with_cvar = risk.lambda > 0.0;
    const double Cb = cost_bound(set, vpp);

    refs.trade.resize(std::size_t(T));
    for (int t = 0; t < T; ++t) {
        double lb = -vpp.trade_cap(t), ub = vpp.trade_cap(t);
        if (fixed_trade) {
            const double z = fixed_trade->trade_kw[std::size_t(t)];
            require(z >= lb - 1e-9 && z <= ub + 1e-9, "first-stage trade outside its cap");
            lb = ub = z;
        }
        refs.trade[std::size_t(t)] = m.add_continuous("pt" + std::to_string(t), lb, ub, 0);
    }
    if (with_cvar) refs.v_aux = m.add_continuous("cvar_v", -Cb, Cb, 0);

    refs.scen.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        const Scenario& s = set.scenarios[i];
        const int blk = int(i) + 1;
        auto& r = refs.scen[i];
        const std::string si = std::to_string(i);
        r.up.resize(std::size_t(T));
        r.down.resize(std::size_t(T));
        r.charge.resize(std::size_t(T));
        r.discharge.resize(std::size_t(T));
        r.curtail.resize(std::size_t(T));
        r.soc.resize(std::size_t(T));
        r.d_es.resize(std::size_t(T));
        r.d_tr.resize(std::size_t(T));
        for (int t = 0; t < T; ++t) {
            const std::string st = si + "_" + std::to_string(t);
            r.up[std::size_t(t)] = m.add_continuous("up" + st, 0.0, vpp.intraday_up_cap_kw, blk);
            r.down[std::size_t(t)] =
                m.add_continuous("dn" + st, 0.0, vpp.intraday_down_cap_kw, blk);
            r.charge[std::size_t(t)] = m.add_continuous("ch" + st, 0.0, vpp.es_power_kw, blk);
            r.discharge[std::size_t(t)] = m.add_continuous("dis" + st, 0.0, vpp.es_power_kw, blk);
            r.curtail[std::size_t(t)] =
                m.add_continuous("cu" + st, 0.0, curtail_bound(s, t), blk);
            r.soc[std::size_t(t)] =
                m.add_continuous("soc" + st, vpp.soc_min, vpp.soc_max, blk);
            r.d_es[std::size_t(t)] = m.add_var("de" + st, milp::VarKind::Binary, 0.0, 1.0, blk);
            r.d_tr[std::size_t(t)] = m.add_var("dt" + st, milp::VarKind::Binary, 0.0, 1.0, blk);
        }
        r.cost = m.add_continuous("cost" + si, -Cb, Cb, blk);

        // scenario cost: dt * sum_t price * (trade + markup*up - markdown*down)
        {
            LinExpr terms{{r.cost, 1.0}};
            for (int t = 0; t < T; ++t) {
                const double pi = s.price[std::size_t(t)] * vpp.dt_hours;
                terms.push_back({refs.trade[std::size_t(t)], -pi});
                terms.push_back({r.up[std::size_t(t)], -pi * vpp.buy_markup});
                terms.push_back({r.down[std::size_t(t)], pi * vpp.sell_markdown});
            }
            m.add_eq("cost" + si, std::move(terms), 0.0);
        }

        const double soc_rate = vpp.dt_hours / vpp.es_energy_kwh;
        for (int t = 0; t < T; ++t) {
            const std::string st = si + "_" + std::to_string(t);
            // SoC recursion
            LinExpr rec{{r.soc[std::size_t(t)], 1.0},
                        {r.charge[std::size_t(t)], -soc_rate * vpp.eta_c},
                        {r.discharge[std::size_t(t)], soc_rate / vpp.eta_d}};
            if (t == 0) {
                m.add_eq("soc" + st, std::move(rec), vpp.soc_init);
            } else {
                rec.push_back({r.soc[std::size_t(t - 1)], -1.0});
                m.add_eq("soc" + st, std::move(rec), 0.0);
            }
            // storage state split
            m.add_le("es_c" + st,
                     {{r.charge[std::size_t(t)], 1.0}, {r.d_es[std::size_t(t)], vpp.es_power_kw}},
                     vpp.es_power_kw);
            m.add_le("es_d" + st,
                     {{r.discharge[std::size_t(t)], 1.0},
                      {r.d_es[std::size_t(t)], -vpp.es_power_kw}},
                     0.0);
            // intraday balancing split
            m.add_le("tr_u" + st,
                     {{r.up[std::size_t(t)], 1.0},
                      {r.d_tr[std::size_t(t)], -vpp.intraday_up_cap_kw}},
                     0.0);
            m.add_le("tr_d" + st,
                     {{r.down[std::size_t(t)], 1.0},
                      {r.d_tr[std::size_t(t)], vpp.intraday_down_cap_kw}},
                     vpp.intraday_down_cap_kw);
            // trade window on the realized exchange
            m.add_range("win" + st,
                        {{refs.trade[std::size_t(t)], 1.0},
                         {r.up[std::size_t(t)], 1.0},
                         {r.down[std::size_t(t)], -1.0}},
                        -vpp.trade_cap(t), vpp.trade_cap(t));
            // power balance: net load + curtailed renewable + storage = exchange
            m.add_eq("bal" + st,
                     {{r.curtail[std::size_t(t)], 1.0},
                      {r.charge[std::size_t(t)], 1.0},
                      {r.discharge[std::size_t(t)], -1.0},
                      {refs.trade[std::size_t(t)], -1.0},
                      {r.up[std::size_t(t)], -1.0},
                      {r.down[std::size_t(t)], 1.0}},
                     -s.net_load[std::size_t(t)]);
        }
        // terminal energy balance
        {
            LinExpr terms;
            for (int t = 0; t < T; ++t) {
                terms.push_back({r.charge[std::size_t(t)], vpp.eta_c * vpp.dt_hours});
                terms.push_back({r.discharge[std::size_t(t)], -vpp.dt_hours / vpp.eta_d});
            }
            m.add_eq("term" + si, std::move(terms), 0.0);
        }

        if (with_cvar) {
            r.shortfall = m.add_continuous("sf" + si, 0.0, 2.0 * Cb, blk);
            m.add_ge("sf" + si,
                     {{r.shortfall, 1.0}, {r.cost, -1.0}, {refs.v_aux, 1.0}}, 0.0);
        }
    }

    for (std::size_t i = 0; i < N; ++i) {
        const double w = set.probabilities[i];
        m.objective.push_back({refs.scen[i].cost, w});
        if (with_cvar)
            m.objective.push_back({refs.scen[i].shortfall, risk.lambda * w / (1.0 - risk.alpha)});
    }
    if (with_cvar) m.objective.push_back({refs.v_aux, risk.lambda});
    return m;
}

inline void check_recourse_feasibility(const RecourseSolution& r, const Scenario& s,
                                       const VppParams& vpp, const FirstStage& z) {
    const int T = vpp.horizon;
    const double tol = 1e-5;
    double net_es = 0.0;
    for (int t = 0; t < T; ++t) {
        const std::size_t u = std::size_t(t);
        require(std::min(r.intraday_up[u], r.intraday_down[u]) <= tol,
                "simultaneous intraday buy and sell");
        require(std::min(r.charge[u], r.discharge[u]) <= tol,
                "simultaneous charge and discharge");
        const double lhs = s.net_load[u] + r.curtail[u] + r.charge[u] - r.discharge[u];
        const double rhs = z.trade_kw[u] + r.intraday_up[u] - r.intraday_down[u];
        require(std::abs(lhs - rhs) <= tol * (1.0 + std::abs(lhs)), "power balance violated");
        const double soc_step =
            (vpp.eta_c * r.charge[u] - r.discharge[u] / vpp.eta_d) * vpp.dt_hours /
            vpp.es_energy_kwh;
        require(std::abs(r.soc[u + 1] - r.soc[u] - soc_step) <= tol, "SoC recursion violated");
        require(r.soc[u + 1] >= vpp.soc_min - tol && r.soc[u + 1] <= vpp.soc_max + tol,
                "SoC bounds violated");
        net_es += (vpp.eta_c * r.charge[u] - r.discharge[u] / vpp.eta_d) * vpp.dt_hours;
    }
    require(std::abs(net_es) <= tol * (1.0 + vpp.es_energy_kwh), "terminal energy balance violated");
}

} // namespace detail

// Minimize the recourse cost of one scenario for a fixed first stage. The
// returned solution satisfies the complementarity, SoC and balance
// constraints; violations raise an error.
inline RecourseSolution solve_recourse(const FirstStage& z, const Scenario& scenario,
                                       const VppParams& vpp, milp::MilpSolver& solver) {
    ScenarioSet one;
    one.dt_hours = vpp.dt_hours;
    one.scenarios = {scenario};
    one.probabilities = {1.0};
    RiskParams neutral{0.0, 0.5};
    detail::VppVarRefs refs;
    milp::MilpModel m = detail::build_vpp_model(one, vpp, neutral, refs, &z);
    milp::MilpSolution sol = solver.solve(m, milp::kInf, 1e-9);
    if (sol.status == milp::SolveStatus::Infeasible)
        throw Error("recourse infeasible: intraday caps do not cover this scenario");
    require(sol.has_solution(), "recourse solve failed");

    const auto& sr = refs.scen[0];
    const int T = vpp.horizon;
    RecourseSolution r;
    r.cost = sol.value(sr.cost);
    auto grab = [&](const std::vector<int>& ids) {
        std::vector<double> v(ids.size());
        for (std::size_t k = 0; k < ids.size(); ++k)
            v[k] = std::max(0.0, sol.value(ids[k])); // clamp solver noise at zero
        return v;
    };
    r.intraday_up = grab(sr.up);
    r.intraday_down = grab(sr.down);
    r.charge = grab(sr.charge);
    r.discharge = grab(sr.discharge);
    r.curtail = grab(sr.curtail);
    r.soc.resize(std::size_t(T) + 1);
    r.soc[0] = vpp.soc_init;
    for (int t = 0; t < T; ++t) r.soc[std::size_t(t) + 1] = sol.value(sr.soc[std::size_t(t)]);
    r.charge_state.resize(std::size_t(T));
    r.trade_state.resize(std::size_t(T));
    for (int t = 0; t < T; ++t) {
        r.charge_state[std::size_t(t)] = sol.value(sr.d_es[std::size_t(t)]) > 0.5 ? 1 : 0;
        r.trade_state[std::size_t(t)] = sol.value(sr.d_tr[std::size_t(t)]) > 0.5 ? 1 : 0;
        // the binary states pin the off side of each complementarity pair
        if (r.charge_state[std::size_t(t)] == 1) r.charge[std::size_t(t)] = 0.0;
        else r.discharge[std::size_t(t)] = 0.0;
        if (r.trade_state[std::size_t(t)] == 1) r.intraday_down[std::size_t(t)] = 0.0;
        else r.intraday_up[std::size_t(t)] = 0.0;
    }
    detail::check_recourse_feasibility(r, scenario, vpp, z);
    return r;
}

// F(z, xi) at fixed z: per-scenario recourse costs, projected and decomposed.
inline std::pair<Projection, RiskDecomposition> validate_decision(
    const FirstStage& z, const ScenarioSet& set, const VppParams& vpp, const RiskParams& risk,
    milp::MilpSolver& solver, int threads = 0) {
    const std::size_t n = set.size();
    std::vector<double> costs(n, 0.0);
    const int nthreads =
        threads > 0 ? threads : int(std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            costs[i] = solve_recourse(z, set.scenarios[i], vpp, solver).cost;
        }
    };
    if (nthreads <= 1 || n <= 1) {
        worker();
    } else {
        for (int k = 0; k < std::min<int>(nthreads, int(n)); ++k)
            futs.push_back(std::async(std::launch::async, worker));
        for (auto& f : futs) f.get();
    }
    Projection proj = project(costs, set.probabilities, risk.alpha);
    RiskDecomposition dec = evaluate_objective(proj, risk);
    return {std::move(proj), dec};
}

// Solve the full SBSO-CVaR offering problem on a (possibly reduced) weighted
// scenario set.
inline FullSolveResult solve_full(const ScenarioSet& set, const VppParams& vpp,
                                  const RiskParams& risk, milp::MilpSolver& solver,
                                  double time_limit_s = milp::kInf, double rel_gap = 1e-8) {
    detail::VppVarRefs refs;
    milp::MilpModel m = detail::build_vpp_model(set, vpp, risk, refs);
    milp::MilpSolution sol = solver.solve(m, time_limit_s, rel_gap);
    require(sol.has_solution(), "full solve failed: " + std::string(milp::to_string(sol.status)));

    FullSolveResult out;
    out.status = sol.status;
    out.gap = sol.gap;
    out.objective = sol.objective;
    out.decision.trade_kw.resize(std::size_t(vpp.horizon));
    for (int t = 0; t < vpp.horizon; ++t)
        out.decision.trade_kw[std::size_t(t)] = sol.value(refs.trade[std::size_t(t)]);
    out.per_scenario_costs.resize(set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        out.per_scenario_costs[i] = sol.value(refs.scen[i].cost);
    out.var_value = project(out.per_scenario_costs, set.probabilities, risk.alpha).var_value;
    return out;
}

inline nlohmann::json full_result_to_json(const FullSolveResult& r) {
    return nlohmann::json{{"objective", r.objective},
                          {"var_value", r.var_value},
                          {"status", milp::to_string(r.status)},
                          {"gap", r.gap},
                          {"trade_kw", r.decision.trade_kw},
                          {"per_scenario_costs", r.per_scenario_costs}};
}

} // namespace cvarsr
