#pragma once

// Text formats: dataset and margin CSV files, the key = value config file,
// and the plan record.

#include <aslip/harness.hpp>
#include <aslip/mlp.hpp>
#include <aslip/planner.hpp>
#include <aslip/sampling.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aslip {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& context) {
    const std::string t = trim(s);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw std::runtime_error(context + ": bad number '" + s + "'");
    return v;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return is;
}

}  // namespace detail

inline constexpr const char* kDatasetHeader = "y,xdot,alpha,dl,tag,dx_next,y_next,xdot_next";
inline constexpr const char* kMarginHeader = "y,xdot,alpha,dl,margin";
inline constexpr const char* kSweepHeader = "epsilon,accuracy,inclusion";
inline constexpr const char* kAblationHeader = "horizon,objective,margin,n,infeasible,invalid,valid,mean_time_s";

inline void write_dataset(std::ostream& os, std::span<const StepRecord> records) {
    os << kDatasetHeader << '\n';
    for (const auto& r : records) {
        for (double v : r.point) os << format_double(v) << ',';
        os << to_string(r.tag) << ',';
        if (r.next) os << format_double(r.next->dx) << ',' << format_double(r.next->y) << ',' << format_double(r.next->xdot);
        else os << ",,";
        os << '\n';
    }
}

inline std::vector<StepRecord> read_dataset(std::istream& is, const std::string& name = "dataset") {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != kDatasetHeader)
        throw std::runtime_error(name + ": expected header '" + kDatasetHeader + "'");
    std::vector<StepRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string ctx = name + ":" + std::to_string(lineno);
        const auto f = detail::split(detail::trim(line), ',');
        if (f.size() != 8) throw std::runtime_error(ctx + ": expected 8 fields");
        StepRecord r;
        for (std::size_t i = 0; i < 4; ++i) r.point[i] = detail::parse_double(f[i], ctx);
        r.tag = step_tag_from_string(f[4]);
        if (r.tag == StepTag::Valid)
            r.next = NextRecord{detail::parse_double(f[5], ctx), detail::parse_double(f[6], ctx),
                                detail::parse_double(f[7], ctx)};
        else if (!f[5].empty() || !f[6].empty() || !f[7].empty())
            throw std::runtime_error(ctx + ": failed step must have empty next columns");
        out.push_back(r);
    }
    return out;
}

inline void write_margins(std::ostream& os, std::span<const MarginSample> samples) {
    os << kMarginHeader << '\n';
    for (const auto& s : samples) {
        for (double v : s.point) os << format_double(v) << ',';
        os << format_double(s.margin) << '\n';
    }
}

inline std::vector<MarginSample> read_margins(std::istream& is, const std::string& name = "margins") {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != kMarginHeader)
        throw std::runtime_error(name + ": expected header '" + kMarginHeader + "'");
    std::vector<MarginSample> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string ctx = name + ":" + std::to_string(lineno);
        const auto f = detail::split(detail::trim(line), ',');
        if (f.size() != 5) throw std::runtime_error(ctx + ": expected 5 fields");
        MarginSample s;
        for (std::size_t i = 0; i < 4; ++i) s.point[i] = detail::parse_double(f[i], ctx);
        s.margin = detail::parse_double(f[4], ctx);
        out.push_back(s);
    }
    return out;
}

inline void write_sweep(std::ostream& os, std::span<const SweepPoint> points) {
    os << kSweepHeader << '\n';
    for (const auto& p : points)
        os << format_double(p.epsilon) << ',' << (p.accuracy ? format_double(*p.accuracy) : std::string()) << ','
           << format_double(p.inclusion) << '\n';
}

inline void write_ablation_row(std::ostream& os, const AblationCell& c) {
    os << c.horizon << ',' << (c.objective_on ? "on" : "off") << ',' << (c.margin_on ? "on" : "off") << ',' << c.n
       << ',' << c.declared_infeasible << ',' << c.invalid_solution << ',' << c.valid_solution << ','
       << format_double(c.mean_time) << '\n';
}

// ---------------------------------------------------------------------------
// Config file: one `key = value` per line, '#' starts a comment. Vector
// values are comma-separated.

struct Config {
    double stiffness = 20.0;
    double damping_ratio = 0.1;
    double mu = 0.5;
    Bounds bounds;
    std::array<double, 4> metric_weights{6.25, 0.250, 0.309, 2.50};
    TrainConfig train;
    std::vector<std::size_t> hidden{64, 64};
    double heldout_fraction = 0.2;
    SolverConfig solver;
    ObjectiveWeights objective_weights;
    double epsilon = 0.05;

    ModelParams params() const { return ModelParams(stiffness, damping_ratio, mu); }
    Metric metric() const { return Metric(metric_weights); }
};

inline Config parse_config(std::istream& is, const std::string& name = "config") {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string ctx = name + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(ctx + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto num = [&] { return detail::parse_double(val, ctx); };
        auto count = [&] {
            const double v = num();
            if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
                throw std::runtime_error(ctx + ": '" + key + "' must be a nonnegative integer");
            return static_cast<std::size_t>(v);
        };
        auto vec4 = [&] {
            const auto f = detail::split(val, ',');
            if (f.size() != 4) throw std::runtime_error(ctx + ": '" + key + "' needs 4 comma-separated values");
            std::array<double, 4> out;
            for (std::size_t i = 0; i < 4; ++i) out[i] = detail::parse_double(f[i], ctx);
            return out;
        };

        if (key == "stiffness") c.stiffness = num();
        else if (key == "damping_ratio") c.damping_ratio = num();
        else if (key == "mu") c.mu = num();
        else if (key == "bounds_lower") c.bounds.lower = vec4();
        else if (key == "bounds_upper") c.bounds.upper = vec4();
        else if (key == "metric_weights") c.metric_weights = vec4();
        else if (key == "learning_rate") c.train.learning_rate = num();
        else if (key == "iterations") c.train.iterations = count();
        else if (key == "batch_size") c.train.batch_size = count();
        else if (key == "eval_every") c.train.eval_every = count();
        else if (key == "heldout_fraction") c.heldout_fraction = num();
        else if (key == "hidden") {
            c.hidden.clear();
            for (const auto& f : detail::split(val, ',')) {
                const double v = detail::parse_double(f, ctx);
                if (!(v >= 1)) throw std::runtime_error(ctx + ": hidden sizes must be >= 1");
                c.hidden.push_back(static_cast<std::size_t>(v));
            }
        } else if (key == "epsilon") c.epsilon = num();
        else if (key == "objective_weights") {
            const auto f = detail::split(val, ',');
            if (f.size() != 2) throw std::runtime_error(ctx + ": objective_weights needs 2 values");
            c.objective_weights = {detail::parse_double(f[0], ctx), detail::parse_double(f[1], ctx)};
        } else if (key == "feasibility_tol") c.solver.feasibility_tol = num();
        else if (key == "stationarity_tol") c.solver.stationarity_tol = num();
        else if (key == "max_outer_iterations") c.solver.max_outer_iterations = count();
        else if (key == "max_inner_iterations") c.solver.max_inner_iterations = count();
        else if (key == "rho_init") c.solver.rho_init = num();
        else if (key == "rho_max") c.solver.rho_max = num();
        else if (key == "inner_ftol") c.solver.inner_ftol = num();
        else throw std::runtime_error(ctx + ": unknown key '" + key + "'");
    }
    c.params();  // validates model constants
    c.bounds.validate();
    c.metric();
    if (!(c.heldout_fraction > 0.0 && c.heldout_fraction < 1.0))
        throw std::runtime_error(name + ": heldout_fraction must be in (0, 1)");
    return c;
}

inline Config load_config(const std::string& path) {
    auto is = detail::open_in(path);
    return parse_config(is, path);
}

// ---------------------------------------------------------------------------
// Plan record

inline void write_plan(std::ostream& os, const PlanTask& task, const PlanResult& r) {
    os << "status " << to_string(r.status) << '\n';
    os << "horizon " << task.horizon << '\n';
    os << "objective " << (task.use_objective ? "on" : "off") << '\n';
    os << "margin " << (task.use_margin ? "on" : "off") << '\n';
    os << "epsilon " << format_double(task.epsilon) << '\n';
    os << "s0 " << format_double(task.s0.y) << ' ' << format_double(task.s0.xdot) << '\n';
    os << "goal " << format_double(task.s_goal.y) << ' ' << format_double(task.s_goal.xdot) << '\n';
    os << "objective_value " << format_double(r.objective) << '\n';
    os << "max_violation " << format_double(r.max_violation) << '\n';
    os << "kkt_residual " << format_double(r.kkt_residual) << '\n';
    os << "iterations " << r.iterations << '\n';
    os << "outer_iterations " << r.outer_iterations << '\n';
    os << "predicted_displacement " << format_double(r.predicted_displacement) << '\n';
    os << "# step n: y xdot alpha delta_l margin dx (state s_n and action a_n)\n";
    for (std::size_t n = 0; n < r.actions.size(); ++n) {
        const ApexState s = n == 0 ? task.s0 : r.states[n - 1];
        os << "step " << n << ' ' << format_double(s.y) << ' ' << format_double(s.xdot) << ' '
           << format_double(r.actions[n].alpha) << ' ' << format_double(r.actions[n].delta_l) << ' '
           << format_double(r.margins[n]) << ' ' << format_double(r.predicted_dx[n]) << '\n';
    }
    if (!r.states.empty())
        os << "final " << format_double(r.states.back().y) << ' ' << format_double(r.states.back().xdot) << '\n';
    os << "setup_time_s " << format_double(r.setup_time) << '\n';
    os << "solve_time_s " << format_double(r.wall_time) << '\n';
}

struct PlanFile {
    std::string status;
    ApexState s0, goal;
    std::vector<Action> actions;
};

inline PlanFile read_plan(std::istream& is, const std::string& name = "plan") {
    PlanFile p;
    bool have_s0 = false;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        if (key == "status") ls >> p.status;
        else if (key == "s0") have_s0 = static_cast<bool>(ls >> p.s0.y >> p.s0.xdot);
        else if (key == "goal") ls >> p.goal.y >> p.goal.xdot;
        else if (key == "step") {
            std::size_t n;
            double y, v, a, d;
            if (!(ls >> n >> y >> v >> a >> d) || n != p.actions.size())
                throw std::runtime_error(name + ": malformed step line");
            p.actions.push_back({a, d});
        }
    }
    if (!have_s0 || p.actions.empty()) throw std::runtime_error(name + ": missing s0 or step lines");
    return p;
}

}  // namespace aslip
