#pragma once

// Experiment drivers: ground-truth rollouts of planned actions, the
// margin-threshold sweep, and the margin/objective ablation over random
// planning tasks.

#include <aslip/dynamics.hpp>
#include <aslip/mlp.hpp>
#include <aslip/parallel.hpp>
#include <aslip/planner.hpp>
#include <aslip/rng.hpp>
#include <aslip/sampling.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace aslip {

struct RolloutReport {
    std::vector<StepTag> tags;          // one per attempted step; stops at first failure
    std::vector<ApexState> states;      // realized apex after each valid step
    std::vector<double> displacements;  // realized dx per valid step
    std::optional<double> goal_error;   // only when all steps valid and a goal was given
    bool all_valid = false;
};

/// Weighted distance between apex states, using the state part of the
/// default state-action metric.
inline double state_distance(const ApexState& a, const ApexState& b) {
    const Metric m = default_metric();
    const double dy = a.y - b.y, dv = a.xdot - b.xdot;
    return std::sqrt(m.weights[0] * dy * dy + m.weights[1] * dv * dv);
}

inline RolloutReport rollout(const ApexState& s0, std::span<const Action> actions, const ModelParams& params,
                             const std::optional<ApexState>& goal = std::nullopt) {
    if (actions.empty()) throw std::invalid_argument("rollout: need at least one action");
    RolloutReport r;
    ApexState s = s0;
    for (const Action& a : actions) {
        const StepOutcome o = simulate_step(s, a, params);
        r.tags.push_back(o.tag);
        if (!o.valid()) return r;
        s = o.next->apex;
        r.states.push_back(s);
        r.displacements.push_back(o.next->dx);
    }
    r.all_valid = true;
    if (goal) r.goal_error = state_distance(s, *goal);
    return r;
}

struct SweepPoint {
    double epsilon = 0.0;
    std::optional<double> accuracy;  // P(valid | M >= eps); absent when nothing passes
    double inclusion = 0.0;          // P(M >= eps | valid)
};

/// Threshold sweep over predicted margins and ground-truth validity flags.
inline std::vector<SweepPoint> sweep_threshold(std::span<const double> predicted, std::span<const char> truly_valid,
                                               std::span<const double> eps_grid) {
    if (predicted.size() != truly_valid.size()) throw std::invalid_argument("sweep_threshold: size mismatch");
    std::size_t n_valid = 0;
    for (char v : truly_valid) n_valid += v != 0;
    std::vector<SweepPoint> out;
    for (double eps : eps_grid) {
        std::size_t passed = 0, passed_valid = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (predicted[i] >= eps) {
                ++passed;
                passed_valid += truly_valid[i] != 0;
            }
        }
        SweepPoint p;
        p.epsilon = eps;
        if (passed) p.accuracy = static_cast<double>(passed_valid) / static_cast<double>(passed);
        p.inclusion = n_valid ? static_cast<double>(passed_valid) / static_cast<double>(n_valid) : 0.0;
        out.push_back(p);
    }
    return out;
}

namespace detail {
template <class Sample, class Truth>
std::vector<SweepPoint> sweep_samples(const Mlp& margin_net, std::span<const Sample> samples,
                                      std::span<const double> eps_grid, Truth truth) {
    if (margin_net.input_size() != 4 || margin_net.output_size() != 1)
        throw std::invalid_argument("sweep_threshold: margin network must be 4 -> 1");
    MatrixXd in(4, static_cast<Eigen::Index>(samples.size()));
    std::vector<char> valid(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t d = 0; d < 4; ++d)
            in(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = samples[i].point[d];
        valid[i] = truth(samples[i]);
    }
    const MatrixXd pred = margin_net.forward_batch(in);
    const std::vector<double> p(pred.data(), pred.data() + pred.size());
    return sweep_threshold(p, valid, eps_grid);
}
}  // namespace detail

/// Sweep on fresh margin samples; truth is the label's sign (positive iff
/// the simulated step is valid).
inline std::vector<SweepPoint> sweep_threshold(const Mlp& margin_net, std::span<const MarginSample> samples,
                                               std::span<const double> eps_grid) {
    return detail::sweep_samples(margin_net, samples, eps_grid, [](const MarginSample& s) { return s.margin > 0.0; });
}

/// Sweep on fresh simulated records; truth is the step tag.
inline std::vector<SweepPoint> sweep_threshold(const Mlp& margin_net, std::span<const StepRecord> records,
                                               std::span<const double> eps_grid) {
    return detail::sweep_samples(margin_net, records, eps_grid, [](const StepRecord& r) { return r.valid(); });
}

struct StateTask {
    ApexState s0, s_goal;
};

inline constexpr std::uint64_t kTaskStream = 3;

/// Random (s0, s_goal) pairs uniform over the state box.
inline std::vector<StateTask> make_tasks(std::size_t n, const Bounds& bounds, std::uint64_t seed) {
    const CounterRng rng(seed, kTaskStream);
    std::vector<StateTask> tasks(n);
    for (std::size_t i = 0; i < n; ++i) {
        tasks[i].s0 = {rng.uniform(i, 0, bounds.lower[0], bounds.upper[0]),
                       rng.uniform(i, 1, bounds.lower[1], bounds.upper[1])};
        tasks[i].s_goal = {rng.uniform(i, 2, bounds.lower[0], bounds.upper[0]),
                           rng.uniform(i, 3, bounds.lower[1], bounds.upper[1])};
    }
    return tasks;
}

enum class TaskOutcome { DeclaredInfeasible, InvalidSolution, ValidSolution };

inline std::string_view to_string(TaskOutcome o) {
    switch (o) {
        case TaskOutcome::DeclaredInfeasible: return "infeasible";
        case TaskOutcome::InvalidSolution: return "invalid";
        case TaskOutcome::ValidSolution: return "valid";
    }
    return "?";
}

struct TaskResult {
    TaskOutcome outcome = TaskOutcome::DeclaredInfeasible;
    PlanResult plan;
    std::optional<RolloutReport> rollout;
};

inline TaskResult classify_task(const PlanTask& task, const Mlp& return_map, const Mlp& margin,
                                const Bounds& bounds, const ModelParams& params, const SolverConfig& cfg,
                                const ObjectiveWeights& h = {}) {
    TaskResult r;
    r.plan = solve(task, return_map, margin, bounds, cfg, h);
    if (r.plan.status != PlanStatus::Solved) {
        r.outcome = TaskOutcome::DeclaredInfeasible;
        return r;
    }
    r.rollout = rollout(task.s0, r.plan.actions, params, task.s_goal);
    r.outcome = r.rollout->all_valid ? TaskOutcome::ValidSolution : TaskOutcome::InvalidSolution;
    return r;
}

struct AblationSpec {
    std::size_t horizon = 3;
    bool objective_on = false;
    bool margin_on = true;
    double epsilon = 0.05;
};

struct AblationCell {
    std::size_t horizon = 3;
    bool objective_on = false;
    bool margin_on = true;
    std::size_t n = 0;
    std::size_t declared_infeasible = 0, invalid_solution = 0, valid_solution = 0;
    double mean_time = 0.0;        // solver seconds per task
    double mean_setup_time = 0.0;  // problem construction seconds per task

    double fraction(std::size_t count) const { return n ? static_cast<double>(count) / static_cast<double>(n) : 0.0; }
};

struct AblationRun {
    AblationCell cell;
    std::vector<TaskResult> tasks;  // in task-index order
};

inline AblationRun run_ablation(std::span<const StateTask> tasks, const AblationSpec& spec, const Mlp& return_map,
                                const Mlp& margin, const Bounds& bounds, const ModelParams& params,
                                const SolverConfig& cfg = {}, unsigned threads = default_thread_count()) {
    AblationRun run;
    run.tasks.resize(tasks.size());
    parallel_for(
        tasks.size(),
        [&](std::size_t i) {
            PlanTask t;
            t.s0 = tasks[i].s0;
            t.s_goal = tasks[i].s_goal;
            t.horizon = spec.horizon;
            t.use_objective = spec.objective_on;
            t.use_margin = spec.margin_on;
            t.epsilon = spec.epsilon;
            run.tasks[i] = classify_task(t, return_map, margin, bounds, params, cfg);
        },
        threads);

    AblationCell& c = run.cell;
    c.horizon = spec.horizon;
    c.objective_on = spec.objective_on;
    c.margin_on = spec.margin_on;
    c.n = tasks.size();
    for (const auto& r : run.tasks) {
        switch (r.outcome) {
            case TaskOutcome::DeclaredInfeasible: ++c.declared_infeasible; break;
            case TaskOutcome::InvalidSolution: ++c.invalid_solution; break;
            case TaskOutcome::ValidSolution: ++c.valid_solution; break;
        }
        c.mean_time += r.plan.wall_time;
        c.mean_setup_time += r.plan.setup_time;
    }
    if (c.n) {
        c.mean_time /= static_cast<double>(c.n);
        c.mean_setup_time /= static_cast<double>(c.n);
    }
    return run;
}

inline AblationRun run_ablation(std::size_t n_tasks, const AblationSpec& spec, const Mlp& return_map,
                                const Mlp& margin, const Bounds& bounds, const ModelParams& params,
                                std::uint64_t seed, const SolverConfig& cfg = {},
                                unsigned threads = default_thread_count()) {
    const auto tasks = make_tasks(n_tasks, bounds, seed);
    return run_ablation(tasks, spec, return_map, margin, bounds, params, cfg, threads);
}

}  // namespace aslip
