// Command-line driver for the footstep-planning pipeline.

#include <aslip/harness.hpp>
#include <aslip/io.hpp>
#include <aslip/pipeline.hpp>
#include <aslip/svg.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace aslip;

constexpr std::uint64_t kSweepStream = 4;

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string config;
    unsigned threads = default_thread_count();

    Config load() const { return config.empty() ? Config{} : load_config(config); }

    std::uint64_t require_seed(const std::string& cmd) const {
        if (!seed) throw std::runtime_error(cmd + ": --seed is required for randomized stages");
        return *seed;
    }
};

void add_common(CLI::App* app, Common& c, bool out_required) {
    app->add_option("--seed", c.seed, "random seed");
    auto* o = app->add_option("--out", c.out, "output file");
    if (out_required) o->required();
    app->add_option("--config", c.config, "config file (key = value lines)");
    app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::is_regular_file(path)) throw std::runtime_error(what + " '" + path + "' not found");
}

std::vector<StepRecord> load_dataset(const std::string& path) {
    require_file(path, "dataset file");
    auto is = detail::open_in(path);
    return read_dataset(is, path);
}

std::vector<MarginSample> load_margin_file(const std::string& path) {
    require_file(path, "margin file");
    auto is = detail::open_in(path);
    return read_margins(is, path);
}

Mlp load_net(const std::string& path, const std::string& what) {
    require_file(path, what);
    try {
        return load_mlp(path);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

bool on_off(const std::string& v) { return v == "on"; }

ApexState apex_from(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

std::vector<double> default_eps_grid() {
    std::vector<double> g;
    for (int i = -10; i <= 30; ++i) g.push_back(i / 200.0);
    return g;
}

void write_loss_history(const std::string& path, const TrainResult& r) {
    auto os = detail::open_out(path);
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < r.loss_history.size(); ++i) os << i << ',' << format_double(r.loss_history[i]) << '\n';
}

void report_training(const char* name, const TrainResult& r) {
    std::printf("%s: %zu iterations, best held-out RMSE %s at iteration %zu\n", name, r.loss_history.size(),
                r.best_heldout_rmse ? format_double(*r.best_heldout_rmse).c_str() : "n/a", r.best_iteration);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aslip: failure-aware footstep planning for the actuated SLIP"};
    app.require_subcommand(1);

    // sample
    Common sample_c;
    std::size_t sample_n = 200000;
    std::string sample_kind = "dataset", sample_src;
    auto* sample = app.add_subcommand("sample", "label random state-action samples by simulation");
    add_common(sample, sample_c, true);
    sample->add_option("--n", sample_n, "number of samples")->check(CLI::PositiveNumber);
    sample->add_option("--kind", sample_kind, "dataset | margin")->check(CLI::IsMember({"dataset", "margin"}));
    sample->add_option("--dataset", sample_src, "dataset file whose points build the margin trees");

    // train-map / train-margin
    Common map_c, mar_c;
    std::string map_data, mar_data, map_loss, mar_loss, mar_contour;
    std::optional<std::size_t> map_iters, mar_iters;
    std::vector<double> mar_slice{1.0, 0.0};
    auto* train_map = app.add_subcommand("train-map", "train the return-map network on valid records");
    add_common(train_map, map_c, true);
    train_map->add_option("--data", map_data, "dataset file")->required();
    train_map->add_option("--iterations", map_iters, "override training iterations");
    train_map->add_option("--loss-out", map_loss, "write per-iteration loss CSV");
    auto* train_mar = app.add_subcommand("train-margin", "train the failure-margin network");
    add_common(train_mar, mar_c, true);
    train_mar->add_option("--data", mar_data, "margin file")->required();
    train_mar->add_option("--iterations", mar_iters, "override training iterations");
    train_mar->add_option("--loss-out", mar_loss, "write per-iteration loss CSV");
    train_mar->add_option("--contour-out", mar_contour, "write predicted margin over an (alpha, dl) grid");
    train_mar->add_option("--slice", mar_slice, "apex state y,xdot for --contour-out")->delimiter(',')->expected(2);

    // sweep-threshold
    Common sw_c;
    std::string sw_net, sw_data, sw_svg;
    std::size_t sw_n = 100000;
    std::vector<double> sw_eps;
    auto* sweep = app.add_subcommand("sweep-threshold", "accuracy and inclusion of the margin threshold");
    add_common(sweep, sw_c, true);
    sweep->add_option("--margin-net", sw_net, "margin network weights")->required();
    sweep->add_option("--data", sw_data, "fresh dataset file (otherwise sampled with --n and --seed)");
    sweep->add_option("--n", sw_n, "fresh samples when --data is absent")->check(CLI::PositiveNumber);
    sweep->add_option("--eps", sw_eps, "threshold grid")->delimiter(',');
    sweep->add_option("--svg", sw_svg, "write a line plot");

    // plan
    Common plan_c;
    std::string plan_map, plan_margin, plan_obj = "on", plan_mar = "on";
    std::vector<double> plan_s0, plan_goal;
    std::size_t plan_h = 3;
    std::optional<double> plan_eps;
    auto* plan = app.add_subcommand("plan", "solve one footstep-planning problem");
    add_common(plan, plan_c, true);
    plan->add_option("--map", plan_map, "return-map network weights")->required();
    plan->add_option("--margin-net", plan_margin, "margin network weights")->required();
    plan->add_option("--s0", plan_s0, "initial apex y,xdot")->delimiter(',')->expected(2)->required();
    plan->add_option("--goal", plan_goal, "goal apex y,xdot")->delimiter(',')->expected(2)->required();
    plan->add_option("--horizon", plan_h, "number of steps")->check(CLI::PositiveNumber);
    plan->add_option("--objective", plan_obj, "on | off")->check(CLI::IsMember({"on", "off"}));
    plan->add_option("--margin", plan_mar, "on | off")->check(CLI::IsMember({"on", "off"}));
    plan->add_option("--epsilon", plan_eps, "margin threshold");

    // rollout
    Common ro_c;
    std::string ro_plan, ro_actions;
    std::vector<double> ro_s0, ro_goal;
    auto* roll = app.add_subcommand("rollout", "simulate actions on the full model");
    add_common(roll, ro_c, true);
    roll->add_option("--plan", ro_plan, "plan file");
    roll->add_option("--s0", ro_s0, "initial apex y,xdot")->delimiter(',')->expected(2);
    roll->add_option("--goal", ro_goal, "goal apex y,xdot")->delimiter(',')->expected(2);
    roll->add_option("--actions", ro_actions, "alpha,dl;alpha,dl;...");

    // ablate
    Common ab_c;
    std::string ab_map, ab_margin, ab_mar = "both", ab_obj = "off", ab_tasks_out;
    std::size_t ab_tasks = 200;
    std::vector<std::size_t> ab_h{3};
    auto* ablate = app.add_subcommand("ablate", "planner outcome statistics over random tasks");
    add_common(ablate, ab_c, true);
    ablate->add_option("--map", ab_map, "return-map network weights")->required();
    ablate->add_option("--margin-net", ab_margin, "margin network weights")->required();
    ablate->add_option("--tasks", ab_tasks, "tasks per cell")->check(CLI::PositiveNumber);
    ablate->add_option("--horizon", ab_h, "horizons")->delimiter(',');
    ablate->add_option("--margin", ab_mar, "on | off | both")->check(CLI::IsMember({"on", "off", "both"}));
    ablate->add_option("--objective", ab_obj, "on | off | both")->check(CLI::IsMember({"on", "off", "both"}));
    ablate->add_option("--tasks-out", ab_tasks_out, "per-task outcome CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sample) {
            const Config cfg = sample_c.load();
            const auto seed = sample_c.require_seed("sample");
            if (sample_kind == "dataset") {
                const auto recs = sample_dataset(sample_n, cfg.bounds, cfg.params(), seed, sample_c.threads);
                auto os = detail::open_out(sample_c.out);
                write_dataset(os, recs);
                std::size_t v = 0;
                for (const auto& r : recs) v += r.valid();
                std::printf("wrote %zu records (%zu valid) to %s\n", recs.size(), v, sample_c.out.c_str());
            } else {
                if (sample_src.empty()) throw std::runtime_error("sample --kind margin needs --dataset");
                const auto split = split_by_validity(load_dataset(sample_src));
                if (split.valid.empty() || split.invalid.empty())
                    throw std::runtime_error(sample_src + ": needs both valid and failed records");
                const SATree vt(split.valid, cfg.metric()), it(split.invalid, cfg.metric());
                const auto m = generate_margin_dataset(sample_n, cfg.bounds, vt, it, cfg.params(), seed,
                                                       sample_c.threads);
                auto os = detail::open_out(sample_c.out);
                write_margins(os, m);
                std::printf("wrote %zu margin samples to %s\n", m.size(), sample_c.out.c_str());
            }
        } else if (*train_map) {
            Config cfg = map_c.load();
            cfg.train.seed = map_c.require_seed("train-map");
            if (map_iters) cfg.train.iterations = *map_iters;
            cfg.train.loss_weights = return_map_loss_weights();
            const auto recs = load_dataset(map_data);
            const TrainResult r = train_return_map(recs, cfg.hidden, cfg.train, cfg.heldout_fraction);
            save_mlp(r.net, map_c.out);
            if (!map_loss.empty()) write_loss_history(map_loss, r);
            report_training("return map", r);
        } else if (*train_mar) {
            Config cfg = mar_c.load();
            cfg.train.seed = mar_c.require_seed("train-margin");
            if (mar_iters) cfg.train.iterations = *mar_iters;
            cfg.train.loss_weights.clear();
            const auto samples = load_margin_file(mar_data);
            const TrainResult r = train_margin(samples, cfg.hidden, cfg.train, cfg.heldout_fraction);
            save_mlp(r.net, mar_c.out);
            if (!mar_loss.empty()) write_loss_history(mar_loss, r);
            report_training("margin", r);
            if (!mar_contour.empty()) {
                std::vector<MarginSample> grid;
                constexpr int na = 61, nd = 41;
                for (int i = 0; i < na; ++i)
                    for (int j = 0; j < nd; ++j) {
                        const double a = cfg.bounds.lower[2] + (cfg.bounds.upper[2] - cfg.bounds.lower[2]) * i / (na - 1);
                        const double d = cfg.bounds.lower[3] + (cfg.bounds.upper[3] - cfg.bounds.lower[3]) * j / (nd - 1);
                        const SAPoint p{mar_slice[0], mar_slice[1], a, d};
                        Eigen::Vector4d in(p[0], p[1], p[2], p[3]);
                        grid.push_back({p, r.net.forward(in)[0]});
                    }
                auto os = detail::open_out(mar_contour);
                write_margins(os, grid);
            }
        } else if (*sweep) {
            const Config cfg = sw_c.load();
            const Mlp net = load_net(sw_net, "margin network");
            std::vector<StepRecord> recs;
            if (!sw_data.empty()) {
                recs = load_dataset(sw_data);
            } else {
                const auto seed = sw_c.require_seed("sweep-threshold");
                const CounterRng rng(seed, kSweepStream);
                recs.resize(sw_n);
                const ModelParams params = cfg.params();
                parallel_for(
                    sw_n, [&](std::size_t i) { recs[i] = label_point(uniform_point(rng, i, cfg.bounds), params); },
                    sw_c.threads);
            }
            const auto grid = sw_eps.empty() ? default_eps_grid() : sw_eps;
            const auto pts = sweep_threshold(net, std::span<const StepRecord>(recs), grid);
            auto os = detail::open_out(sw_c.out);
            write_sweep(os, pts);
            if (!sw_svg.empty()) {
                Series acc{"accuracy", "#1f77b4", {}, {}}, inc{"inclusion", "#d62728", {}, {}};
                for (const auto& p : pts) {
                    acc.x.push_back(p.epsilon);
                    acc.y.push_back(p.accuracy.value_or(std::numeric_limits<double>::quiet_NaN()));
                    inc.x.push_back(p.epsilon);
                    inc.y.push_back(p.inclusion);
                }
                PlotSpec spec{"Margin threshold sweep", "threshold epsilon", "fraction"};
                spec.y_min = 0.0;
                spec.y_max = 1.0;
                auto svg = detail::open_out(sw_svg);
                write_line_plot(svg, spec, {acc, inc});
            }
            for (const auto& p : pts)
                if (std::abs(p.epsilon - cfg.epsilon) < 1e-12)
                    std::printf("epsilon %g: accuracy %s inclusion %.4f\n", p.epsilon,
                                p.accuracy ? format_double(*p.accuracy).c_str() : "n/a", p.inclusion);
        } else if (*plan) {
            const Config cfg = plan_c.load();
            const Mlp map = load_net(plan_map, "return-map network");
            const Mlp mar = load_net(plan_margin, "margin network");
            PlanTask task;
            task.s0 = apex_from(plan_s0);
            task.s_goal = apex_from(plan_goal);
            task.horizon = plan_h;
            task.use_objective = on_off(plan_obj);
            task.use_margin = on_off(plan_mar);
            task.epsilon = plan_eps.value_or(cfg.epsilon);
            const PlanResult r = solve(task, map, mar, cfg.bounds, cfg.solver, cfg.objective_weights);
            auto os = detail::open_out(plan_c.out);
            write_plan(os, task, r);
            std::printf("%s in %zu outer iterations, violation %.3g\n", std::string(to_string(r.status)).c_str(),
                        r.outer_iterations, r.max_violation);
        } else if (*roll) {
            const Config cfg = ro_c.load();
            ApexState s0;
            std::optional<ApexState> goal;
            std::vector<Action> actions;
            if (!ro_plan.empty()) {
                require_file(ro_plan, "plan file");
                auto is = detail::open_in(ro_plan);
                const PlanFile pf = read_plan(is, ro_plan);
                s0 = pf.s0;
                goal = pf.goal;
                actions = pf.actions;
            } else {
                if (ro_s0.empty() || ro_actions.empty()) throw std::runtime_error("rollout: give --plan or --s0 and --actions");
                s0 = apex_from(ro_s0);
                std::istringstream as(ro_actions);
                for (std::string tok; std::getline(as, tok, ';');) {
                    const auto f = detail::split(tok, ',');
                    if (f.size() != 2) throw std::runtime_error("rollout: action '" + tok + "' must be alpha,dl");
                    actions.push_back({detail::parse_double(f[0], "--actions"), detail::parse_double(f[1], "--actions")});
                }
            }
            if (!ro_goal.empty()) goal = apex_from(ro_goal);
            const RolloutReport rep = rollout(s0, actions, cfg.params(), goal);
            auto os = detail::open_out(ro_c.out);
            os << "all_valid " << (rep.all_valid ? "true" : "false") << '\n';
            for (std::size_t n = 0; n < rep.tags.size(); ++n) {
                os << "step " << n << ' ' << to_string(rep.tags[n]);
                if (n < rep.states.size())
                    os << ' ' << format_double(rep.states[n].y) << ' ' << format_double(rep.states[n].xdot) << ' '
                       << format_double(rep.displacements[n]);
                os << '\n';
            }
            if (rep.goal_error) os << "goal_error " << format_double(*rep.goal_error) << '\n';
            std::printf("rollout: %s after %zu step(s)\n", rep.all_valid ? "all valid" : "failed", rep.tags.size());
        } else if (*ablate) {
            const Config cfg = ab_c.load();
            const auto seed = ab_c.require_seed("ablate");
            const Mlp map = load_net(ab_map, "return-map network");
            const Mlp mar = load_net(ab_margin, "margin network");
            const auto tasks = make_tasks(ab_tasks, cfg.bounds, seed);
            auto flags = [](const std::string& v) {
                return v == "both" ? std::vector<bool>{false, true} : std::vector<bool>{v == "on"};
            };
            auto os = detail::open_out(ab_c.out);
            os << kAblationHeader << '\n';
            std::optional<std::ofstream> tos;
            if (!ab_tasks_out.empty()) {
                tos = detail::open_out(ab_tasks_out);
                *tos << "horizon,objective,margin,task,s0_y,s0_xdot,goal_y,goal_xdot,status,outcome,failed_tag,"
                        "goal_error\n";
            }
            for (std::size_t h : ab_h)
                for (bool obj : flags(ab_obj))
                    for (bool m : flags(ab_mar)) {
                        const AblationSpec spec{h, obj, m, cfg.epsilon};
                        const AblationRun run = run_ablation(tasks, spec, map, mar, cfg.bounds, cfg.params(),
                                                             cfg.solver, ab_c.threads);
                        write_ablation_row(os, run.cell);
                        const auto& c = run.cell;
                        std::printf("h=%zu objective=%s margin=%s: infeasible %.1f%% invalid %.1f%% valid %.1f%% "
                                    "solve %.4g s setup %.4g s\n",
                                    h, obj ? "on" : "off", m ? "on" : "off", 100 * c.fraction(c.declared_infeasible),
                                    100 * c.fraction(c.invalid_solution), 100 * c.fraction(c.valid_solution),
                                    c.mean_time, c.mean_setup_time);
                        if (tos) {
                            for (std::size_t i = 0; i < run.tasks.size(); ++i) {
                                const auto& t = run.tasks[i];
                                std::string failed, gerr;
                                if (t.rollout && !t.rollout->all_valid) failed = to_string(t.rollout->tags.back());
                                if (t.rollout && t.rollout->goal_error) gerr = format_double(*t.rollout->goal_error);
                                *tos << h << ',' << (obj ? "on" : "off") << ',' << (m ? "on" : "off") << ',' << i
                                     << ',' << format_double(tasks[i].s0.y) << ',' << format_double(tasks[i].s0.xdot)
                                     << ',' << format_double(tasks[i].s_goal.y) << ','
                                     << format_double(tasks[i].s_goal.xdot) << ',' << to_string(t.plan.status) << ','
                                     << to_string(t.outcome) << ',' << failed << ',' << gerr << '\n';
                            }
                        }
                    }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
