#include "cli_util.hpp"

#include <aslip/mlp.hpp>

#include <gtest/gtest.h>

#include <algorithm>

using namespace cli_test;
namespace fs = std::filesystem;

namespace {

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, SampleWritesHeaderAndRows) {
    const auto d = scratch_dir("sample");
    const auto r = run("sample --n 1000 --seed 7 --out '" + (d / "d.csv").string() + "'", d);
    ASSERT_EQ(r.status, 0) << r.err;
    const std::string text = read_file(d / "d.csv");
    EXPECT_EQ(line_count(text), 1001u);
    EXPECT_EQ(text.substr(0, text.find('\n')), "y,xdot,alpha,dl,tag,dx_next,y_next,xdot_next");
}

TEST(Cli, RandomizedStagesRequireSeed) {
    const auto d = scratch_dir("noseed");
    const auto r = run("sample --n 10 --out '" + (d / "d.csv").string() + "'", d);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("--seed"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(d / "d.csv"));
}

TEST(Cli, MissingWeightsFileNamesPath) {
    const auto d = scratch_dir("missing");
    const std::string missing = (d / "no_such_P.txt").string();
    const auto r = run("plan --map '" + missing + "' --margin-net '" + missing +
                           "' --s0 1.0,0.0 --goal 1.1,0.2 --out '" + (d / "plan.txt").string() + "'",
                       d);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST(Cli, WeightsVersionMismatchIsRejected) {
    const auto d = scratch_dir("version");
    {
        std::ofstream os(d / "P.txt");
        aslip::save_mlp(aslip::Mlp({4, 3}), os);
    }
    std::string text = read_file(d / "P.txt");
    text.replace(0, text.find('\n'), "aslip-mlp 99");
    std::ofstream(d / "P.txt") << text;
    const auto r = run("plan --map '" + (d / "P.txt").string() + "' --margin-net '" + (d / "P.txt").string() +
                           "' --s0 1.0,0.0 --goal 1.1,0.2 --out '" + (d / "plan.txt").string() + "'",
                       d);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("version"), std::string::npos) << r.err;
}

TEST(Cli, BadFlagsFail) {
    const auto d = scratch_dir("flags");
    EXPECT_NE(run("sample --bogus 1", d).status, 0);
    EXPECT_NE(run("frobnicate", d).status, 0);
    EXPECT_NE(run("", d).status, 0);
    EXPECT_NE(run("ablate --margin maybe --seed 1 --map a --margin-net b --out c", d).status, 0);
}

TEST(Cli, UnknownConfigKeyFails) {
    const auto d = scratch_dir("config");
    std::ofstream(d / "c.cfg") << "stiffnes = 20\n";
    const auto r = run("sample --n 10 --seed 1 --config '" + (d / "c.cfg").string() + "' --out '" +
                           (d / "d.csv").string() + "'",
                       d);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("stiffnes"), std::string::npos);
}

TEST(Cli, RolloutFromActions) {
    const auto d = scratch_dir("rollout");
    const auto r = run("rollout --s0 1.1,0 --actions '0,0;0.6,0' --out '" + (d / "r.txt").string() + "'", d);
    ASSERT_EQ(r.status, 0) << r.err;
    const std::string text = read_file(d / "r.txt");
    EXPECT_NE(text.find("all_valid false"), std::string::npos);
    EXPECT_NE(text.find("step 0 Valid"), std::string::npos);
    EXPECT_NE(text.find("step 1 Fail_"), std::string::npos);
}

TEST(Cli, SmallPipelineRunsAndIsDeterministic) {
    const auto d = scratch_dir("pipeline");
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path w = d / std::to_string(rep);
        fs::create_directories(w);
        auto p = [&](const char* f) { return "'" + (w / f).string() + "'"; };
        const std::string cfg = p("c.cfg");
        std::ofstream(w / "c.cfg") << "hidden = 16, 16\nbatch_size = 128\neval_every = 100\n";
        const std::string steps[] = {
            "sample --n 3000 --seed 3 --out " + p("d.csv"),
            "sample --kind margin --dataset " + p("d.csv") + " --n 1000 --seed 3 --out " + p("m.csv"),
            "train-map --config " + cfg + " --data " + p("d.csv") + " --iterations 300 --seed 3 --out " + p("P.txt"),
            "train-margin --config " + cfg + " --data " + p("m.csv") + " --iterations 300 --seed 3 --out " +
                p("M.txt") + " --contour-out " + p("contour.csv"),
            "sweep-threshold --margin-net " + p("M.txt") + " --n 1000 --seed 3 --out " + p("sweep.csv") +
                " --svg " + p("sweep.svg"),
            "plan --map " + p("P.txt") + " --margin-net " + p("M.txt") + " --s0 1.0,0.2 --goal 1.05,0.3 --out " +
                p("plan.txt"),
            "rollout --plan " + p("plan.txt") + " --out " + p("rollout.txt"),
            "ablate --map " + p("P.txt") + " --margin-net " + p("M.txt") +
                " --tasks 6 --horizon 3 --margin both --objective off --seed 3 --out " + p("ablate.csv") +
                " --tasks-out " + p("tasks.csv"),
        };
        for (const auto& s : steps) {
            const auto r = run(s, w);
            ASSERT_EQ(r.status, 0) << s << "\n" << r.err;
        }
        for (const char* f : {"d.csv", "m.csv", "P.txt", "M.txt", "contour.csv", "sweep.csv", "sweep.svg",
                              "plan.txt", "rollout.txt", "ablate.csv", "tasks.csv"})
            outputs[rep] += std::string("== ") + f + "\n" + mask_timing(read_file(w / f));
    }
    EXPECT_EQ(outputs[0], outputs[1]);
    const std::string ablate = read_file(d / "0" / "ablate.csv");
    EXPECT_EQ(ablate.substr(0, ablate.find('\n')), "horizon,objective,margin,n,infeasible,invalid,valid,mean_time_s");
    EXPECT_EQ(line_count(ablate), 3u);
    const std::string sweep = read_file(d / "0" / "sweep.csv");
    EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "epsilon,accuracy,inclusion");
    EXPECT_NE(read_file(d / "0" / "sweep.svg").find("<svg"), std::string::npos);
}
