#pragma once

// Helpers for tests that drive the command-line tool as a subprocess.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace cli_test {

struct RunResult {
    int status = -1;
    std::string err;
};

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("aslip_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Runs the CLI with `args`; stdout is discarded, stderr captured.
inline RunResult run(const std::string& args, const std::filesystem::path& dir) {
    const auto err_file = dir / "stderr.txt";
    const std::string cmd = std::string("'") + ASLIP_CLI_PATH + "' " + args + " > /dev/null 2> '" +
                            err_file.string() + "'";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.err = read_file(err_file);
    return r;
}

/// Replaces wall-clock fields, which legitimately differ between runs.
inline std::string mask_timing(const std::string& text) {
    static const std::regex plan_time(R"(((setup|solve)_time_s) \S+)");
    static const std::regex ablate_time(R"(^((?:[^,\n]*,){7})[^,\n]+$)", std::regex::multiline);
    std::string out = std::regex_replace(text, plan_time, "$1 <t>");
    return std::regex_replace(out, ablate_time, "$1<t>");
}

}  // namespace cli_test
