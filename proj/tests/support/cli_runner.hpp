#pragma once

// Spawns the installed CLI binary (path from DPCOMP_CLI) and captures stdout
// and the exit code. Fixture paths resolve against DPCOMP_FIXTURES.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include <sys/wait.h>

namespace cli {

struct Result {
    int exit_code = -1;
    std::string out;
};

inline std::string env_or_throw(const char* name) {
    const char* v = std::getenv(name);
    if (!v) throw std::runtime_error(std::string(name) + " is not set");
    return v;
}

inline Result run(const std::string& args, bool merge_stderr = false) {
    const std::string cmd =
        env_or_throw("DPCOMP_CLI") + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed for: " + cmd);
    Result r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string fixture(const std::string& name) {
    return env_or_throw("DPCOMP_FIXTURES") + "/" + name;
}

inline std::string write_temp(const std::string& stem, const std::string& text) {
    const std::string path = "/tmp/dpcomp-test-" + stem + ".json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    return path;
}

}  // namespace cli
