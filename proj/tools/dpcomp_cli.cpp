#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dpcomp/run.hpp"

namespace {

int emit(const dpcomp::RunResult& result, const std::string& out_path) {
    const std::string text = result.report.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return result.exit_code;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << '\n';
        return 1;
    }
    out << text;
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Composition calculus for metric-graded differential privacy"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string cache_dir;
    std::string pairs = "all";
    std::string profile = "default";
    std::string action = "warm";
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_path, "report destination (default: stdout)");
        cmd->add_option("--cache-dir", cache_dir, "distance-matrix cache directory");
        cmd->add_option("--pairs", pairs, "pair scope for verification")
            ->check(CLI::IsMember({"neighbors", "all"}));
        cmd->add_option("--seed", seed, "seed echoed into the report");
        cmd->add_option("--tolerance-profile", profile, "tolerance profile")
            ->check(CLI::IsMember({"strict", "default"}));
    };

    CLI::App* plan_cmd = app.add_subcommand("plan", "compose the configured plan and report it");
    CLI::App* verify_cmd = app.add_subcommand("verify", "check mechanisms against a claim");
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "metric, granularity, and partition detail");
    CLI::App* cache_cmd = app.add_subcommand("cache", "warm or clear the distance-matrix cache");
    for (CLI::App* cmd : {plan_cmd, verify_cmd, inspect_cmd, cache_cmd}) add_common(cmd);
    cache_cmd->add_option("--action", action, "warm | clear")
        ->check(CLI::IsMember({"warm", "clear"}));

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        dpcomp::RunOptions opt;
        opt.cache_dir = cache_dir;
        opt.seed = seed;
        opt.tolerance_profile = profile;
        if (sub->count("--pairs"))
            opt.pairs = pairs == "neighbors" ? dpcomp::PairMode::neighbors : dpcomp::PairMode::all;

        dpcomp::RealizedConfig rc = dpcomp::realize_config(dpcomp::load_config(config_path));
        dpcomp::RunResult result;
        if (sub == plan_cmd)
            result = dpcomp::run_plan(rc, opt);
        else if (sub == verify_cmd)
            result = dpcomp::run_verify(rc, opt);
        else if (sub == inspect_cmd)
            result = dpcomp::run_inspect(rc, opt);
        else
            result = dpcomp::run_cache(rc, opt, action);
        return emit(result, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
