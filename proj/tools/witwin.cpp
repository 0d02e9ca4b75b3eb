// witwin: run scenarios and compare roaming policies.
//
//   witwin run      --scenario FILE --policy NAME --seed N --out DIR [--heatmaps] [--samples]
//   witwin compare  --scenario FILE --policies a,b,c --seed N --seed-count K --out DIR
//   witwin validate --scenario FILE

#include <witwin/witwin.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace witwin;

namespace
{

void write_run_outputs(const fs::path& out, const RunResult& r, bool heatmaps, bool samples)
{
    write_file_atomic(out / "metrics.txt", metrics_to_text(r.report));
    write_file_atomic(out / "metrics.csv", std::string(kMetricsCsvHeader) + "\n" +
                                               metrics_csv_row(r.report) + "\n");
    write_file_atomic(out / "events.log", r.event_log);
    write_file_atomic(out / "decisions.log", decision_log_text(r.decisions));
    if (samples)
    {
        std::ostringstream os;
        write_sample_log(os, r.samples);
        write_file_atomic(out / "samples.csv", os.str());
    }
    if (heatmaps)
    {
        const fs::path dir = out / "heatmaps";
        fs::create_directories(dir);
        for (const auto& [ap, channel] : r.model.grid_keys())
        {
            std::ostringstream os;
            write_heatmap(os, r.model.export_heatmap(ap, channel));
            write_file_atomic(dir / (ap + "_" + channel.to_string() + ".txt"), os.str());
        }
    }
}

int cmd_run(const std::string& scenario_path, const std::string& policy_name_arg,
            std::uint64_t seed, const fs::path& out, bool heatmaps, bool samples)
{
    const Scenario sc = load_scenario(scenario_path);
    const Policy policy = parse_policy(policy_name_arg);
    spdlog::info("running '{}' policy={} seed={}", sc.name, policy_name(policy), seed);
    const RunResult r = run(sc, policy, seed);
    fs::create_directories(out);
    write_run_outputs(out, r, heatmaps, samples);
    spdlog::info("delivered {}/{} frames, {} advisories", r.report.aggregate.delivered,
                 r.report.aggregate.released, r.report.advisories_issued);
    return 0;
}

int cmd_compare(const std::string& scenario_path, const std::vector<std::string>& policy_names,
                std::uint64_t seed, std::uint64_t seed_count, const fs::path& out)
{
    const Scenario sc = load_scenario(scenario_path);
    std::vector<Policy> policies;
    for (const std::string& p : policy_names)
        policies.push_back(parse_policy(p));
    if (policies.empty())
        throw ConfigError("at least one policy is required");
    if (seed_count == 0)
        throw ConfigError("seed-count must be at least 1");

    std::string csv = std::string(kMetricsCsvHeader) + "\n";
    for (Policy p : policies)
    {
        std::vector<MetricsReport> runs;
        for (std::uint64_t s = seed; s < seed + seed_count; ++s)
        {
            spdlog::info("running '{}' policy={} seed={}", sc.name, policy_name(p), s);
            runs.push_back(run(sc, p, s).report);
            csv += metrics_csv_row(runs.back()) + "\n";
        }
        csv += metrics_csv_mean_row(p, runs) + "\n";
    }
    fs::create_directories(out);
    write_file_atomic(out / "comparison.csv", csv);
    return 0;
}

int cmd_validate(const std::string& scenario_path)
{
    const Scenario sc = load_scenario(scenario_path);
    fmt::print("{}: ok ({} APs, {} STAs, {} flows, {} s, hash {})\n", sc.name, sc.aps.size(),
               sc.stas.size(), sc.flows.size(), sc.duration, sc.hash);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wi-Fi 7 multi-link roaming simulator driven by a radio digital twin"};
    app.require_subcommand(1);
    std::string verbosity = "warn";
    app.add_option("-l,--log-level", verbosity, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    std::string scenario;
    std::string policy = "proactive";
    std::vector<std::string> policies{"proactive", "reactive", "legacy"};
    std::uint64_t seed = 1;
    std::uint64_t seed_count = 10;
    std::string out;
    bool heatmaps = false;
    bool samples = false;

    auto* run_cmd = app.add_subcommand("run", "simulate one scenario under one policy");
    run_cmd->add_option("-s,--scenario", scenario, "scenario file")->required();
    run_cmd->add_option("-p,--policy", policy, "proactive, reactive or legacy");
    run_cmd->add_option("--seed", seed, "RNG seed");
    run_cmd->add_option("-o,--out", out, "output directory")->required();
    run_cmd->add_flag("--heatmaps", heatmaps, "dump the twin heatmaps");
    run_cmd->add_flag("--samples", samples, "dump the reported feature samples");

    auto* cmp_cmd = app.add_subcommand("compare", "sweep policies and seeds into one CSV");
    cmp_cmd->add_option("-s,--scenario", scenario, "scenario file")->required();
    cmp_cmd->add_option("-p,--policies", policies, "policies to compare")->delimiter(',');
    cmp_cmd->add_option("--seed", seed, "first seed");
    cmp_cmd->add_option("-n,--seed-count", seed_count, "number of consecutive seeds");
    cmp_cmd->add_option("-o,--out", out, "output directory")->required();

    auto* val_cmd = app.add_subcommand("validate", "load and check a scenario file");
    val_cmd->add_option("-s,--scenario", scenario, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(verbosity));

    try
    {
        if (run_cmd->parsed())
            return cmd_run(scenario, policy, seed, out, heatmaps, samples);
        if (cmp_cmd->parsed())
            return cmd_compare(scenario, policies, seed, seed_count, out);
        return cmd_validate(scenario);
    }
    catch (const std::exception& e)
    {
        spdlog::error("{}", e.what());
        return 1;
    }
}
