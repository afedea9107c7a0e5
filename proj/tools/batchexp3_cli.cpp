// batchexp3 command line: run, resume and preset experiments.
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure,
// 3 acceptance-preset failure.

#include <batchexp3/batchexp3.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kPresetFailed = 3;

batchexp3::RunOptions make_options(const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
                                   unsigned parallel, std::uint64_t stop_at)
{
    batchexp3::RunOptions opt;
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.parallel = parallel;
    opt.stop_at = stop_at;
    return opt;
}

void print_result(const batchexp3::RunResult& r)
{
    std::cout << (r.complete ? "completed " : "stopped after round ") << r.state.next_round - 1 << " rounds; "
              << r.log.rows.size() << " events, snapshot version " << r.state.version << "; artifacts in "
              << r.out_dir.string() << "\n";
}

int run_preset(const std::string& name, const std::optional<std::string>& out_dir)
{
    batchexp3::PresetReport report;
    if (name == "bench-regret")
        report = batchexp3::presets::bench_regret();
    else if (name == "snowball")
        report = batchexp3::presets::snowball();
    else if (name == "exp3-equiv")
        report = batchexp3::presets::exp3_equiv();
    else {
        std::cerr << "error: unknown preset '" << name << "' (bench-regret, snowball, exp3-equiv)\n";
        return kValidation;
    }
    const std::string text = report.format();
    std::cout << text;
    const std::filesystem::path dir = out_dir.value_or("out");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / ("preset_" + name + ".txt")) << text;
    return report.passed() ? kOk : kPresetFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Batch EXP3 bid optimization under batched, delayed feedback"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    unsigned parallel = 1;
    std::uint64_t stop_at = 0;
    app.add_option("--seed", seed, "Override the master seed")->expected(1);
    app.add_option("--out-dir", out_dir, "Override the output directory");
    app.add_option("--parallel", parallel, "Worker threads for item shards")->check(CLI::Range(1u, 256u));

    std::string config_path;
    std::string snapshot_path;
    std::string preset_name;

    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--stop-at", stop_at, "Stop after this round and write a snapshot");

    auto* resume = app.add_subcommand("resume", "Continue a stopped experiment from its snapshot");
    resume->add_option("snapshot", snapshot_path, "Snapshot file")->required();
    resume->add_option("config", config_path, "Experiment config (JSON)")->required();
    resume->add_option("--stop-at", stop_at, "Stop again after this round");

    auto* preset = app.add_subcommand("preset", "Run a pinned acceptance experiment");
    preset->add_option("name", preset_name, "bench-regret | snowball | exp3-equiv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*preset)
            return run_preset(preset_name, out_dir);

        const auto config = batchexp3::load_config(config_path);
        const auto base_dir = std::filesystem::path(config_path).parent_path();
        const auto options = make_options(out_dir, seed, parallel, stop_at);
        if (*run)
            print_result(batchexp3::run_experiment(config, options, base_dir));
        else
            print_result(batchexp3::resume_experiment(snapshot_path, config, options, base_dir));
        return kOk;
    } catch (const batchexp3::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const batchexp3::SnapshotError& e) {
        std::cerr << "snapshot error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
