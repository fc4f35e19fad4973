#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "fragkin/scenario.hpp"

int main(int argc, char** argv) {
    using namespace fragkin;
    CLI::App app{"Discrete fragmentation scenarios: evolution, weight checks, decay envelopes, tower norms"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    bool quiet = false;
    bool summary = false;
    for (const auto& [task, name] : task_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " task");
        sub->add_option("--config", config_path, "scenario JSON file")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_flag("--quiet", quiet, "suppress progress lines");
        sub->add_flag("--summary", summary, "print a fixed-width summary table");
    }
    CLI11_PARSE(app, argc, argv);

    const Task task = parse_task(app.get_subcommands().front()->get_name());
    try {
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.quiet = quiet;
        opts.summary = summary;
        opts.threads = thread_cap(std::getenv("FRAGKIN_THREADS"));
        const auto cfg = load_scenario(config_path);
        return run_scenario(task, cfg, opts);
    } catch (const Error& e) {
        std::cerr << diagnose(e) << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "fragkin: error[internal]: " << e.what() << '\n';
        return kExitFailure;
    }
}
