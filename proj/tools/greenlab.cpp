#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/experiment.hpp"

namespace
{
std::size_t workers_from_env()
{
    char const* env = std::getenv("GREENLAB_WORKERS");
    if (!env || !*env)
        return 0;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024)
        throw greenlab::ConfigError("GREENLAB_WORKERS must be an integer in [1, 1024]");
    return static_cast<std::size_t>(v);
}
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Numerical experiments on random and non-autonomous holomorphic dynamics"};
    std::string kind, config_path, out_dir = "out";
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::vector<std::string> overrides;
    bool timing = false, plots = true;

    std::string kinds_text;
    for (auto const& k : greenlab::experiment_kinds())
        kinds_text += (kinds_text.empty() ? "" : " | ") + k;
    app.add_option("kind", kind, "Experiment: " + kinds_text)->required();
    app.add_option("--config", config_path, "INI configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
    auto* workers_opt = app.add_option("--workers", workers, "Worker threads")
                            ->check(CLI::Range(1, 1024));
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--set", overrides, "Override a key: section.key=value");
    app.add_flag("--timing", timing, "Record wall-clock time in the summary");
    app.add_flag("!--no-plots", plots, "Skip the plot data files");
    app.set_version_flag("--version", greenlab::tool_version);

    CLI11_PARSE(app, argc, argv);

    try
    {
        auto config = greenlab::load_config(config_path, kind);
        for (auto const& o : overrides)
            greenlab::apply_override(config, o);
        if (*seed_opt)
            config.seed = seed;
        if (*workers_opt)
            config.workers = workers;
        else if (auto env = workers_from_env())
            config.workers = env;

        auto report = greenlab::run(config);
        greenlab::write_report(report, out_dir, timing);
        if (plots)
            greenlab::emit_plotdata(report, out_dir);
        for (auto const& v : report.verdicts)
            std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << " ("
                      << v.artifact << ")\n";
        if (report.details.contains("caveat"))
            std::cout << "note: " << report.details["caveat"].get<std::string>()
                      << "\n";
        return report.all_pass() ? 0 : 1;
    }
    catch (greenlab::Error const& e)
    {
        std::cerr << "greenlab: " << e.what() << "\n";
        return 2;
    }
    catch (std::exception const& e)
    {
        std::cerr << "greenlab: " << e.what() << "\n";
        return 2;
    }
}
