// chainmapper <mode> --config <path> | --preset <name> [--out <dir>] [--jobs <n>]
//
// Exit codes: 0 success, 1 configuration, 2 numerical, 3 I/O.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "chainmapper/config.hpp"
#include "chainmapper/io.hpp"
#include "chainmapper/pipeline.hpp"

using namespace chainmapper;

namespace {

std::vector<RunConfig> load_configs(Mode mode, const std::string& config_path, const std::string& preset)
{
    if (config_path.empty() == preset.empty()) {
        throw ConfigError("", "give exactly one of --config or --preset");
    }
    std::vector<RunConfig> configs;
    if (!preset.empty()) {
        configs = figure_presets(preset);
        for (auto& c : configs) {
            c.mode = mode;
        }
    } else {
        RunConfig c = parse_config(io::read_file(config_path));
        if (c.mode != mode) {
            throw ConfigError("mode", "config file says '" + mode_name(c.mode) + "' but the command line asks for '" +
                                          mode_name(mode) + "'");
        }
        configs.push_back(std::move(c));
    }
    return configs;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Chain mapping of bosonic environments and spin-boson dynamics"};
    std::string mode_text;
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::size_t jobs = 1;
    bool print_config = false;
    bool list_presets = false;

    app.add_option("mode", mode_text, "coeffs | single | full | thermalize-inspect");
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--preset", preset, "named figure preset (expands to all its variants)");
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--jobs", jobs, "independent runs executed in parallel")->check(CLI::PositiveNumber);
    app.add_flag("--print-config", print_config, "print the resolved configuration(s) and exit");
    app.add_flag("--list-presets", list_presets, "list preset names and exit");
    app.set_version_flag("--version", version_string);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    if (list_presets) {
        for (const auto& name : preset_names()) {
            std::cout << name << '\n';
        }
        return exit_ok;
    }

    std::vector<RunConfig> configs;
    try {
        if (mode_text.empty()) {
            throw ConfigError("mode", "missing (expected coeffs, single, full or thermalize-inspect)");
        }
        configs = load_configs(parse_mode(mode_text), config_path, preset);
        if (!out_dir.empty()) {
            for (auto& c : configs) {
                c.output.directory = out_dir;
            }
        }
        for (const auto& c : configs) {
            validate_for_mode(c);
        }
    } catch (const ConfigError& e) {
        std::cerr << "chainmapper: config error: " << e.what() << '\n';
        return exit_config;
    } catch (const IoError& e) {
        std::cerr << "chainmapper: I/O error: " << e.what() << '\n';
        return exit_io;
    }

    if (print_config) {
        for (const auto& c : configs) {
            std::cout << dump_config(c);
        }
        return exit_ok;
    }

    const auto results = run_all(configs, jobs);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const std::string tag = configs[i].variant.empty() ? std::string() : "[" + configs[i].variant + "] ";
        for (const auto& line : results[i].summary) {
            std::cout << tag << line << '\n';
        }
        for (const auto& f : results[i].files) {
            std::cout << tag << "wrote " << f.string() << '\n';
        }
        if (results[i].exit_code != exit_ok) {
            std::cerr << "chainmapper: " << tag << results[i].message << '\n';
        }
    }
    return combined_exit_code(results);
}
