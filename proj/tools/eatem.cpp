#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "eatem/cli.hpp"
#include "eatem/error.hpp"
#include "eatem/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Entanglement-assisted electron microscopy simulator"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    long long seed = -1;
    bool check = false;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--set", overrides, "override one key, e.g. --set squid.d=2mm");
    app.add_option("--seed", seed, "master random seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--check", check, "evaluate acceptance thresholds; exit 4 on failure");
    const std::pair<const char*, const char*> commands[] = {
        {"design", "SQUID sizing, deflection angles and timing budget"},
        {"optics", "four-plane wave-optics chain, detector amplitudes and beta map"},
        {"protocol", "k-electron measurement groups with phase audit and outcome statistics"},
        {"image", "entangled vs conventional scan of a weak-phase specimen"},
        {"scaling", "electrons-to-target-precision vs k with log-log fit"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->fallthrough();
    }
    CLI11_PARSE(app, argc, argv);

    eatem::Config config = eatem::Config::defaults();
    try {
        if (!config_path.empty()) {
            config.load_text(eatem::read_file(config_path), config_path);
        }
        for (const auto& s : overrides) {
            config.set(s);
        }
        if (seed >= 0) {
            config.set_value("run.seed", std::to_string(seed), "--seed");
        }
    } catch (const eatem::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == eatem::ErrorKind::io ? eatem::cli::exit_failure : eatem::cli::exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    return eatem::cli::run(command, config, out_dir, check, std::cout, std::cerr);
}
