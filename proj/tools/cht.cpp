#include <iostream>

#include "CLI11.hpp"

#include "cht/cli/commands.hpp"
#include "cht/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Canopy height mapping from synthetic Sentinel-1/2 stacks and GEDI labels"};
    app.require_subcommand(1);
    std::string config_path;
    cht::cli::Options opt;
    std::string out = ".";
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");
    for (const auto& name : cht::cli::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out, "Output directory");
        if (name == "infer") {
            sub->add_option("--decoders", opt.decoders, "Decode worker threads")->check(CLI::PositiveNumber);
            sub->add_option("--inferrers", opt.inferrers, "Inference worker threads")->check(CLI::PositiveNumber);
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    opt.out = out;
    if (!quiet) opt.progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
    try {
        const auto config = cht::cli::read_json_file(config_path);
        const auto m = cht::cli::run_command(command, config, opt);
        std::cerr << command << " done in " << m.wall_seconds << " s; manifest "
                  << cht::cli::manifest_path(opt.out, command).string() << '\n';
        return 0;
    } catch (const cht::ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        const int code = cht::cli::exit_code_for(e);
        std::cerr << (code == 3 ? "data error: " : "error: ") << e.what() << '\n';
        return code;
    }
}
