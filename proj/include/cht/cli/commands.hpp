#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cht::cli {

// Written by every command as <out>/<command>.manifest.json.
struct RunManifest {
    std::string command;
    std::string config_hash;  // SHA-256 hex of the canonical config dump
    nlohmann::json config;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::json versions;
    double wall_seconds = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
std::filesystem::path manifest_path(const std::filesystem::path& out, const std::string& command);

std::string sha256_hex(const std::string& bytes);
// Hash of config.dump(); keys are sorted, so equal configs hash equally.
std::string config_hash(const nlohmann::json& config);
nlohmann::json version_info();

struct Options {
    std::filesystem::path out = ".";
    int decoders = 1;
    int inferrers = 1;
    std::function<void(const std::string&)> progress;
};

RunManifest cmd_synth(const nlohmann::json& config, const Options& opt);
RunManifest cmd_preprocess(const nlohmann::json& config, const Options& opt);
RunManifest cmd_train(const nlohmann::json& config, const Options& opt);
RunManifest cmd_eval(const nlohmann::json& config, const Options& opt);
RunManifest cmd_infer(const nlohmann::json& config, const Options& opt);
RunManifest cmd_postprocess(const nlohmann::json& config, const Options& opt);
RunManifest cmd_ablate(const nlohmann::json& config, const Options& opt);
RunManifest cmd_compare(const nlohmann::json& config, const Options& opt);

// Dispatches by name, times the run and writes the manifest. Throws ConfigError for an
// unknown command.
RunManifest run_command(const std::string& command, const nlohmann::json& config, const Options& opt);
const std::vector<std::string>& command_names();

// Exit code for an exception escaping a command: 2 config, 3 data, 1 anything else.
int exit_code_for(const std::exception& e);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace cht::cli
