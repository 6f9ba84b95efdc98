#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tpfl {

// Fully resolved run configuration. Defaults mirror the reference client
// configuration: 100 clients, 10 rounds, 10 local epochs, s=10, T=1000,
// 300 clauses for mnist and 500 for the other datasets.
struct RunConfig {
    std::string dataset = "mnist";  // mnist | fashion_mnist | femnist
    std::filesystem::path data_dir;
    std::string experiment = "all";  // "1".."5" or "all"
    int clients = 100;
    int rounds = 10;
    int epochs = 10;
    std::optional<int> clauses;  // unset -> dataset default
    int threshold_T = 1000;
    double sensitivity = 10.0;
    int ta_state_count = 127;
    int binarize_threshold = 75;
    double alpha_iid = 10000.0;
    double alpha_noniid = 0.05;
    double fraction = 1.0;
    std::string strategy = "tpfl";  // tpfl | global_average
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    int workers = 0;  // 0 -> hardware concurrency
    bool weighted_confidence = false;
    int bytes_per_weight = 4;
    bool conf_fallback_train = false;

    int resolved_clauses() const;
    std::vector<int> experiment_indices() const;  // {1..5} for "all"
    void validate() const;  // throws ConfigError naming the field
};

// Layered resolution: defaults, then the JSON config file, then explicit flag
// overrides (also passed as a JSON object). Unknown keys raise ConfigError
// listing the valid ones.
RunConfig parse_config(const std::optional<std::filesystem::path>& config_file,
                       const std::string& flag_overrides_json = "{}");

// Applies one JSON document on top of `base` (shared by file and flag layers).
RunConfig apply_config_json(RunConfig base, const std::string& json_text,
                            const std::string& source_name);

// The resolved-config echo written to out_dir/config.json.
std::string config_to_json(const RunConfig& config);

// Orchestrates the configured experiments end to end: plan, clients,
// federation, reports. Returns a process exit status; failures are written as
// a structured error report.
int run(const RunConfig& config);

}  // namespace tpfl
