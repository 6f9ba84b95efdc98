#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tpfl/config.hpp"
#include "tpfl/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"TPFL: confidence-clustered federated Tsetlin Machine simulator"};

    std::optional<std::string> config_file;
    std::optional<std::string> dataset, data_dir, experiment, strategy, out_dir;
    std::optional<int> clients, rounds, epochs, clauses, threshold_T, workers,
        bytes_per_weight;
    std::optional<double> sensitivity, alpha_iid, alpha_noniid, fraction;
    std::optional<std::uint64_t> seed;
    bool weighted_confidence = false;

    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--dataset", dataset, "mnist | fashion_mnist | femnist");
    app.add_option("--data-dir", data_dir,
                   "directory holding the IDX files (default: $TPFL_DATA_DIR)");
    app.add_option("--experiment", experiment, "experiment index 1..5 or 'all'");
    app.add_option("--clients", clients, "number of clients");
    app.add_option("--rounds", rounds, "federation rounds");
    app.add_option("--epochs", epochs, "local epochs per round");
    app.add_option("--clauses", clauses, "clauses per class");
    app.add_option("--threshold-T", threshold_T, "feedback threshold T");
    app.add_option("--sensitivity", sensitivity, "sensitivity s");
    app.add_option("--alpha-iid", alpha_iid, "Dirichlet alpha for IID clients");
    app.add_option("--alpha-noniid", alpha_noniid,
                   "Dirichlet alpha for non-IID clients");
    app.add_option("--fraction", fraction, "global split-size scale in (0, 1]");
    app.add_option("--strategy", strategy, "tpfl | global_average");
    app.add_option("--seed", seed, "root seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "client worker threads (0 = all cores)");
    app.add_flag("--weighted-confidence", weighted_confidence,
                 "use clause weights in the confidence score");
    app.add_option("--bytes-per-weight", bytes_per_weight,
                   "serialized bytes per clause weight");

    CLI11_PARSE(app, argc, argv);

    nlohmann::json overrides = nlohmann::json::object();
    if (dataset) overrides["dataset"] = *dataset;
    if (data_dir) overrides["data_dir"] = *data_dir;
    if (experiment) overrides["experiment"] = *experiment;
    if (clients) overrides["clients"] = *clients;
    if (rounds) overrides["rounds"] = *rounds;
    if (epochs) overrides["epochs"] = *epochs;
    if (clauses) overrides["clauses"] = *clauses;
    if (threshold_T) overrides["threshold_T"] = *threshold_T;
    if (sensitivity) overrides["sensitivity"] = *sensitivity;
    if (alpha_iid) overrides["alpha_iid"] = *alpha_iid;
    if (alpha_noniid) overrides["alpha_noniid"] = *alpha_noniid;
    if (fraction) overrides["fraction"] = *fraction;
    if (strategy) overrides["strategy"] = *strategy;
    if (seed) overrides["seed"] = *seed;
    if (out_dir) overrides["out_dir"] = *out_dir;
    if (workers) overrides["workers"] = *workers;
    if (weighted_confidence) overrides["weighted_confidence"] = true;
    if (bytes_per_weight) overrides["bytes_per_weight"] = *bytes_per_weight;

    try {
        std::optional<std::filesystem::path> config_path;
        if (config_file) config_path = *config_file;
        tpfl::RunConfig config = tpfl::parse_config(config_path, overrides.dump());
        return tpfl::run(config);
    } catch (const std::exception& e) {
        std::cerr << "[tpfl] error: " << e.what() << "\n";
        return 1;
    }
}
