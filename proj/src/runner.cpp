#include <cmath>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "tpfl/config.hpp"
#include "tpfl/dataset.hpp"
#include "tpfl/error.hpp"
#include "tpfl/federation.hpp"
#include "tpfl/metrics.hpp"
#include "tpfl/partition.hpp"

namespace tpfl {
namespace {

SplitSizes scaled_split_sizes(double fraction) {
    auto scale = [&](double base) {
        return static_cast<std::size_t>(std::llround(base * fraction));
    };
    return {scale(30000), scale(15000), scale(15000)};
}

ExperimentRun run_experiment(const RunConfig& config, const RawDataset& data,
                             int experiment) {
    ExperimentSpec spec;
    spec.index = experiment;
    spec.client_count = config.clients;
    spec.dataset = config.dataset;
    spec.seed = config.seed;
    spec.alpha_iid = config.alpha_iid;
    spec.alpha_noniid = config.alpha_noniid;

    const SplitSizes sizes = scaled_split_sizes(config.fraction);
    PartitionPlan plan = build_experiment_plan(
        spec, std::span<const std::uint8_t>(data.labels), sizes);

    const auto exp_dir = config.out_dir / ("exp" + std::to_string(experiment));
    std::filesystem::create_directories(exp_dir);
    {
        std::ofstream plan_out(exp_dir / "plan.json", std::ios::binary);
        plan_out << plan_to_json(plan) << "\n";
    }

    std::vector<ClientData> client_data;
    client_data.reserve(config.clients);
    for (int id = 0; id < config.clients; ++id)
        client_data.push_back(build_client_data(
            data, plan, id, std::uint8_t(config.binarize_threshold)));

    FederationConfig fed;
    fed.client_count = config.clients;
    fed.rounds = config.rounds;
    fed.local_epochs = config.epochs;
    fed.strategy = config.strategy == "global_average" ? Strategy::GlobalAverage
                                                       : Strategy::Tpfl;
    fed.tm.class_count = data.class_count;
    fed.tm.clauses_per_class = config.resolved_clauses();
    fed.tm.feature_count = kImagePixels;
    fed.tm.ta_states = config.ta_state_count;
    fed.tm.threshold = config.threshold_T;
    fed.tm.sensitivity = config.sensitivity;
    fed.seed = derive_seed(config.seed, Stream::Model,
                           std::uint64_t(experiment));
    fed.bytes_per_weight = config.bytes_per_weight;
    fed.weighted_confidence = config.weighted_confidence;
    fed.conf_fallback_train = config.conf_fallback_train;
    fed.workers = config.workers;

    Federation federation(fed, std::move(client_data));
    ExperimentRun run{experiment, {}};
    run.rounds = federation.run([&](const RoundReport& report) {
        std::cerr << "[tpfl] exp " << experiment << " round " << report.round << "/"
                  << config.rounds << ": mean_accuracy=" << report.mean_accuracy
                  << " clusters=" << report.clusters.size() << "\n";
    });
    return run;
}

void write_error_report(const RunConfig& config, const std::exception& error) {
    nlohmann::ordered_json doc;
    doc["error"] = error.what();
    doc["dataset"] = config.dataset;
    doc["experiment"] = config.experiment;
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (!ec) {
        std::ofstream out(config.out_dir / "error.json", std::ios::binary);
        if (out) out << doc.dump(2) << "\n";
    }
}

}  // namespace

int run(const RunConfig& config) {
    try {
        config.validate();
        std::filesystem::create_directories(config.out_dir);
        {
            std::ofstream echo(config.out_dir / "config.json", std::ios::binary);
            if (!echo)
                throw Error("cannot write " + (config.out_dir / "config.json").string());
            echo << config_to_json(config);
        }

        std::filesystem::path data_dir = config.data_dir;
        if (data_dir.empty())
            throw ConfigError("no data directory given (use data_dir or TPFL_DATA_DIR)");
        RawDataset data = load_dataset(config.dataset, data_dir);
        if (data.size() == 0) throw Error("dataset is empty");

        std::vector<ExperimentRun> runs;
        for (int experiment : config.experiment_indices())
            runs.push_back(run_experiment(config, data, experiment));

        emit_reports(std::span<const ExperimentRun>(runs), config.out_dir);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "[tpfl] error: " << e.what() << "\n";
        write_error_report(config, e);
        return 1;
    }
}

}  // namespace tpfl
