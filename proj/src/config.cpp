#include "tpfl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

const char* const kValidKeys[] = {
    "dataset",        "data_dir",           "experiment",
    "clients",        "rounds",             "epochs",
    "clauses",        "threshold_T",        "sensitivity",
    "ta_state_count", "binarize_threshold", "alpha_iid",
    "alpha_noniid",   "fraction",           "strategy",
    "seed",           "out_dir",            "workers",
    "weighted_confidence", "bytes_per_weight", "conf_fallback_train",
};

std::string valid_key_list() {
    std::string out;
    for (const char* key : kValidKeys) {
        if (!out.empty()) out += ", ";
        out += key;
    }
    return out;
}

bool is_valid_key(const std::string& key) {
    for (const char* valid : kValidKeys)
        if (key == valid) return true;
    return false;
}

}  // namespace

int RunConfig::resolved_clauses() const {
    if (clauses) return *clauses;
    return dataset == "mnist" ? 300 : 500;
}

std::vector<int> RunConfig::experiment_indices() const {
    if (experiment == "all") return {1, 2, 3, 4, 5};
    return {std::stoi(experiment)};
}

void RunConfig::validate() const {
    if (dataset != "mnist" && dataset != "fashion_mnist" && dataset != "femnist")
        throw ConfigError("dataset must be mnist, fashion_mnist or femnist");
    if (experiment != "all") {
        int index = 0;
        try {
            std::size_t used = 0;
            index = std::stoi(experiment, &used);
            if (used != experiment.size()) index = -1;
        } catch (const std::exception&) {
            index = -1;
        }
        if (index < 1 || index > 5)
            throw ConfigError("experiment must be 1..5 or \"all\"");
    }
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (clauses && (*clauses < 2 || *clauses % 2 != 0))
        throw ConfigError("clauses must be even and >= 2");
    if (threshold_T < 1) throw ConfigError("threshold_T must be >= 1");
    if (sensitivity <= 1.0) throw ConfigError("sensitivity must be > 1");
    if (ta_state_count < 1 || ta_state_count > 127)
        throw ConfigError("ta_state_count must be in [1, 127]");
    if (binarize_threshold < 0 || binarize_threshold > 255)
        throw ConfigError("binarize_threshold must be in [0, 255]");
    if (alpha_iid <= 0.0) throw ConfigError("alpha_iid must be positive");
    if (alpha_noniid <= 0.0) throw ConfigError("alpha_noniid must be positive");
    if (fraction <= 0.0 || fraction > 1.0)
        throw ConfigError("fraction must be in (0, 1]");
    if (strategy != "tpfl" && strategy != "global_average")
        throw ConfigError("strategy must be tpfl or global_average");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    if (bytes_per_weight < 1 || bytes_per_weight > 8)
        throw ConfigError("bytes_per_weight must be in [1, 8]");
}

RunConfig apply_config_json(RunConfig base, const std::string& json_text,
                            const std::string& source_name) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source_name + ": not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(source_name + ": expected a JSON object");

    for (const auto& [key, value] : doc.items()) {
        if (!is_valid_key(key))
            throw ConfigError(source_name + ": unknown key '" + key +
                              "' (valid keys: " + valid_key_list() + ")");
        try {
            if (key == "dataset") base.dataset = value.get<std::string>();
            else if (key == "data_dir") base.data_dir = value.get<std::string>();
            else if (key == "experiment") {
                if (value.is_number_integer())
                    base.experiment = std::to_string(value.get<int>());
                else
                    base.experiment = value.get<std::string>();
            }
            else if (key == "clients") base.clients = value.get<int>();
            else if (key == "rounds") base.rounds = value.get<int>();
            else if (key == "epochs") base.epochs = value.get<int>();
            else if (key == "clauses") base.clauses = value.get<int>();
            else if (key == "threshold_T") base.threshold_T = value.get<int>();
            else if (key == "sensitivity") base.sensitivity = value.get<double>();
            else if (key == "ta_state_count") base.ta_state_count = value.get<int>();
            else if (key == "binarize_threshold")
                base.binarize_threshold = value.get<int>();
            else if (key == "alpha_iid") base.alpha_iid = value.get<double>();
            else if (key == "alpha_noniid") base.alpha_noniid = value.get<double>();
            else if (key == "fraction") base.fraction = value.get<double>();
            else if (key == "strategy") base.strategy = value.get<std::string>();
            else if (key == "seed") base.seed = value.get<std::uint64_t>();
            else if (key == "out_dir") base.out_dir = value.get<std::string>();
            else if (key == "workers") base.workers = value.get<int>();
            else if (key == "weighted_confidence")
                base.weighted_confidence = value.get<bool>();
            else if (key == "bytes_per_weight")
                base.bytes_per_weight = value.get<int>();
            else if (key == "conf_fallback_train")
                base.conf_fallback_train = value.get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(source_name + ": bad value for '" + key +
                              "': " + e.what());
        }
    }
    return base;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& config_file,
                       const std::string& flag_overrides_json) {
    RunConfig config;
    if (const char* env = std::getenv("TPFL_DATA_DIR"); env && *env)
        config.data_dir = env;

    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw ConfigError("cannot open config file " + config_file->string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        config = apply_config_json(std::move(config),
                                   buffer.str(), config_file->string());
    }
    config = apply_config_json(std::move(config), flag_overrides_json, "flags");
    config.validate();
    return config;
}

std::string config_to_json(const RunConfig& config) {
    nlohmann::ordered_json doc;
    doc["dataset"] = config.dataset;
    doc["data_dir"] = config.data_dir.string();
    doc["experiment"] = config.experiment;
    doc["clients"] = config.clients;
    doc["rounds"] = config.rounds;
    doc["epochs"] = config.epochs;
    doc["clauses"] = config.resolved_clauses();
    doc["threshold_T"] = config.threshold_T;
    doc["sensitivity"] = config.sensitivity;
    doc["ta_state_count"] = config.ta_state_count;
    doc["binarize_threshold"] = config.binarize_threshold;
    doc["alpha_iid"] = config.alpha_iid;
    doc["alpha_noniid"] = config.alpha_noniid;
    doc["fraction"] = config.fraction;
    doc["strategy"] = config.strategy;
    doc["seed"] = config.seed;
    doc["out_dir"] = config.out_dir.string();
    doc["workers"] = config.workers;
    doc["weighted_confidence"] = config.weighted_confidence;
    doc["bytes_per_weight"] = config.bytes_per_weight;
    doc["conf_fallback_train"] = config.conf_fallback_train;
    return doc.dump(2) + "\n";
}

}  // namespace tpfl
