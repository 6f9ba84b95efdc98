#include "tpfl/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <thread>

#include "tpfl/error.hpp"

namespace tpfl {

void FederationConfig::validate() const {
    if (client_count < 1) throw ConfigError("client_count must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (bytes_per_weight < 1) throw ConfigError("bytes_per_weight must be >= 1");
    tm.validate();
}

ClientUpdate client_round(Client& client, int epochs, bool weighted_confidence,
                          bool conf_fallback_train) {
    for (int e = 0; e < epochs; ++e)
        client.model.train_epoch(client.data.train, client.rng);

    std::span<const BinarySample> conf(client.data.conf);
    if (conf.empty()) {
        if (!conf_fallback_train)
            throw Error("client " + std::to_string(client.id) +
                        ": confidence set is empty");
        std::cerr << "[tpfl] warning: client " << client.id
                  << " has no confidence set, scoring on train set\n";
        conf = std::span<const BinarySample>(client.data.train);
    }
    auto scores = client.model.confidence_scores(conf, weighted_confidence);
    const int c_max = argmax_confidence(scores);
    return {client.id, c_max, client.model.get_class_weights(c_max)};
}

std::map<int, ClusterState> aggregate_updates(
    std::span<const ClientUpdate> updates) {
    std::map<int, ClusterState> clusters;
    if (updates.empty()) return clusters;

    const std::size_t weight_len = updates[0].weights.weights.size();
    std::vector<const ClientUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& update : updates) {
        if (update.weights.weights.size() != weight_len)
            throw ShapeError("mixed weight lengths in updates: " +
                             std::to_string(update.weights.weights.size()) +
                             " vs " + std::to_string(weight_len));
        if (update.weights.class_index != update.c_max)
            throw Error("update for client " + std::to_string(update.client_id) +
                        " carries weights of class " +
                        std::to_string(update.weights.class_index) +
                        " but c_max " + std::to_string(update.c_max));
        ordered.push_back(&update);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return a->client_id < b->client_id;
    });

    for (const ClientUpdate* update : ordered) {
        ClusterState& cluster = clusters[update->c_max];
        if (cluster.member_count == 0) {
            cluster.class_index = update->c_max;
            cluster.accumulated.assign(weight_len, 0.0);
        }
        for (std::size_t j = 0; j < weight_len; ++j)
            cluster.accumulated[j] += double(update->weights.weights[j]);
        cluster.members.push_back(update->client_id);
        ++cluster.member_count;
    }
    for (auto& [class_index, cluster] : clusters)
        for (auto& value : cluster.accumulated) value /= cluster.member_count;
    return clusters;
}

std::vector<bool> distribute_and_apply(const std::map<int, ClusterState>& clusters,
                                       std::vector<Client>& clients) {
    std::vector<bool> applied(clients.size(), false);
    std::map<int, std::size_t> slot_by_id;
    for (std::size_t i = 0; i < clients.size(); ++i) slot_by_id[clients[i].id] = i;

    for (const auto& [class_index, cluster] : clusters) {
        for (int member : cluster.members) {
            auto it = slot_by_id.find(member);
            if (it == slot_by_id.end())
                throw Error("cluster " + std::to_string(class_index) +
                            " references unknown client " + std::to_string(member));
            Client& client = clients[it->second];
            client.model.set_class_weights(
                class_index, std::span<const double>(cluster.accumulated));
            applied[it->second] = true;
        }
    }
    return applied;
}

WeightMatrix strategy_global_average(std::span<const WeightMatrix> full_updates) {
    if (full_updates.empty()) return {};
    const std::size_t classes = full_updates[0].size();
    const std::size_t clauses = classes ? full_updates[0][0].size() : 0;

    std::vector<std::vector<double>> sums(classes, std::vector<double>(clauses, 0.0));
    for (const auto& matrix : full_updates) {
        if (matrix.size() != classes)
            throw ShapeError("weight matrix class count mismatch");
        for (std::size_t c = 0; c < classes; ++c) {
            if (matrix[c].size() != clauses)
                throw ShapeError("weight matrix clause count mismatch");
            for (std::size_t j = 0; j < clauses; ++j)
                sums[c][j] += double(matrix[c][j]);
        }
    }

    WeightMatrix mean(classes, std::vector<std::uint32_t>(clauses));
    const double count = double(full_updates.size());
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < clauses; ++j) {
            double rounded = std::floor(sums[c][j] / count + 0.5);
            mean[c][j] = rounded < 1.0 ? 1u : std::uint32_t(rounded);
        }
    return mean;
}

// ---------------------------------------------------------------- Federation

Federation::Federation(FederationConfig config, std::vector<ClientData> client_data)
    : config_(config) {
    config_.validate();
    if (int(client_data.size()) != config_.client_count)
        throw ShapeError("client data count " + std::to_string(client_data.size()) +
                         " does not match configured clients " +
                         std::to_string(config_.client_count));
    clients_.reserve(client_data.size());
    for (std::size_t i = 0; i < client_data.size(); ++i)
        clients_.emplace_back(int(i), config_.tm, std::move(client_data[i]),
                              derive_seed(config_.seed, Stream::Client, i));
}

void Federation::parallel_for_clients(const std::function<void(int)>& body) {
    int workers = config_.workers;
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, int(clients_.size())));

    if (workers == 1) {
        for (std::size_t i = 0; i < clients_.size(); ++i) body(int(i));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    int failed_client = -1;
    std::string failure;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= clients_.size()) return;
            try {
                body(int(i));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (failed_client < 0 || int(i) < failed_client) {
                    failed_client = int(i);
                    failure = e.what();
                }
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
    if (failed_client >= 0)
        throw Error("client " + std::to_string(failed_client) + ": " + failure);
}

void Federation::evaluate_clients(RoundReport& report) {
    const std::size_t M = clients_.size();
    report.per_client_accuracy.assign(M, 0.0);
    std::vector<std::uint8_t> empty_sets(M, 0);
    parallel_for_clients([&](int i) {
        EvalResult result = clients_[i].model.evaluate_accuracy(
            std::span<const BinarySample>(clients_[i].data.test));
        report.per_client_accuracy[i] = result.accuracy;
        empty_sets[i] = result.empty_set ? 1 : 0;
    });
    for (std::size_t i = 0; i < M; ++i)
        if (empty_sets[i])
            std::cerr << "[tpfl] warning: client " << clients_[i].id
                      << " has an empty test set, accuracy recorded as 0\n";
    double sum = 0.0;
    for (double accuracy : report.per_client_accuracy) sum += accuracy;
    report.mean_accuracy = sum / double(M);
}

RoundReport Federation::run_round(int round_index) {
    return config_.strategy == Strategy::GlobalAverage
               ? run_round_global_average(round_index)
               : run_round_tpfl(round_index);
}

RoundReport Federation::run_round_tpfl(int round_index) {
    RoundReport report;
    report.round = round_index;

    const std::size_t M = clients_.size();
    std::vector<ClientUpdate> updates(M);
    std::atomic<int> client_iterations{0};
    parallel_for_clients([&](int i) {
        updates[i] = client_round(clients_[i], config_.local_epochs,
                                  config_.weighted_confidence,
                                  config_.conf_fallback_train);
        client_iterations.fetch_add(1);
    });
    report.client_iterations = client_iterations.load();

    auto clusters = aggregate_updates(std::span<const ClientUpdate>(updates));
    report.cluster_iterations = int(clusters.size());
    distribute_and_apply(clusters, clients_);

    for (const auto& [class_index, cluster] : clusters)
        report.clusters[class_index] = cluster.members;
    report.upload_bytes = account_upload(int(M), config_.tm.clauses_per_class,
                                         config_.bytes_per_weight);
    report.download_bytes = account_download(
        int(clusters.size()), config_.tm.clauses_per_class, config_.bytes_per_weight);

    evaluate_clients(report);
    return report;
}

RoundReport Federation::run_round_global_average(int round_index) {
    RoundReport report;
    report.round = round_index;

    const std::size_t M = clients_.size();
    std::vector<WeightMatrix> matrices(M);
    std::atomic<int> client_iterations{0};
    parallel_for_clients([&](int i) {
        Client& client = clients_[i];
        for (int e = 0; e < config_.local_epochs; ++e)
            client.model.train_epoch(client.data.train, client.rng);
        WeightMatrix matrix(config_.tm.class_count);
        for (int c = 0; c < config_.tm.class_count; ++c)
            matrix[c] = client.model.get_class_weights(c).weights;
        matrices[i] = std::move(matrix);
        client_iterations.fetch_add(1);
    });
    report.client_iterations = client_iterations.load();

    WeightMatrix mean = strategy_global_average(std::span<const WeightMatrix>(matrices));
    report.cluster_iterations = 1;
    for (auto& client : clients_)
        for (int c = 0; c < config_.tm.class_count; ++c)
            client.model.set_class_weights(ClassWeightVector{c, mean[c]});

    // Full weight matrices travel up; one global broadcast comes back.
    const std::uint64_t matrix_bytes = std::uint64_t(config_.tm.class_count) *
                                       config_.tm.clauses_per_class *
                                       config_.bytes_per_weight;
    report.upload_bytes = M * (matrix_bytes + 4);
    report.download_bytes = matrix_bytes + 4;

    evaluate_clients(report);
    return report;
}

std::vector<RoundReport> Federation::run(
    const std::function<void(const RoundReport&)>& on_round) {
    std::vector<RoundReport> reports;
    reports.reserve(config_.rounds);
    for (int r = 1; r <= config_.rounds; ++r) {
        reports.push_back(run_round(r));
        if (on_round) on_round(reports.back());
    }
    return reports;
}

}  // namespace tpfl
