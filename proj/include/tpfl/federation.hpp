#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "tpfl/dataset.hpp"
#include "tpfl/metrics.hpp"
#include "tpfl/rng.hpp"
#include "tpfl/tm.hpp"

namespace tpfl {

// What a client uploads after its local phase: the weight vector of its most
// confident class only.
struct ClientUpdate {
    int client_id = 0;
    int c_max = 0;
    ClassWeightVector weights;  // weights.class_index == c_max
};

// Aggregator-side accumulator for one cluster (one class).
struct ClusterState {
    int class_index = 0;
    std::vector<double> accumulated;  // mean after aggregation
    int member_count = 0;
    std::vector<int> members;  // sorted client ids
};

enum class Strategy { Tpfl, GlobalAverage };

struct FederationConfig {
    int client_count = 1;
    int rounds = 1;
    int local_epochs = 1;
    Strategy strategy = Strategy::Tpfl;
    TMParams tm;
    std::uint64_t seed = 0;
    int bytes_per_weight = 4;
    bool weighted_confidence = false;
    bool conf_fallback_train = false;
    int workers = 1;  // <= 0 means hardware concurrency

    void validate() const;
};

// One simulated device: its model, its data, its private generator.
struct Client {
    Client(int id_, const TMParams& params, ClientData data_, std::uint64_t seed)
        : id(id_), model(params), data(std::move(data_)), rng(seed) {}

    int id;
    TMModel model;
    ClientData data;
    Rng rng;
};

// Local phase: train `epochs` passes, score confidence per class, upload the
// weight vector of the top class. Throws on an empty confidence set unless
// the train-set fallback is enabled.
ClientUpdate client_round(Client& client, int epochs,
                          bool weighted_confidence = false,
                          bool conf_fallback_train = false);

// Groups updates by c_max and stores the member mean in `accumulated`.
// Member lists are sorted by client id so the result is independent of
// update arrival order. Throws ShapeError on mixed weight lengths.
std::map<int, ClusterState> aggregate_updates(std::span<const ClientUpdate> updates);

// Replaces each member's class-k weight vector with the cluster mean
// (integerized). Returns one applied flag per client slot.
std::vector<bool> distribute_and_apply(const std::map<int, ClusterState>& clusters,
                                       std::vector<Client>& clients);

// Full per-client weight state, class-major, for the naive baseline.
using WeightMatrix = std::vector<std::vector<std::uint32_t>>;

// Entrywise mean across clients, integerized. Throws ShapeError on mismatch.
WeightMatrix strategy_global_average(std::span<const WeightMatrix> full_updates);

class Federation {
public:
    Federation(FederationConfig config, std::vector<ClientData> client_data);

    // One complete round: local phase for every client, aggregation,
    // redistribution, then evaluation on each client's test split.
    RoundReport run_round(int round_index);

    // Runs config.rounds sequential rounds; reports are handed to `on_round`
    // as they complete.
    std::vector<RoundReport> run(
        const std::function<void(const RoundReport&)>& on_round = {});

    std::vector<Client>& clients() noexcept { return clients_; }
    const FederationConfig& config() const noexcept { return config_; }

private:
    RoundReport run_round_tpfl(int round_index);
    RoundReport run_round_global_average(int round_index);
    void evaluate_clients(RoundReport& report);
    void parallel_for_clients(const std::function<void(int)>& body);

    FederationConfig config_;
    std::vector<Client> clients_;
};

}  // namespace tpfl
