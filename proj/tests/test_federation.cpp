#include <doctest.h>

#include <algorithm>
#include <set>

#include "support/helpers.hpp"
#include "tpfl/error.hpp"
#include "tpfl/federation.hpp"

using namespace tpfl;
using tpfl::testing::group_and_mean;
using tpfl::testing::toy_corpus;

namespace {

TMParams toy_params(int classes, int clauses, int features) {
    TMParams p;
    p.class_count = classes;
    p.clauses_per_class = clauses;
    p.feature_count = features;
    p.threshold = 10;
    p.sensitivity = 3.0;
    return p;
}

ClientData slice_corpus(const std::vector<BinarySample>& corpus, std::size_t train,
                        std::size_t test, std::size_t conf, std::size_t offset = 0) {
    ClientData data;
    auto at = corpus.begin() + long(offset);
    data.train.assign(at, at + long(train));
    data.test.assign(at + long(train), at + long(train + test));
    data.conf.assign(at + long(train + test), at + long(train + test + conf));
    return data;
}

ClientUpdate make_update(int client_id, int c_max,
                         std::vector<std::uint32_t> weights) {
    return {client_id, c_max, {c_max, std::move(weights)}};
}

FederationConfig toy_federation_config(int clients, int classes, int features) {
    FederationConfig config;
    config.client_count = clients;
    config.rounds = 2;
    config.local_epochs = 2;
    config.tm = toy_params(classes, 4, features);
    config.seed = 99;
    return config;
}

}  // namespace

TEST_CASE("client trained on one class is confident about it") {
    const int C = 10;
    Rng data_rng(7);
    std::vector<BinarySample> sevens;
    for (int i = 0; i < 60; ++i) {
        std::vector<bool> bits(12, false);
        bits[7] = true;
        for (int k = 10; k < 12; ++k) bits[k] = data_rng.bernoulli(0.5);
        sevens.push_back(sample_from_bits(bits, 7));
    }
    Client client(0, toy_params(C, 4, 12), slice_corpus(sevens, 40, 10, 10),
                  1234);
    ClientUpdate update = client_round(client, /*epochs=*/3);
    CHECK(update.client_id == 0);
    CHECK(update.c_max == 7);
    CHECK(update.weights.class_index == 7);
    CHECK(update.weights.weights.size() == 4);
}

TEST_CASE("untrained client still produces an update with tie-broken c_max") {
    auto corpus = toy_corpus(30, 3, 6, 11);
    Client client(5, toy_params(3, 6, 6), slice_corpus(corpus, 10, 10, 10), 1);
    ClientUpdate update = client_round(client, /*epochs=*/0);
    CHECK(update.client_id == 5);
    CHECK(update.c_max == 0);  // all-zero scores, lowest index wins
    CHECK(update.weights.weights.size() == 6);
}

TEST_CASE("empty confidence set errors unless the fallback is enabled") {
    auto corpus = toy_corpus(20, 3, 6, 12);
    Client client(2, toy_params(3, 4, 6), slice_corpus(corpus, 10, 10, 0), 3);
    CHECK_THROWS_AS(client_round(client, 1), Error);

    Client fallback(2, toy_params(3, 4, 6), slice_corpus(corpus, 10, 10, 0), 3);
    ClientUpdate update = client_round(fallback, 1, false,
                                       /*conf_fallback_train=*/true);
    CHECK(update.weights.weights.size() == 4);
}

TEST_CASE("aggregation means member weights per class") {
    SUBCASE("single member is the identity") {
        std::vector<ClientUpdate> updates = {make_update(0, 1, {2, 4, 6})};
        auto clusters = aggregate_updates(updates);
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[1].member_count == 1);
        CHECK(clusters[1].accumulated == std::vector<double>{2.0, 4.0, 6.0});
    }
    SUBCASE("two members average") {
        std::vector<ClientUpdate> updates = {make_update(0, 3, {2, 4}),
                                             make_update(1, 3, {4, 8})};
        auto clusters = aggregate_updates(updates);
        CHECK(clusters[3].accumulated == std::vector<double>{3.0, 6.0});
        CHECK(clusters[3].members == std::vector<int>{0, 1});
    }
    SUBCASE("clients group by class") {
        std::vector<ClientUpdate> updates = {make_update(0, 0, {1}),
                                             make_update(1, 0, {3}),
                                             make_update(2, 5, {9})};
        auto clusters = aggregate_updates(updates);
        CHECK(clusters.size() == 2);
        CHECK(clusters[0].member_count == 2);
        CHECK(clusters[0].accumulated == std::vector<double>{2.0});
        CHECK(clusters[5].member_count == 1);
    }
    SUBCASE("duplicate vectors average to themselves") {
        std::vector<ClientUpdate> updates = {make_update(0, 2, {5, 7}),
                                             make_update(1, 2, {5, 7})};
        auto clusters = aggregate_updates(updates);
        CHECK(clusters[2].accumulated == std::vector<double>{5.0, 7.0});
    }
    SUBCASE("mixed lengths are rejected") {
        std::vector<ClientUpdate> updates = {make_update(0, 1, {1, 2}),
                                             make_update(1, 1, {1, 2, 3})};
        CHECK_THROWS_AS(aggregate_updates(updates), ShapeError);
    }
    SUBCASE("arrival order does not matter") {
        std::vector<ClientUpdate> forward = {make_update(0, 1, {1, 10}),
                                             make_update(1, 1, {3, 20}),
                                             make_update(2, 4, {7, 7})};
        auto reversed = forward;
        std::reverse(reversed.begin(), reversed.end());
        auto a = aggregate_updates(forward);
        auto b = aggregate_updates(reversed);
        REQUIRE(a.size() == b.size());
        for (const auto& [k, cluster] : a) {
            CHECK(cluster.accumulated == b[k].accumulated);
            CHECK(cluster.members == b[k].members);
        }
    }
}

TEST_CASE("aggregation matches the group-and-mean oracle") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const int clients = 1 + int(rng.next_below(10));
        const int classes = 1 + int(rng.next_below(5));
        const std::size_t n = 1 + rng.next_below(16);
        std::vector<ClientUpdate> updates;
        for (int i = 0; i < clients; ++i) {
            std::vector<std::uint32_t> w(n);
            for (auto& v : w) v = std::uint32_t(1 + rng.next_below(100));
            updates.push_back(make_update(i, int(rng.next_below(classes)), w));
        }
        auto clusters = aggregate_updates(updates);
        auto expected = group_and_mean(updates);
        REQUIRE(clusters.size() == expected.size());
        for (const auto& [k, cluster] : clusters)
            CHECK(cluster.accumulated == expected[k]);
    }
}

TEST_CASE("distribute_and_apply replaces only the cluster class") {
    auto corpus = toy_corpus(60, 3, 6, 13);
    std::vector<Client> clients;
    clients.emplace_back(0, toy_params(3, 4, 6), slice_corpus(corpus, 10, 5, 5, 0), 1);
    clients.emplace_back(1, toy_params(3, 4, 6), slice_corpus(corpus, 10, 5, 5, 20), 2);

    for (auto& client : clients)
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 4; ++j)
                client.model.bank(c).set_weight(j, std::uint32_t(10 * (c + 1) + j));

    auto before0 = serialize_model(clients[0].model);

    std::map<int, ClusterState> clusters;
    clusters[2] = {2, {100.0, 200.0, 300.0, 400.5}, 2, {0, 1}};
    auto applied = distribute_and_apply(clusters, clients);
    CHECK(applied == std::vector<bool>{true, true});

    for (const auto& client : clients) {
        CHECK(client.model.bank(2).weight(0) == 100);
        CHECK(client.model.bank(2).weight(3) == 401);  // round half up
    }
    // Banks 0 and 1 of client 0 are untouched.
    TMModel reference = deserialize_model(before0);
    for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 4; ++j)
            CHECK(clients[0].model.bank(c).weight(j) ==
                  reference.bank(c).weight(j));

    // A mean of one is an identity up to the integer round trip.
    std::map<int, ClusterState> single;
    single[0] = {0, {10.0, 11.0, 12.0, 13.0}, 1, {1}};
    clients[1].model.set_class_weights(
        ClassWeightVector{0, {10, 11, 12, 13}});
    distribute_and_apply(single, clients);
    CHECK(clients[1].model.bank(0).weight(0) == 10);
    CHECK(clients[1].model.bank(0).weight(3) == 13);
}

TEST_CASE("global average baseline means full matrices") {
    SUBCASE("identity and mean") {
        std::vector<WeightMatrix> one = {{{2u}}};
        CHECK(strategy_global_average(one) == WeightMatrix{{2u}});
        std::vector<WeightMatrix> two = {{{2u}}, {{4u}}};
        CHECK(strategy_global_average(two) == WeightMatrix{{3u}});
    }
    SUBCASE("permutation invariant") {
        std::vector<WeightMatrix> ms = {{{1u, 9u}, {4u, 4u}},
                                        {{3u, 1u}, {8u, 2u}},
                                        {{5u, 5u}, {6u, 9u}}};
        auto forward = strategy_global_average(ms);
        std::reverse(ms.begin(), ms.end());
        CHECK(strategy_global_average(ms) == forward);
    }
    SUBCASE("shape mismatch is rejected") {
        std::vector<WeightMatrix> bad = {{{1u, 2u}}, {{1u}}};
        CHECK_THROWS_AS(strategy_global_average(bad), ShapeError);
    }
}

TEST_CASE("single-client round reports its own accuracy") {
    auto corpus = toy_corpus(40, 3, 6, 14);
    FederationConfig config = toy_federation_config(1, 3, 6);
    std::vector<ClientData> data;
    data.push_back(slice_corpus(corpus, 20, 10, 10));

    Federation federation(config, std::move(data));
    RoundReport report = federation.run_round(1);
    CHECK(report.clusters.size() == 1);
    CHECK(report.per_client_accuracy.size() == 1);
    CHECK(report.mean_accuracy == report.per_client_accuracy[0]);
    auto local = federation.clients()[0].model.evaluate_accuracy(
        std::span<const BinarySample>(federation.clients()[0].data.test));
    CHECK(report.mean_accuracy == local.accuracy);
}

TEST_CASE("rounds keep the cluster partition property and counters") {
    const int M = 6;
    auto corpus = toy_corpus(40 * M, 3, 6, 15);
    FederationConfig config = toy_federation_config(M, 3, 6);
    config.rounds = 3;
    std::vector<ClientData> data;
    for (int i = 0; i < M; ++i)
        data.push_back(slice_corpus(corpus, 20, 10, 10, std::size_t(40 * i)));

    Federation federation(config, std::move(data));
    auto reports = federation.run();
    REQUIRE(reports.size() == 3);
    for (const auto& report : reports) {
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& [class_index, members] : report.clusters) {
            CHECK(class_index >= 0);
            CHECK(class_index < 3);
            CHECK(std::is_sorted(members.begin(), members.end()));
            seen.insert(members.begin(), members.end());
            total += members.size();
        }
        CHECK(total == M);          // every client in exactly one cluster
        CHECK(seen.size() == M);    // no client twice
        CHECK(int(report.clusters.size()) <= std::min(M, 3));
        CHECK(report.client_iterations == M);
        CHECK(report.cluster_iterations == int(report.clusters.size()));
        CHECK(report.upload_bytes ==
              std::uint64_t(M) * (4 * config.tm.clauses_per_class + 8));
        CHECK(report.download_bytes ==
              report.clusters.size() *
                  std::uint64_t(4 * config.tm.clauses_per_class + 4));
        double sum = 0.0;
        for (double a : report.per_client_accuracy) sum += a;
        CHECK(report.mean_accuracy == doctest::Approx(sum / M).epsilon(1e-12));
    }
}

TEST_CASE("federation runs are deterministic and worker-independent") {
    const int M = 4;
    auto corpus = toy_corpus(30 * M, 3, 6, 16);
    auto make_data = [&] {
        std::vector<ClientData> data;
        for (int i = 0; i < M; ++i)
            data.push_back(slice_corpus(corpus, 14, 8, 8, std::size_t(30 * i)));
        return data;
    };

    FederationConfig config = toy_federation_config(M, 3, 6);
    config.rounds = 3;

    config.workers = 1;
    Federation serial(config, make_data());
    auto serial_reports = serial.run();

    config.workers = 4;
    Federation parallel(config, make_data());
    auto parallel_reports = parallel.run();

    REQUIRE(serial_reports.size() == parallel_reports.size());
    for (std::size_t r = 0; r < serial_reports.size(); ++r) {
        CHECK(serial_reports[r].mean_accuracy == parallel_reports[r].mean_accuracy);
        CHECK(serial_reports[r].per_client_accuracy ==
              parallel_reports[r].per_client_accuracy);
        CHECK(serial_reports[r].clusters == parallel_reports[r].clusters);
    }
    for (std::size_t i = 0; i < serial.clients().size(); ++i)
        CHECK(serialize_model(serial.clients()[i].model) ==
              serialize_model(parallel.clients()[i].model));
}

TEST_CASE("global average strategy converges client weights") {
    const int M = 2;
    auto corpus = toy_corpus(36 * M, 3, 6, 17);
    FederationConfig config = toy_federation_config(M, 3, 6);
    config.strategy = Strategy::GlobalAverage;
    config.rounds = 1;
    std::vector<ClientData> data;
    for (int i = 0; i < M; ++i)
        data.push_back(slice_corpus(corpus, 16, 10, 10, std::size_t(36 * i)));

    Federation federation(config, std::move(data));
    RoundReport report = federation.run_round(1);
    CHECK(report.clusters.empty());

    // After one round both clients carry the identical averaged matrix.
    for (int c = 0; c < 3; ++c)
        CHECK(federation.clients()[0].model.get_class_weights(c).weights ==
              federation.clients()[1].model.get_class_weights(c).weights);

    const std::uint64_t matrix_bytes = 3ull * 4 * 4;
    CHECK(report.upload_bytes == M * (matrix_bytes + 4));
    CHECK(report.download_bytes == matrix_bytes + 4);
}

TEST_CASE("client errors are tagged with the client id") {
    auto corpus = toy_corpus(40, 3, 6, 18);
    FederationConfig config = toy_federation_config(2, 3, 6);
    std::vector<ClientData> data;
    data.push_back(slice_corpus(corpus, 10, 5, 5));
    data.push_back(slice_corpus(corpus, 10, 5, 0, 20));  // no confidence set

    Federation federation(config, std::move(data));
    CHECK_THROWS_WITH_AS(federation.run_round(1),
                         doctest::Contains("client 1"), Error);
}

TEST_CASE("federation config validation") {
    FederationConfig config = toy_federation_config(2, 3, 6);
    config.rounds = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = toy_federation_config(2, 3, 6);
    config.client_count = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = toy_federation_config(2, 3, 6);
    config.local_epochs = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);

    // Client data count must match the configured client count.
    auto corpus = toy_corpus(40, 3, 6, 19);
    std::vector<ClientData> data;
    data.push_back(slice_corpus(corpus, 10, 5, 5));
    CHECK_THROWS_AS(Federation(toy_federation_config(2, 3, 6), std::move(data)),
                    ShapeError);
}
