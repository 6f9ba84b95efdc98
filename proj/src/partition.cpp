#include "tpfl/partition.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

// Largest-remainder integerization of `quota * proportions`; returns counts
// summing exactly to quota. Ties go to the lower class index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions,
                                           std::size_t quota) {
    const std::size_t C = proportions.size();
    std::vector<std::size_t> counts(C);
    std::vector<std::pair<double, std::size_t>> fractions(C);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < C; ++c) {
        double exact = proportions[c] * static_cast<double>(quota);
        counts[c] = static_cast<std::size_t>(exact);
        fractions[c] = {exact - static_cast<double>(counts[c]), c};
        assigned += counts[c];
    }
    std::sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < quota; ++i, ++assigned)
        ++counts[fractions[i % C].second];
    return counts;
}

// Per-class index stacks for one split pool. Pool order is already random;
// popping from the back preserves that.
struct ClassPools {
    std::vector<std::vector<std::uint32_t>> by_class;

    ClassPools(std::span<const std::uint8_t> labels,
               std::span<const std::uint32_t> pool, int class_count)
        : by_class(class_count) {
        for (std::uint32_t idx : pool) by_class[labels[idx]].push_back(idx);
    }

    std::size_t stock(std::size_t c) const { return by_class[c].size(); }
    bool empty() const {
        return std::all_of(by_class.begin(), by_class.end(),
                           [](const auto& v) { return v.empty(); });
    }
    std::size_t take(std::size_t c, std::size_t want,
                     std::vector<std::uint32_t>& out) {
        std::size_t got = std::min(want, by_class[c].size());
        for (std::size_t i = 0; i < got; ++i) {
            out.push_back(by_class[c].back());
            by_class[c].pop_back();
        }
        return got;
    }
};

// Assigns `quota` indices from the pool to one client. When a class runs dry
// the shortfall is spread proportionally over classes that still have stock.
std::vector<std::uint32_t> draw_for_client(ClassPools& pools,
                                           const std::vector<double>& proportions,
                                           std::size_t quota, int client_id,
                                           const char* split_name) {
    const std::size_t C = proportions.size();
    std::vector<std::uint32_t> picked;
    picked.reserve(quota);

    auto targets = largest_remainder(proportions, quota);
    std::size_t deficit = 0;
    std::size_t starved_class = 0;
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t got = pools.take(c, targets[c], picked);
        if (got < targets[c]) starved_class = c;
        deficit += targets[c] - got;
    }

    if (deficit > 0 && !pools.empty()) {
        std::cerr << "[tpfl] warning: " << split_name << " pool for class "
                  << starved_class << " ran dry; redistributing " << deficit
                  << " samples for client " << client_id << "\n";
    }
    while (deficit > 0) {
        std::vector<double> surviving(C, 0.0);
        double total = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            if (pools.stock(c) > 0) {
                surviving[c] = proportions[c];
                total += surviving[c];
            }
        }
        if (total == 0.0) {
            // All classes the client wanted are gone; fall back to whatever
            // classes still have stock, uniformly.
            for (std::size_t c = 0; c < C; ++c)
                if (pools.stock(c) > 0) {
                    surviving[c] = 1.0;
                    total += 1.0;
                }
        }
        if (total == 0.0)
            throw ExhaustionError(std::string(split_name) +
                                  " pool exhausted at client " +
                                  std::to_string(client_id) + ": class " +
                                  std::to_string(starved_class) + " ran out");
        for (auto& p : surviving) p /= total;
        auto extra = largest_remainder(surviving, deficit);
        for (std::size_t c = 0; c < C; ++c) {
            std::size_t got = pools.take(c, extra[c], picked);
            if (got < extra[c]) starved_class = c;
            deficit -= got;
        }
    }
    return picked;
}

}  // namespace

const ClientAssignment* PartitionPlan::find(int client_id) const {
    for (const auto& client : clients)
        if (client.id == client_id) return &client;
    return nullptr;
}

std::vector<double> sample_class_proportions(double alpha, int class_count,
                                             Rng& rng) {
    if (alpha <= 0.0) throw ConfigError("dirichlet alpha must be positive");
    if (class_count < 2) throw ConfigError("dirichlet needs at least 2 classes");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> draws(class_count);
    double sum = 0.0;
    for (auto& d : draws) {
        d = gamma(rng);
        sum += d;
    }
    if (sum <= 0.0) {
        // All gamma draws underflowed (tiny alpha); pick a single class.
        draws[rng.next_below(class_count)] = 1.0;
        sum = 1.0;
    }
    for (auto& d : draws) d /= sum;
    return draws;
}

PartitionPlan assign_samples(std::span<const std::uint8_t> labels,
                             const std::vector<std::vector<double>>& proportions,
                             SplitSizes pool_sizes, Rng& rng) {
    const std::size_t M = proportions.size();
    if (M == 0) throw ConfigError("assign_samples needs at least one client");
    const std::size_t wanted = pool_sizes.train + pool_sizes.test + pool_sizes.conf;
    if (wanted > labels.size())
        throw ExhaustionError("dataset has " + std::to_string(labels.size()) +
                              " samples, split sizes need " + std::to_string(wanted));
    int class_count = 0;
    for (std::uint8_t label : labels)
        class_count = std::max(class_count, int(label) + 1);
    for (const auto& p : proportions)
        if (p.size() != std::size_t(class_count))
            throw ShapeError("proportion vector length does not match class count");

    // Stratified pool draw: each split pool mirrors the global class
    // histogram up to rounding, so a client asking for the global mix can be
    // served within +-2 samples per class. The three pools stay disjoint by
    // popping from mutually exclusive queue positions.
    std::vector<std::uint32_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(order));
    std::vector<std::vector<std::uint32_t>> queue_by_class(class_count);
    for (std::uint32_t idx : order) queue_by_class[labels[idx]].push_back(idx);

    std::vector<double> global_freq(class_count, 0.0);
    for (std::uint8_t label : labels) global_freq[label] += 1.0;
    for (auto& f : global_freq) f /= double(labels.size());

    auto draw_pool = [&](std::size_t size) {
        auto per_class = largest_remainder(global_freq, size);
        std::vector<std::uint32_t> pool;
        pool.reserve(size);
        for (int c = 0; c < class_count; ++c) {
            auto& queue = queue_by_class[c];
            std::size_t take = std::min(per_class[c], queue.size());
            for (std::size_t i = 0; i < take; ++i) {
                pool.push_back(queue.back());
                queue.pop_back();
            }
            // Rounding left this class short; backfill from the largest queue.
            for (std::size_t i = take; i < per_class[c]; ++i) {
                auto largest = std::max_element(
                    queue_by_class.begin(), queue_by_class.end(),
                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
                pool.push_back(largest->back());
                largest->pop_back();
            }
        }
        return pool;
    };
    const std::vector<std::uint32_t> train_pool = draw_pool(pool_sizes.train);
    const std::vector<std::uint32_t> test_pool = draw_pool(pool_sizes.test);
    const std::vector<std::uint32_t> conf_pool = draw_pool(pool_sizes.conf);

    PartitionPlan plan;
    plan.clients.resize(M);
    for (std::size_t i = 0; i < M; ++i) plan.clients[i].id = static_cast<int>(i);

    struct Split {
        std::span<const std::uint32_t> pool;
        std::size_t quota;
        const char* name;
        std::vector<std::uint32_t> ClientAssignment::* member;
    };
    const Split splits[] = {
        {train_pool, pool_sizes.train / M, "train", &ClientAssignment::train},
        {test_pool, pool_sizes.test / M, "test", &ClientAssignment::test},
        {conf_pool, pool_sizes.conf / M, "conf", &ClientAssignment::conf},
    };
    for (const auto& split : splits) {
        ClassPools pools(labels, split.pool, class_count);
        for (std::size_t i = 0; i < M; ++i)
            plan.clients[i].*split.member = draw_for_client(
                pools, proportions[i], split.quota, static_cast<int>(i), split.name);
    }
    return plan;
}

PartitionPlan build_experiment_plan(const ExperimentSpec& spec,
                                    std::span<const std::uint8_t> labels,
                                    SplitSizes pool_sizes) {
    if (spec.index < 1 || spec.index > 5)
        throw ConfigError("experiment index must be in 1..5");
    if (spec.client_count < 1)
        throw ConfigError("experiment needs at least one client");

    int class_count = 0;
    for (std::uint8_t label : labels)
        class_count = std::max(class_count, int(label) + 1);

    Rng rng(derive_seed(spec.seed, Stream::Partition,
                        static_cast<std::uint64_t>(spec.index)));
    const int iid_clients = static_cast<int>(
        spec.iid_fraction() * static_cast<double>(spec.client_count));

    std::vector<std::vector<double>> proportions(spec.client_count);
    for (int i = 0; i < spec.client_count; ++i) {
        double alpha = i < iid_clients ? spec.alpha_iid : spec.alpha_noniid;
        proportions[i] = sample_class_proportions(alpha, class_count, rng);
    }

    PartitionPlan plan = assign_samples(labels, proportions, pool_sizes, rng);
    plan.experiment = spec.index;
    plan.seed = spec.seed;
    plan.alpha_iid = spec.alpha_iid;
    plan.alpha_noniid = spec.alpha_noniid;
    plan.iid_fraction = spec.iid_fraction();
    return plan;
}

std::string plan_to_json(const PartitionPlan& plan) {
    nlohmann::ordered_json doc;
    doc["experiment"] = plan.experiment;
    doc["seed"] = plan.seed;
    doc["alphas"] = {plan.alpha_iid, plan.alpha_noniid};
    doc["iid_fraction"] = plan.iid_fraction;
    doc["clients"] = nlohmann::ordered_json::array();
    for (const auto& client : plan.clients) {
        doc["clients"].push_back({{"id", client.id},
                                  {"train", client.train},
                                  {"test", client.test},
                                  {"conf", client.conf}});
    }
    return doc.dump();
}

PartitionPlan plan_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("plan JSON unparseable: ") + e.what());
    }
    PartitionPlan plan;
    plan.experiment = doc.at("experiment").get<int>();
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.alpha_iid = doc.at("alphas").at(0).get<double>();
    plan.alpha_noniid = doc.at("alphas").at(1).get<double>();
    plan.iid_fraction = doc.at("iid_fraction").get<double>();
    for (const auto& entry : doc.at("clients")) {
        ClientAssignment client;
        client.id = entry.at("id").get<int>();
        client.train = entry.at("train").get<std::vector<std::uint32_t>>();
        client.test = entry.at("test").get<std::vector<std::uint32_t>>();
        client.conf = entry.at("conf").get<std::vector<std::uint32_t>>();
        plan.clients.push_back(std::move(client));
    }
    return plan;
}

}  // namespace tpfl
