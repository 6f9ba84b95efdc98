#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpfl/rng.hpp"

namespace tpfl {

struct ClientAssignment {
    int id = 0;
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> test;
    std::vector<std::uint32_t> conf;
};

// Per-client sample-index assignments for the three splits. Indices within a
// split never repeat across clients; each client's three sets are drawn from
// one Dirichlet proportion vector.
struct PartitionPlan {
    int experiment = 0;  // 1..5, 0 for hand-built plans
    std::uint64_t seed = 0;
    double alpha_iid = 10000.0;
    double alpha_noniid = 0.05;
    double iid_fraction = 1.0;
    std::vector<ClientAssignment> clients;

    const ClientAssignment* find(int client_id) const;
};

struct ExperimentSpec {
    int index = 1;  // 1..5
    int client_count = 0;
    std::string dataset;
    std::uint64_t seed = 0;
    double alpha_iid = 10000.0;
    double alpha_noniid = 0.05;

    // Experiment 1 is fully IID; 5 fully non-IID; steps of 25% between.
    double iid_fraction() const { return (5.0 - index) / 4.0; }
};

// Global pool sizes for the train/test/confidence splits.
struct SplitSizes {
    std::size_t train = 0;
    std::size_t test = 0;
    std::size_t conf = 0;
};

// Draws p ~ Dir(alpha * 1_C). Entries are nonnegative and sum to 1.
std::vector<double> sample_class_proportions(double alpha, int class_count,
                                             Rng& rng);

// Carves three disjoint index pools out of [0, labels.size()) and assigns each
// pool to clients by their target proportions: largest-remainder rounding of
// proportions to counts, greedy draw per class, proportional redistribution
// over surviving classes when a class pool runs dry. Throws ExhaustionError
// when a whole split pool empties with demand remaining.
PartitionPlan assign_samples(std::span<const std::uint8_t> labels,
                             const std::vector<std::vector<double>>& proportions,
                             SplitSizes pool_sizes, Rng& rng);

// Full experiment plan: the first floor(iid_fraction * M) clients draw their
// proportions with alpha_iid, the rest with alpha_noniid.
PartitionPlan build_experiment_plan(const ExperimentSpec& spec,
                                    std::span<const std::uint8_t> labels,
                                    SplitSizes pool_sizes);

std::string plan_to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const std::string& text);

}  // namespace tpfl
