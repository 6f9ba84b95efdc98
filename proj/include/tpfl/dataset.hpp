#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tpfl/idx.hpp"
#include "tpfl/partition.hpp"

namespace tpfl {

// One binarized sample: a literal vector of length 2*o packed LSB-first into
// 64-bit words. Bits [0, o) are the features, bits [o, 2o) their negations.
struct BinarySample {
    std::vector<std::uint64_t> words;
    std::uint32_t feature_count = 0;
    std::uint8_t label = 0;

    std::size_t literal_count() const noexcept { return 2u * feature_count; }

    bool literal(std::size_t k) const noexcept {
        return (words[k >> 6] >> (k & 63)) & 1u;
    }

    std::span<const std::uint64_t> word_view() const noexcept { return words; }
};

// Pixel > threshold becomes a 1 bit; the negation half is the complement.
BinarySample binarize(std::span<const std::uint8_t> image, std::uint8_t threshold,
                      std::uint8_t label);

// Builds a sample straight from feature bits (tests and toy problems).
BinarySample sample_from_bits(const std::vector<bool>& features,
                              std::uint8_t label);

struct ClientData {
    std::vector<BinarySample> train;
    std::vector<BinarySample> test;
    std::vector<BinarySample> conf;
};

// Materializes one client's three splits from the plan. Throws Error when the
// plan does not cover client_id.
ClientData build_client_data(const RawDataset& dataset, const PartitionPlan& plan,
                             int client_id, std::uint8_t threshold);

// Locates and loads the IDX pair(s) for a named dataset under data_dir.
// The train pair is required; a test pair, when present, is appended to the
// sample pool. Both plain and .gz names are tried.
RawDataset load_dataset(const std::string& name,
                        const std::filesystem::path& data_dir);

}  // namespace tpfl
