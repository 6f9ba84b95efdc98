#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tpfl/dataset.hpp"
#include "tpfl/federation.hpp"
#include "tpfl/tm.hpp"

namespace tpfl::testing {

inline std::filesystem::path repo_dir() { return TPFL_REPO_DIR; }
inline std::filesystem::path bundled_mnist_dir() { return repo_dir() / "data" / "mnist"; }

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tpfl_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Independent margin oracle: enumerates every clause with a literal-by-literal
// scan over the raw TA states, ignoring the bank's mask machinery.
inline std::int64_t brute_force_margin(const ClauseBank& bank,
                                       const BinarySample& x, bool weighted) {
    std::int64_t total = 0;
    for (int j = 0; j < bank.clause_count(); ++j) {
        bool fired = true;
        int includes = 0;
        for (int k = 0; k < bank.literal_count(); ++k) {
            if (bank.ta_state(j, k) > bank.ta_state_count()) {
                ++includes;
                if (!x.literal(std::size_t(k))) fired = false;
            }
        }
        if (includes == 0) fired = false;  // inference convention
        if (!fired) continue;
        std::int64_t vote = weighted ? std::int64_t(bank.weight(j)) : 1;
        total += (j % 2 == 0) ? vote : -vote;
    }
    return total;
}

// Independent aggregation oracle: group updates by class, sum, divide.
inline std::map<int, std::vector<double>> group_and_mean(
    std::span<const ClientUpdate> updates) {
    std::map<int, std::vector<double>> sums;
    std::map<int, int> counts;
    for (const auto& update : updates) {
        auto& sum = sums[update.c_max];
        if (sum.empty()) sum.assign(update.weights.weights.size(), 0.0);
        for (std::size_t j = 0; j < update.weights.weights.size(); ++j)
            sum[j] += double(update.weights.weights[j]);
        ++counts[update.c_max];
    }
    for (auto& [class_index, sum] : sums)
        for (auto& value : sum) value /= counts[class_index];
    return sums;
}

// Tiny deterministic multi-class corpus: label decides which of the first
// `classes` feature bits is set; remaining bits are seed-dependent noise.
inline std::vector<BinarySample> toy_corpus(int samples, int classes, int features,
                                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<BinarySample> out;
    out.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        int label = int(rng.next_below(classes));
        std::vector<bool> bits(features, false);
        bits[label] = true;
        for (int k = classes; k < features; ++k) bits[k] = rng.bernoulli(0.5);
        out.push_back(sample_from_bits(bits, std::uint8_t(label)));
    }
    return out;
}

}  // namespace tpfl::testing
