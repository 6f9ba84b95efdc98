#include "tpfl/dataset.hpp"

#include <string>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

template <typename Bit>
BinarySample from_feature_bits(const std::vector<Bit>& bits, std::uint8_t label) {
    const std::size_t o = bits.size();
    BinarySample sample;
    sample.feature_count = static_cast<std::uint32_t>(o);
    sample.label = label;
    sample.words.assign((2 * o + 63) / 64, 0);
    for (std::size_t k = 0; k < o; ++k) {
        if (bits[k])
            sample.words[k >> 6] |= 1ull << (k & 63);
        else {
            const std::size_t neg = o + k;
            sample.words[neg >> 6] |= 1ull << (neg & 63);
        }
    }
    return sample;
}

}  // namespace

BinarySample binarize(std::span<const std::uint8_t> image, std::uint8_t threshold,
                      std::uint8_t label) {
    std::vector<std::uint8_t> bits(image.size());
    for (std::size_t k = 0; k < image.size(); ++k) bits[k] = image[k] > threshold;
    return from_feature_bits(bits, label);
}

BinarySample sample_from_bits(const std::vector<bool>& features,
                              std::uint8_t label) {
    return from_feature_bits(features, label);
}

ClientData build_client_data(const RawDataset& dataset, const PartitionPlan& plan,
                             int client_id, std::uint8_t threshold) {
    const ClientAssignment* assignment = plan.find(client_id);
    if (!assignment)
        throw Error("unknown client " + std::to_string(client_id) +
                    " (plan covers " + std::to_string(plan.clients.size()) +
                    " clients)");

    auto materialize = [&](const std::vector<std::uint32_t>& indices) {
        std::vector<BinarySample> out;
        out.reserve(indices.size());
        for (std::uint32_t idx : indices)
            out.push_back(
                binarize(dataset.image(idx), threshold, dataset.labels[idx]));
        return out;
    };

    ClientData data;
    data.train = materialize(assignment->train);
    data.test = materialize(assignment->test);
    data.conf = materialize(assignment->conf);
    return data;
}

RawDataset load_dataset(const std::string& name,
                        const std::filesystem::path& data_dir) {
    struct Pair {
        const char* images;
        const char* labels;
        bool required;
    };
    std::vector<Pair> pairs;
    if (name == "mnist" || name == "fashion_mnist") {
        pairs = {{"train-images-idx3-ubyte", "train-labels-idx1-ubyte", true},
                 {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", false}};
    } else if (name == "femnist") {
        pairs = {{"emnist-byclass-train-images-idx3-ubyte",
                  "emnist-byclass-train-labels-idx1-ubyte", true},
                 {"emnist-byclass-test-images-idx3-ubyte",
                  "emnist-byclass-test-labels-idx1-ubyte", false}};
    } else {
        throw ConfigError("unknown dataset '" + name +
                          "' (expected mnist, fashion_mnist or femnist)");
    }

    auto resolve = [&](const char* stem) -> std::filesystem::path {
        for (const char* suffix : {"", ".gz"}) {
            auto candidate = data_dir / (std::string(stem) + suffix);
            if (std::filesystem::exists(candidate)) return candidate;
        }
        return {};
    };

    RawDataset combined;
    bool loaded_any = false;
    for (const auto& pair : pairs) {
        auto images = resolve(pair.images);
        auto labels = resolve(pair.labels);
        if (images.empty() || labels.empty()) {
            if (pair.required)
                throw Error("dataset '" + name + "': missing " +
                            std::string(pair.images) + "[.gz] / " +
                            std::string(pair.labels) + "[.gz] under " +
                            data_dir.string());
            continue;
        }
        RawDataset part = load_idx(images, labels);
        if (!loaded_any) {
            combined = std::move(part);
            loaded_any = true;
        } else {
            combined.append(part);
        }
    }
    return combined;
}

}  // namespace tpfl
