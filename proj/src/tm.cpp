#include "tpfl/tm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "tpfl/error.hpp"

namespace tpfl {

void TMParams::validate() const {
    if (class_count < 1) throw ConfigError("class_count must be >= 1");
    if (clauses_per_class < 2 || clauses_per_class % 2 != 0)
        throw ConfigError("clauses_per_class must be even and >= 2");
    if (feature_count < 1) throw ConfigError("feature_count must be >= 1");
    if (ta_states < 1 || ta_states > 127)
        throw ConfigError("ta_states must be in [1, 127]");
    if (threshold < 1) throw ConfigError("threshold must be >= 1");
    if (sensitivity <= 1.0) throw ConfigError("sensitivity must be > 1");
}

// ---------------------------------------------------------------- ClauseBank

ClauseBank::ClauseBank(int clause_count, int feature_count, int ta_states)
    : clauses_(clause_count),
      features_(feature_count),
      literals_(2 * feature_count),
      ta_states_(ta_states),
      words_((literals_ + 63) / 64),
      states_(std::size_t(clause_count) * literals_,
              static_cast<std::uint8_t>(ta_states)),
      include_(std::size_t(clause_count) * words_, 0),
      include_count_(clause_count, 0),
      weights_(clause_count, 1) {}

void ClauseBank::set_ta_state(int clause, int literal, std::uint8_t state) {
    std::uint8_t& slot = states_[std::size_t(clause) * literals_ + literal];
    const bool was_included = slot > ta_states_;
    const bool now_included = state > ta_states_;
    slot = state;
    if (was_included == now_included) return;
    std::uint64_t& word = include_[std::size_t(clause) * words_ + (literal >> 6)];
    const std::uint64_t bit = 1ull << (literal & 63);
    if (now_included) {
        word |= bit;
        ++include_count_[clause];
    } else {
        word &= ~bit;
        --include_count_[clause];
    }
}

void ClauseBank::set_weight(int clause, std::uint32_t w) {
    weights_[clause] = std::max<std::uint32_t>(1, w);
}

bool ClauseBank::clause_output(int clause, const BinarySample& x,
                               bool inference) const {
    if (include_count_[clause] == 0) return !inference;
    const std::uint64_t* inc = include_.data() + std::size_t(clause) * words_;
    const std::uint64_t* lit = x.words.data();
    for (int w = 0; w < words_; ++w)
        if (inc[w] & ~lit[w]) return false;  // an included literal is absent
    return true;
}

std::int64_t ClauseBank::margin(const BinarySample& x) const {
    std::int64_t sum = 0;
    for (int j = 0; j < clauses_; ++j) {
        if (!clause_output(j, x, /*inference=*/true)) continue;
        sum += clause_positive(j) ? std::int64_t(weights_[j])
                                  : -std::int64_t(weights_[j]);
    }
    return sum;
}

std::int64_t ClauseBank::unweighted_margin(const BinarySample& x) const {
    std::int64_t sum = 0;
    for (int j = 0; j < clauses_; ++j) {
        if (!clause_output(j, x, /*inference=*/true)) continue;
        sum += clause_positive(j) ? 1 : -1;
    }
    return sum;
}

void ClauseBank::bump_state(int clause, int literal, int direction) {
    std::uint8_t& slot = states_[std::size_t(clause) * literals_ + literal];
    if (direction > 0) {
        if (slot >= 2 * ta_states_) return;
        ++slot;
        if (slot == ta_states_ + 1) {  // crossed into inclusion
            include_[std::size_t(clause) * words_ + (literal >> 6)] |=
                1ull << (literal & 63);
            ++include_count_[clause];
        }
    } else {
        if (slot <= 1) return;
        --slot;
        if (slot == ta_states_) {  // crossed into exclusion
            include_[std::size_t(clause) * words_ + (literal >> 6)] &=
                ~(1ull << (literal & 63));
            --include_count_[clause];
        }
    }
}

void ClauseBank::feedback_type_one(int clause, const BinarySample& x,
                                   double sensitivity, Rng& rng) {
    const double p_toward = (sensitivity - 1.0) / sensitivity;
    const double p_away = 1.0 / sensitivity;
    if (clause_output(clause, x, /*inference=*/false)) {
        for (int k = 0; k < literals_; ++k) {
            if (x.literal(k)) {
                if (rng.bernoulli(p_toward)) bump_state(clause, k, +1);
            } else if (rng.bernoulli(p_away)) {
                bump_state(clause, k, -1);
            }
        }
        ++weights_[clause];
    } else {
        for (int k = 0; k < literals_; ++k)
            if (rng.bernoulli(p_away)) bump_state(clause, k, -1);
    }
}

void ClauseBank::feedback_type_two(int clause, const BinarySample& x) {
    if (!clause_output(clause, x, /*inference=*/false)) return;
    for (int k = 0; k < literals_; ++k) {
        if (!x.literal(k) &&
            states_[std::size_t(clause) * literals_ + k] <= ta_states_)
            bump_state(clause, k, +1);
    }
    if (weights_[clause] > 1) --weights_[clause];
}

void ClauseBank::update(const BinarySample& x, bool target, int threshold,
                        double sensitivity, Rng& rng) {
    const std::int64_t T = threshold;
    const std::int64_t v = std::clamp(margin(x), -T, T);
    const double p = target ? double(T - v) / double(2 * T)
                            : double(T + v) / double(2 * T);
    for (int j = 0; j < clauses_; ++j) {
        if (!rng.bernoulli(p)) continue;
        if (clause_positive(j) == target)
            feedback_type_one(j, x, sensitivity, rng);
        else
            feedback_type_two(j, x);
    }
}

void ClauseBank::replace_weights(std::span<const double> averaged) {
    if (averaged.size() != weights_.size())
        throw ShapeError("weight vector length " + std::to_string(averaged.size()) +
                         " does not match clause count " +
                         std::to_string(weights_.size()));
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        double rounded = std::floor(averaged[j] + 0.5);  // round half up
        weights_[j] = rounded < 1.0 ? 1u : static_cast<std::uint32_t>(rounded);
    }
}

void ClauseBank::replace_weights(std::span<const std::uint32_t> exact) {
    if (exact.size() != weights_.size())
        throw ShapeError("weight vector length " + std::to_string(exact.size()) +
                         " does not match clause count " +
                         std::to_string(weights_.size()));
    for (std::size_t j = 0; j < weights_.size(); ++j)
        weights_[j] = std::max<std::uint32_t>(1, exact[j]);
}

bool ClauseBank::masks_consistent() const {
    for (int j = 0; j < clauses_; ++j) {
        int count = 0;
        for (int k = 0; k < literals_; ++k) {
            const bool included = ta_state(j, k) > ta_states_;
            const bool bit = (include_[std::size_t(j) * words_ + (k >> 6)] >>
                              (k & 63)) & 1u;
            if (included != bit) return false;
            count += included;
        }
        if (count != include_count_[j]) return false;
    }
    return true;
}

// ------------------------------------------------------------------- TMModel

TMModel::TMModel(TMParams params) : params_(params) {
    params_.validate();
    banks_.reserve(params_.class_count);
    for (int c = 0; c < params_.class_count; ++c)
        banks_.emplace_back(params_.clauses_per_class, params_.feature_count,
                            params_.ta_states);
}

std::int64_t TMModel::class_margin(int c, const BinarySample& x) const {
    return banks_[c].margin(x);
}

int TMModel::predict(const BinarySample& x) const {
    int best = 0;
    std::int64_t best_margin = banks_[0].margin(x);
    for (int c = 1; c < params_.class_count; ++c) {
        std::int64_t m = banks_[c].margin(x);
        if (m > best_margin) {
            best_margin = m;
            best = c;
        }
    }
    return best;
}

void TMModel::train_on_sample(const BinarySample& x, Rng& rng) {
    const int target = x.label;
    if (target >= params_.class_count)
        throw Error("sample label " + std::to_string(target) +
                    " out of range for " + std::to_string(params_.class_count) +
                    " classes");
    banks_[target].update(x, true, params_.threshold, params_.sensitivity, rng);
    if (params_.class_count > 1) {
        int other = static_cast<int>(rng.next_below(params_.class_count - 1));
        if (other >= target) ++other;
        banks_[other].update(x, false, params_.threshold, params_.sensitivity, rng);
    }
}

void TMModel::train_epoch(std::span<const BinarySample> train, Rng& rng) {
    std::vector<std::uint32_t> order(train.size());
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(order));
    for (std::uint32_t idx : order) train_on_sample(train[idx], rng);
}

EvalResult TMModel::evaluate_accuracy(std::span<const BinarySample> test) const {
    if (test.empty()) return {0.0, true};
    std::size_t correct = 0;
    for (const auto& sample : test)
        if (predict(sample) == sample.label) ++correct;
    return {double(correct) / double(test.size()), false};
}

std::vector<std::int64_t> TMModel::confidence_scores(
    std::span<const BinarySample> conf, bool weighted) const {
    std::vector<std::int64_t> scores(params_.class_count, 0);
    for (const auto& sample : conf) {
        for (int c = 0; c < params_.class_count; ++c)
            scores[c] += weighted ? banks_[c].margin(sample)
                                  : banks_[c].unweighted_margin(sample);
    }
    return scores;
}

ClassWeightVector TMModel::get_class_weights(int c) const {
    return {c, banks_[c].weights()};
}

void TMModel::set_class_weights(int c, std::span<const double> averaged) {
    banks_[c].replace_weights(averaged);
}

void TMModel::set_class_weights(const ClassWeightVector& v) {
    banks_[v.class_index].replace_weights(
        std::span<const std::uint32_t>(v.weights));
}

int argmax_confidence(std::span<const std::int64_t> scores) {
    if (scores.empty()) throw Error("argmax over empty score vector");
    int best = 0;
    for (int c = 1; c < int(scores.size()); ++c)
        if (scores[c] > scores[best]) best = c;
    return best;
}

// ----------------------------------------------------------------- snapshot

namespace {

constexpr char kMagic[7] = {'T', 'P', 'F', 'L', 'T', 'M', '1'};
constexpr int kStateOffset = 128;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + 4 > bytes.size()) throw LengthError("model snapshot truncated");
    std::uint32_t v = std::uint32_t(bytes[pos]) | (std::uint32_t(bytes[pos + 1]) << 8) |
                      (std::uint32_t(bytes[pos + 2]) << 16) |
                      (std::uint32_t(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const TMModel& model) {
    const TMParams& p = model.params();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    put_u32(out, std::uint32_t(p.class_count));
    put_u32(out, std::uint32_t(p.clauses_per_class));
    put_u32(out, std::uint32_t(p.feature_count));
    put_u32(out, std::uint32_t(p.ta_states));
    put_u32(out, std::uint32_t(p.threshold));
    std::uint64_t s_bits;
    static_assert(sizeof(double) == 8);
    std::memcpy(&s_bits, &p.sensitivity, 8);
    for (int b = 0; b < 8; ++b) out.push_back(std::uint8_t(s_bits >> (8 * b)));

    for (int c = 0; c < p.class_count; ++c) {
        const ClauseBank& bank = model.bank(c);
        for (int j = 0; j < bank.clause_count(); ++j)
            for (int k = 0; k < bank.literal_count(); ++k)
                out.push_back(
                    std::uint8_t(int(bank.ta_state(j, k)) - kStateOffset));
        for (int j = 0; j < bank.clause_count(); ++j) put_u32(out, bank.weight(j));
    }
    return out;
}

TMModel deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) ||
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a TPFLTM1 model snapshot");
    std::size_t pos = sizeof(kMagic);
    TMParams p;
    p.class_count = int(get_u32(bytes, pos));
    p.clauses_per_class = int(get_u32(bytes, pos));
    p.feature_count = int(get_u32(bytes, pos));
    p.ta_states = int(get_u32(bytes, pos));
    p.threshold = int(get_u32(bytes, pos));
    if (pos + 8 > bytes.size()) throw LengthError("model snapshot truncated");
    std::uint64_t s_bits = 0;
    for (int b = 0; b < 8; ++b) s_bits |= std::uint64_t(bytes[pos + b]) << (8 * b);
    std::memcpy(&p.sensitivity, &s_bits, 8);
    pos += 8;

    TMModel model(p);
    const std::size_t matrix = std::size_t(p.clauses_per_class) * 2 * p.feature_count;
    for (int c = 0; c < p.class_count; ++c) {
        ClauseBank& bank = model.bank(c);
        if (pos + matrix > bytes.size()) throw LengthError("model snapshot truncated");
        for (int j = 0; j < bank.clause_count(); ++j)
            for (int k = 0; k < bank.literal_count(); ++k) {
                int state = int(std::int8_t(bytes[pos++])) + kStateOffset;
                if (state < 1 || state > 2 * p.ta_states)
                    throw FormatError("model snapshot holds TA state " +
                                      std::to_string(state) + " outside [1, " +
                                      std::to_string(2 * p.ta_states) + "]");
                bank.set_ta_state(j, k, std::uint8_t(state));
            }
        for (int j = 0; j < bank.clause_count(); ++j)
            bank.set_weight(j, get_u32(bytes, pos));
    }
    return model;
}

void save_model(const TMModel& model, const std::filesystem::path& path) {
    auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

TMModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace tpfl
