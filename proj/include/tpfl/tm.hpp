#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tpfl/dataset.hpp"
#include "tpfl/rng.hpp"

namespace tpfl {

struct TMParams {
    int class_count = 2;       // C
    int clauses_per_class = 2; // n, even: even-indexed positive, odd negative
    int feature_count = 1;     // o, literal vector length is 2o
    int ta_states = 127;       // N states per action, TA states live in [1, 2N]
    int threshold = 1000;      // T, feedback threshold
    double sensitivity = 10.0; // s

    void validate() const;  // throws ConfigError naming the offending field
};

// All clause weights of one class, both polarities, in clause order.
struct ClassWeightVector {
    int class_index = 0;
    std::vector<std::uint32_t> weights;
};

struct EvalResult {
    double accuracy = 0.0;
    bool empty_set = false;
};

// One class's clause bank: a TA state matrix [n x 2o] plus integer clause
// weights. Include masks are kept bit-packed alongside the states so clause
// evaluation is a handful of word operations instead of a literal-by-literal
// scan.
class ClauseBank {
public:
    ClauseBank(int clause_count, int feature_count, int ta_states);

    int clause_count() const noexcept { return clauses_; }
    int feature_count() const noexcept { return features_; }
    int literal_count() const noexcept { return 2 * features_; }
    int ta_state_count() const noexcept { return ta_states_; }

    std::uint8_t ta_state(int clause, int literal) const {
        return states_[std::size_t(clause) * literals_ + literal];
    }
    // Restores a raw state (snapshot loading, tests); keeps masks in sync.
    void set_ta_state(int clause, int literal, std::uint8_t state);

    std::uint32_t weight(int clause) const { return weights_[clause]; }
    void set_weight(int clause, std::uint32_t w);
    const std::vector<std::uint32_t>& weights() const noexcept { return weights_; }

    // 1 iff every included literal is present in the input. A clause with no
    // includes outputs 1 while training and 0 at inference.
    bool clause_output(int clause, const BinarySample& x, bool inference) const;

    // Weighted vote margin with inference-mode clause outputs (positive minus
    // negative polarity).
    std::int64_t margin(const BinarySample& x) const;

    // Same margin with every clause counted at weight 1.
    std::int64_t unweighted_margin(const BinarySample& x) const;

    // One feedback pass against this bank for a sample with class membership
    // `target`. Clauses whose polarity matches the target receive Type I
    // feedback, the rest Type II, each gated on the margin-derived
    // probability.
    void update(const BinarySample& x, bool target, int threshold,
                double sensitivity, Rng& rng);

    // Replaces all weights with round-half-up integerized values, floored at 1.
    void replace_weights(std::span<const double> averaged);
    void replace_weights(std::span<const std::uint32_t> exact);

    // Internal consistency between states and include masks (tests).
    bool masks_consistent() const;

private:
    bool clause_positive(int clause) const noexcept { return (clause & 1) == 0; }
    void feedback_type_one(int clause, const BinarySample& x, double sensitivity,
                           Rng& rng);
    void feedback_type_two(int clause, const BinarySample& x);
    void bump_state(int clause, int literal, int direction);

    int clauses_;
    int features_;
    int literals_;
    int ta_states_;
    int words_;
    std::vector<std::uint8_t> states_;    // [clause][literal]
    std::vector<std::uint64_t> include_;  // [clause][word], bit = state > N
    std::vector<std::int32_t> include_count_;
    std::vector<std::uint32_t> weights_;
};

class TMModel {
public:
    explicit TMModel(TMParams params);

    const TMParams& params() const noexcept { return params_; }
    int class_count() const noexcept { return params_.class_count; }
    ClauseBank& bank(int c) { return banks_[c]; }
    const ClauseBank& bank(int c) const { return banks_[c]; }

    std::int64_t class_margin(int c, const BinarySample& x) const;
    int predict(const BinarySample& x) const;  // ties -> lowest class index

    // Type I/II feedback to the target class plus one uniformly drawn other
    // class.
    void train_on_sample(const BinarySample& x, Rng& rng);
    void train_epoch(std::span<const BinarySample> train, Rng& rng);

    EvalResult evaluate_accuracy(std::span<const BinarySample> test) const;

    // Per-class sums over the confidence set of the clause-vote margin;
    // unweighted by default, weighted when asked.
    std::vector<std::int64_t> confidence_scores(std::span<const BinarySample> conf,
                                                bool weighted = false) const;

    ClassWeightVector get_class_weights(int c) const;
    void set_class_weights(int c, std::span<const double> averaged);
    void set_class_weights(const ClassWeightVector& v);

private:
    TMParams params_;
    std::vector<ClauseBank> banks_;
};

// Lowest index attaining the maximum score.
int argmax_confidence(std::span<const std::int64_t> scores);

// Versioned binary snapshot ("TPFLTM1"): header C, n, o, N, T as u32 LE and s
// as f64 LE; per class the TA state matrix row-major as offset-encoded signed
// bytes, then the clause weights as u32 LE.
std::vector<std::uint8_t> serialize_model(const TMModel& model);
TMModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const TMModel& model, const std::filesystem::path& path);
TMModel load_model(const std::filesystem::path& path);

}  // namespace tpfl
