#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmnet/model.hpp"
#include "swarmnet/well.hpp"

namespace swarmnet::train {

// Well-level partition; images of one well never straddle the split.
struct SplitPlan {
    std::set<std::string> train_wells;
    std::set<std::string> val_wells;
    std::uint64_t seed = 0;
    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

// Per-class stratified split: round(train_fraction * n) training wells per
// class, clamped so each class keeps at least one well on each side.
SplitPlan split_dataset(std::span<const WellRecord> wells, double train_fraction, std::uint64_t seed);

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_from_json(const nlohmann::json& j);

// Binary cross-entropy of a probability. p is clamped to [1e-15, 1 - 1e-15];
// NaN or values outside [0, 1] raise NumericError.
double bce_loss(double p, int y);
// Same loss computed from a logit (clamped to +/-50 against overflow).
double bce_with_logit(double logit, int y);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int patience = 10;
    double train_fraction = 0.9;
    bool class_weighting = true;  // inverse-frequency sample weights
    std::uint64_t seed = 0;

    void validate() const;
};

// One training/validation example at the model's mask-grid resolution.
struct Sample {
    std::vector<double> input;
    Label label = Label::unknown;
    std::string well_id;
    int window_start = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.0;       // image level
    double val_well_auc = 0.0;  // well level, mean aggregation
    double seconds = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains `model` in place with Adam on weighted BCE. On return the model
// holds the weights of the epoch with the lowest validation loss.
TrainResult train(model::SwarmClassifier& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Mean weighted loss of a batch, with d loss / d logit.
struct BatchLoss {
    double loss = 0.0;
    std::vector<double> d_logits;
};
BatchLoss weighted_bce_batch(std::span<const double> logits, std::span<const int> targets, std::span<const double> weights);

// Inverse-frequency weights N / (2 N_c); all ones when disabled or single-class.
std::vector<double> class_weights(std::span<const Sample> samples, bool enabled);

} // namespace swarmnet::train
