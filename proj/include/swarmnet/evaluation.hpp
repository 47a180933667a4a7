#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmnet/well.hpp"

namespace swarmnet::eval {

// Every metric in this module calls a sample positive iff score >= threshold.

struct ScoredSample {
    Label label = Label::unknown;
    double score = 0.0;
};

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t positives() const noexcept { return tp + fn; }
    std::int64_t negatives() const noexcept { return tn + fp; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const ScoredSample> scored, double threshold);

// TP / (TP + FN)
double sensitivity(const ConfusionCounts& c);
// TN / (TN + FP)
double specificity(const ConfusionCounts& c);

struct SweepPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

// `grid` must be non-empty and strictly increasing.
std::vector<SweepPoint> threshold_sweep(std::span<const ScoredSample> scored, std::span<const double> grid);

// `points` evenly spaced values i / (points - 1) covering [0, 1].
std::vector<double> default_threshold_grid(int points = 101);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) ... (1,1), fpr and tpr non-decreasing
    double auc = 0.0;
};

// Empirical ROC over the distinct scores with trapezoidal area. Tied scores
// produce diagonal segments, so the area equals P(s+ > s-) + 0.5 P(s+ = s-).
RocCurve roc_auc(std::span<const ScoredSample> scored);

struct WellScore {
    std::string well_id;
    Label label = Label::unknown;
    double score = 0.0;
    friend bool operator==(const WellScore&, const WellScore&) = default;
};

struct EvalReport {
    std::vector<WellScore> per_well_scores;
    double threshold = 0.5;
    ConfusionCounts confusion;
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::vector<SweepPoint> sweep;
    std::vector<RocPoint> roc;
    double auc = 0.0;
    std::string dataset_fingerprint;
};

EvalReport build_report(std::vector<WellScore> per_well_scores, double threshold,
                        std::span<const double> grid, std::string dataset_fingerprint = {});

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

std::vector<ScoredSample> scored_samples(std::span<const WellScore> wells);

// Writes <run_id>_sensitivity.svg, <run_id>_specificity.svg and <run_id>_roc.svg.
std::vector<std::filesystem::path> write_plots(const EvalReport& report, const std::filesystem::path& dir,
                                               const std::string& run_id);

} // namespace swarmnet::eval
