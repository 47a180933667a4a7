#include "swarmnet/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "swarmnet/errors.hpp"

namespace swarmnet::eval {

ConfusionCounts confusion(std::span<const ScoredSample> scored, double threshold) {
    if (scored.empty()) throw EmptyInputError("confusion: empty scored list");
    ConfusionCounts c;
    for (const auto& s : scored) {
        if (!std::isfinite(s.score)) throw NumericError("confusion: non-finite score");
        const bool predicted = s.score >= threshold;
        switch (s.label) {
        case Label::positive: predicted ? ++c.tp : ++c.fn; break;
        case Label::negative: predicted ? ++c.fp : ++c.tn; break;
        case Label::unknown: throw InconsistencyError("confusion: sample without a ground-truth label");
        }
    }
    return c;
}

double sensitivity(const ConfusionCounts& c) {
    if (c.positives() == 0) throw UndefinedMetricError("sensitivity undefined: no positive samples");
    return static_cast<double>(c.tp) / static_cast<double>(c.positives());
}

double specificity(const ConfusionCounts& c) {
    if (c.negatives() == 0) throw UndefinedMetricError("specificity undefined: no negative samples");
    return static_cast<double>(c.tn) / static_cast<double>(c.negatives());
}

std::vector<SweepPoint> threshold_sweep(std::span<const ScoredSample> scored, std::span<const double> grid) {
    if (grid.empty()) throw EmptyInputError("threshold_sweep: empty threshold grid");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw InconsistencyError("threshold_sweep: grid must be strictly increasing");
    }
    // Sort once and count with binary search instead of a pass per threshold.
    std::vector<double> pos, neg;
    for (const auto& s : scored) {
        if (!std::isfinite(s.score)) throw NumericError("threshold_sweep: non-finite score");
        if (s.label == Label::positive) pos.push_back(s.score);
        else if (s.label == Label::negative) neg.push_back(s.score);
        else throw InconsistencyError("threshold_sweep: sample without a ground-truth label");
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    std::vector<SweepPoint> out;
    out.reserve(grid.size());
    for (double t : grid) {
        ConfusionCounts c;
        c.fn = std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
        c.tp = static_cast<std::int64_t>(pos.size()) - c.fn;
        c.tn = std::lower_bound(neg.begin(), neg.end(), t) - neg.begin();
        c.fp = static_cast<std::int64_t>(neg.size()) - c.tn;
        out.push_back({t, sensitivity(c), specificity(c)});
    }
    return out;
}

std::vector<double> default_threshold_grid(int points) {
    if (points < 2) throw InconsistencyError("threshold grid needs at least 2 points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / (points - 1);
    return grid;
}

RocCurve roc_auc(std::span<const ScoredSample> scored) {
    std::vector<ScoredSample> sorted(scored.begin(), scored.end());
    std::int64_t n_pos = 0, n_neg = 0;
    for (const auto& s : sorted) {
        if (!std::isfinite(s.score)) throw NumericError("roc_auc: non-finite score");
        if (s.label == Label::positive) ++n_pos;
        else if (s.label == Label::negative) ++n_neg;
        else throw InconsistencyError("roc_auc: sample without a ground-truth label");
    }
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("roc_auc undefined: need both classes");

    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    // Integer trapezoid accumulator: sum over steps of (fp_new - fp_old) * (tp_new + tp_old), halved at the end.
    std::int64_t twice_area = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double t = sorted[i].score;
        const std::int64_t tp_old = tp, fp_old = fp;
        for (; i < sorted.size() && sorted[i].score == t; ++i) {
            sorted[i].label == Label::positive ? ++tp : ++fp;
        }
        twice_area += (fp - fp_old) * (tp + tp_old);
        roc.points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
    }
    roc.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return roc;
}

std::vector<ScoredSample> scored_samples(std::span<const WellScore> wells) {
    std::vector<ScoredSample> out;
    out.reserve(wells.size());
    for (const auto& w : wells) out.push_back({w.label, w.score});
    return out;
}

EvalReport build_report(std::vector<WellScore> per_well_scores, double threshold, std::span<const double> grid,
                        std::string dataset_fingerprint) {
    EvalReport r;
    r.per_well_scores = std::move(per_well_scores);
    r.threshold = threshold;
    r.dataset_fingerprint = std::move(dataset_fingerprint);
    const auto samples = scored_samples(r.per_well_scores);
    r.confusion = confusion(samples, threshold);
    r.sensitivity = sensitivity(r.confusion);
    r.specificity = specificity(r.confusion);
    r.sweep = threshold_sweep(samples, grid);
    auto roc = roc_auc(samples);
    r.roc = std::move(roc.points);
    r.auc = roc.auc;
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    using nlohmann::json;
    json wells = json::array();
    for (const auto& w : r.per_well_scores)
        wells.push_back({{"well_id", w.well_id}, {"label", to_string(w.label)}, {"score", w.score}});
    json sweep = json::array();
    for (const auto& s : r.sweep)
        sweep.push_back({{"threshold", s.threshold}, {"sensitivity", s.sensitivity}, {"specificity", s.specificity}});
    json roc = json::array();
    for (const auto& p : r.roc) roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
    return {
        {"per_well_scores", wells},
        {"threshold", r.threshold},
        {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
        {"sensitivity", r.sensitivity},
        {"specificity", r.specificity},
        {"sweep", sweep},
        {"roc", roc},
        {"auc", r.auc},
        {"dataset_fingerprint", r.dataset_fingerprint},
    };
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    for (const auto& w : j.at("per_well_scores"))
        r.per_well_scores.push_back(
            {w.at("well_id").get<std::string>(), label_from_string(w.at("label").get<std::string>()), w.at("score").get<double>()});
    r.threshold = j.at("threshold").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("tn").get<std::int64_t>(),
                   c.at("fn").get<std::int64_t>()};
    r.sensitivity = j.at("sensitivity").get<double>();
    r.specificity = j.at("specificity").get<double>();
    for (const auto& s : j.at("sweep"))
        r.sweep.push_back({s.at("threshold").get<double>(), s.at("sensitivity").get<double>(), s.at("specificity").get<double>()});
    for (const auto& p : j.at("roc")) r.roc.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>()});
    r.auc = j.at("auc").get<double>();
    r.dataset_fingerprint = j.value("dataset_fingerprint", std::string{});
    return r;
}

} // namespace swarmnet::eval
