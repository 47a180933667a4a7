#include "swarmnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "swarmnet/errors.hpp"
#include "swarmnet/evaluation.hpp"
#include "swarmnet/seeds.hpp"

namespace swarmnet::train {

SplitPlan split_dataset(std::span<const WellRecord> wells, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("training.train_fraction", "must be in (0, 1)");
    std::map<Label, std::vector<std::string>> by_class;
    std::set<std::string> seen;
    for (const auto& w : wells) {
        if (w.label == Label::unknown) continue;
        if (!seen.insert(w.well_id).second) throw InconsistencyError("split_dataset: duplicate well id '" + w.well_id + "'");
        by_class[w.label].push_back(w.well_id);
    }
    SplitPlan plan;
    plan.seed = seed;
    for (Label label : {Label::positive, Label::negative}) {
        auto& ids = by_class[label];
        if (ids.size() < 2)
            throw InsufficientDataError("split_dataset: class '" + std::string(to_string(label)) +
                                        "' needs at least 2 wells, has " + std::to_string(ids.size()));
        // Sorting first makes the result independent of input order.
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(derive_seed(seed, to_string(label)));
        std::shuffle(ids.begin(), ids.end(), rng);
        const long n = static_cast<long>(ids.size());
        const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
        plan.train_wells.insert(ids.begin(), ids.begin() + n_train);
        plan.val_wells.insert(ids.begin() + n_train, ids.end());
    }
    return plan;
}

nlohmann::json to_json(const SplitPlan& plan) {
    return {{"seed", plan.seed}, {"train_wells", plan.train_wells}, {"val_wells", plan.val_wells}};
}

SplitPlan split_from_json(const nlohmann::json& j) {
    SplitPlan p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.train_wells = j.at("train_wells").get<std::set<std::string>>();
    p.val_wells = j.at("val_wells").get<std::set<std::string>>();
    return p;
}

double bce_loss(double p, int y) {
    if (std::isnan(p) || p < 0.0 || p > 1.0) throw NumericError("bce_loss: probability outside [0, 1]");
    constexpr double eps = 1e-15;
    p = std::clamp(p, eps, 1.0 - eps);
    return y == 1 ? -std::log(p) : -std::log1p(-p);
}

double bce_with_logit(double logit, int y) {
    if (std::isnan(logit)) throw NumericError("bce_with_logit: NaN logit");
    const double z = std::clamp(logit, -50.0, 50.0);
    // softplus(z) - y z, written to avoid overflow
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return softplus - (y == 1 ? z : 0.0);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("training.epochs", "must be >= 1");
    if (batch_size < 2) throw ConfigError("training.batch_size", "must be >= 2");
    if (!(learning_rate >= 0.0)) throw ConfigError("training.learning_rate", "must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2", "must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("training.adam_eps", "must be > 0");
    if (patience < 1) throw ConfigError("training.patience", "must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("training.train_fraction", "must be in (0, 1)");
}

nlohmann::json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},       {"train_loss", r.train_loss},     {"val_loss", r.val_loss},
            {"val_auc", r.val_auc},   {"val_well_auc", r.val_well_auc}, {"seconds", r.seconds}};
}

BatchLoss weighted_bce_batch(std::span<const double> logits, std::span<const int> targets, std::span<const double> weights) {
    BatchLoss out;
    const auto n = static_cast<double>(logits.size());
    out.d_logits.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.loss += weights[i] * bce_with_logit(logits[i], targets[i]);
        const double z = std::clamp(logits[i], -50.0, 50.0);
        const double p = 1.0 / (1.0 + std::exp(-z));
        out.d_logits[i] = weights[i] * (p - targets[i]) / n;
    }
    out.loss /= n;
    return out;
}

std::vector<double> class_weights(std::span<const Sample> samples, bool enabled) {
    std::vector<double> w(samples.size(), 1.0);
    if (!enabled) return w;
    std::size_t pos = 0, neg = 0;
    for (const auto& s : samples) (s.label == Label::positive ? pos : neg)++;
    if (pos == 0 || neg == 0) return w;
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        w[i] = n / (2.0 * static_cast<double>(samples[i].label == Label::positive ? pos : neg));
    return w;
}

namespace {

int target_of(const Sample& s) { return s.label == Label::positive ? 1 : 0; }

struct ValStats {
    double loss = 0.0;
    double auc = 0.0;
    double well_auc = 0.0;
};

ValStats validate_epoch(model::SwarmClassifier& model, std::span<const Sample> val, std::span<const double> weights,
                        int batch_size) {
    std::vector<double> logits;
    logits.reserve(val.size());
    for (std::size_t b = 0; b < val.size(); b += batch_size) {
        std::vector<const std::vector<double>*> batch;
        for (std::size_t i = b; i < std::min(val.size(), b + batch_size); ++i) batch.push_back(&val[i].input);
        const auto out = model.forward(batch, nn::Phase::inference);
        logits.insert(logits.end(), out.begin(), out.end());
    }
    ValStats st;
    std::vector<eval::ScoredSample> images;
    std::map<std::string, std::pair<Label, std::vector<double>>> wells;
    for (std::size_t i = 0; i < val.size(); ++i) {
        st.loss += weights[i] * bce_with_logit(logits[i], target_of(val[i]));
        const double p = 1.0 / (1.0 + std::exp(-std::clamp(logits[i], -50.0, 50.0)));
        images.push_back({val[i].label, p});
        auto& w = wells[val[i].well_id];
        w.first = val[i].label;
        w.second.push_back(p);
    }
    st.loss /= static_cast<double>(val.size());
    std::vector<eval::ScoredSample> per_well;
    for (const auto& [id, w] : wells)
        per_well.push_back({w.first, std::accumulate(w.second.begin(), w.second.end(), 0.0) / static_cast<double>(w.second.size())});
    try {
        st.auc = eval::roc_auc(images).auc;
        st.well_auc = eval::roc_auc(per_well).auc;
    } catch (const UndefinedMetricError&) {
        st.auc = st.well_auc = std::nan("");
    }
    return st;
}

} // namespace

TrainResult train(model::SwarmClassifier& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.size() < 2) throw InsufficientDataError("train: training split has fewer than 2 images");
    if (val_set.empty()) throw InsufficientDataError("train: validation split is empty");

    const auto train_w = class_weights(train_set, config.class_weighting);
    const auto val_w = class_weights(val_set, config.class_weighting);
    nn::Adam adam(model.trainable_parameters(), {config.learning_rate, config.beta1, config.beta2, config.adam_eps});

    auto params = model.parameters();
    auto snapshot = [&] {
        std::vector<std::vector<double>> s;
        s.reserve(params.size());
        for (const auto* p : params) s.push_back(p->value);
        return s;
    };
    auto best = snapshot();

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<std::size_t> order(train_set.size());

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            // Batch statistics need at least two samples.
            if (end - b < 2) break;
            std::vector<const std::vector<double>*> inputs;
            std::vector<int> targets;
            std::vector<double> weights;
            for (std::size_t i = b; i < end; ++i) {
                inputs.push_back(&train_set[order[i]].input);
                targets.push_back(target_of(train_set[order[i]]));
                weights.push_back(train_w[order[i]]);
            }
            adam.zero_grad();
            const auto logits = model.forward(inputs, nn::Phase::train);
            const auto bl = weighted_bce_batch(logits, targets, weights);
            if (!std::isfinite(bl.loss)) throw DivergenceError(epoch, "non-finite training loss");
            model.backward(bl.d_logits);
            adam.step();
            loss_sum += bl.loss * static_cast<double>(end - b);
            seen += end - b;
        }

        const auto vs = validate_epoch(model, val_set, val_w, config.batch_size);
        if (!std::isfinite(vs.loss)) throw DivergenceError(epoch, "non-finite validation loss");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(seen, 1));
        rec.val_loss = vs.loss;
        rec.val_auc = vs.auc;
        rec.val_well_auc = vs.well_auc;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (vs.loss < result.best_val_loss) {
            result.best_val_loss = vs.loss;
            result.best_epoch = epoch;
            best = snapshot();
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    return result;
}

} // namespace swarmnet::train
