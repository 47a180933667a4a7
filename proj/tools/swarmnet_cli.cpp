#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swarmnet/config.hpp"
#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"
#include "swarmnet/model.hpp"
#include "swarmnet/pipeline.hpp"
#include "swarmnet/preprocess.hpp"
#include "swarmnet/simulator.hpp"

namespace fs = std::filesystem;
using namespace swarmnet;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    bool no_attention = false;
    std::vector<std::string> overrides;
    std::string in, out, run, weights, frames;
};

config::RunConfig resolve(const Options& o) {
    nlohmann::json tree = nlohmann::json::object();
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path)) throw MissingInputError(o.config_path);
        tree = nlohmann::json::parse(io::read_text(o.config_path), nullptr, true, true);
    }
    for (const auto& ov : o.overrides) config::apply_override(tree, ov);
    auto cfg = config::run_config_from_json(tree);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threshold) cfg.evaluation.threshold = *o.threshold;
    if (o.no_attention) cfg.model.attention_enabled = false;
    cfg.validate();
    return cfg;
}

fs::path pick(const std::string& flag, const std::string& fallback) { return flag.empty() ? fs::path(fallback) : fs::path(flag); }

int cmd_simulate(const Options& o) {
    const auto cfg = resolve(o);
    const auto out = pick(o.out, cfg.paths.simulation_dir);
    pipeline::simulate_to_dir(cfg, out);
    std::cout << "simulated " << cfg.simulation.n_positive << " swarming + " << cfg.simulation.n_negative
              << " planktonic wells -> " << out.string() << "\n"
              << "wells.csv sha256 " << io::sha256_file(out / "wells.csv") << "\n";
    return 0;
}

int cmd_preprocess(const Options& o) {
    const auto cfg = resolve(o);
    const auto in = pick(o.in, cfg.paths.simulation_dir);
    const auto out = pick(o.out, cfg.paths.dataset_dir);
    pipeline::preprocess_dir(cfg, in, out);
    std::cout << "dataset -> " << out.string() << "\nmanifest sha256 " << prep::manifest_fingerprint(out) << "\n";
    return 0;
}

int cmd_train(const Options& o) {
    const auto cfg = resolve(o);
    const auto in = pick(o.in, cfg.paths.dataset_dir);
    const auto out = pick(o.out, cfg.paths.run_dir);
    const auto res = pipeline::train_from_dir(cfg, in, out, [](const train::EpochRecord& r) {
        std::printf("epoch %3d  train_loss %.5f  val_loss %.5f  val_auc %.4f  (%.1fs)\n", r.epoch, r.train_loss, r.val_loss,
                    r.val_well_auc, r.seconds);
        std::fflush(stdout);
    });
    std::printf("best epoch %d, val loss %.5f -> %s\n", res.result.best_epoch, res.result.best_val_loss, out.string().c_str());
    return 0;
}

int cmd_evaluate(const Options& o) {
    const auto cfg = resolve(o);
    const auto report = pipeline::evaluate_from_dir(cfg, pick(o.in, cfg.paths.dataset_dir), pick(o.run, cfg.paths.run_dir),
                                                    pick(o.out, cfg.paths.eval_dir));
    const auto& c = report.confusion;
    std::printf("wells %zu  TP %ld FP %ld TN %ld FN %ld\n", report.per_well_scores.size(), static_cast<long>(c.tp),
                static_cast<long>(c.fp), static_cast<long>(c.tn), static_cast<long>(c.fn));
    std::printf("sensitivity %.2f%%  specificity %.2f%%  AUC %.4f\n", 100.0 * report.sensitivity, 100.0 * report.specificity,
                report.auc);
    return 0;
}

int cmd_predict(const Options& o) {
    const auto cfg = resolve(o);
    if (o.frames.empty()) throw ConfigError("--frames", "a well directory is required");
    const fs::path weights = o.weights.empty() ? pick(o.run, cfg.paths.run_dir) / "weights.bin" : fs::path(o.weights);
    for (const auto& p : {weights, fs::path(o.frames) / "meta.json"})
        if (!fs::exists(p)) throw MissingInputError(p.string());
    auto model = model::SwarmClassifier::load(weights);
    const auto seq = sim::read_well_dir(o.frames);
    auto images = prep::augment_windows(seq, cfg.preprocess.window, cfg.preprocess.eval_stride, cfg.preprocess.crop_size);
    const auto wp = model::predict_well(model, images, cfg.evaluation.threshold);
    std::printf("well %s  images %zu  probability %.4f  label %s\n", seq.well.well_id.c_str(), images.size(), wp.score,
                wp.label == Label::positive ? "swarming" : "non-swarming");
    return 0;
}

int cmd_show_config(const Options& o) {
    std::cout << config::to_json(resolve(o)).dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"swarmnet: single-image bacterial swarming detection"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_path, "JSON config file (comments allowed)");
    app.add_option("--seed", o.seed, "global seed");
    app.add_option("--threshold", o.threshold, "well-level decision threshold");
    app.add_flag("--no-attention", o.no_attention, "disable the attention mask");
    app.add_option("--set", o.overrides, "override a config field, e.g. training.epochs=5");

    auto* sim = app.add_subcommand("simulate", "generate synthetic wells");
    sim->add_option("--out", o.out, "output directory");

    auto* pre = app.add_subcommand("preprocess", "build long-exposure images and the manifest");
    pre->add_option("--in", o.in, "simulation directory");
    pre->add_option("--out", o.out, "dataset directory");

    auto* tr = app.add_subcommand("train", "train the classifier");
    tr->add_option("--in", o.in, "dataset directory");
    tr->add_option("--out", o.out, "run directory");

    auto* ev = app.add_subcommand("evaluate", "score wells, write report.json and plots");
    ev->add_option("--in", o.in, "dataset directory");
    ev->add_option("--run", o.run, "run directory");
    ev->add_option("--out", o.out, "evaluation directory");

    auto* pr = app.add_subcommand("predict", "classify one well from its frames");
    pr->add_option("--frames", o.frames, "well directory (frames + meta.json)");
    pr->add_option("--weights", o.weights, "weights file");
    pr->add_option("--run", o.run, "run directory holding weights.bin");

    auto* show = app.add_subcommand("show-config", "print the resolved configuration");

    // Global options are accepted after the subcommand too.
    for (auto* sub : {sim, pre, tr, ev, pr, show}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(o);
        if (*pre) return cmd_preprocess(o);
        if (*tr) return cmd_train(o);
        if (*ev) return cmd_evaluate(o);
        if (*pr) return cmd_predict(o);
        if (*show) return cmd_show_config(o);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
