#include "swarmnet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"
#include "swarmnet/seeds.hpp"

namespace fs = std::filesystem;

namespace swarmnet::pipeline {

namespace {

// Runs fn(0..n-1) on a small worker pool; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::string indexed(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
    return buf;
}

std::string image_path(const std::string& well_id, int window_start) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%04d.npy", window_start);
    return "images/" + well_id + "/" + buf;
}

struct SimManifestRow {
    std::string well_id;
    Label label;
    std::string dir;
};

std::string sim_manifest_csv(const std::vector<SimManifestRow>& rows) {
    std::ostringstream s;
    s << "well_id,label,dir\n";
    for (const auto& r : rows) s << r.well_id << ',' << to_string(r.label) << ',' << r.dir << '\n';
    return s.str();
}

std::vector<SimManifestRow> read_sim_manifest(const fs::path& sim_dir) {
    std::istringstream in(io::read_text(sim_dir / "wells.csv"));
    std::string line;
    std::getline(in, line);
    if (line != "well_id,label,dir") throw ValidationError("wells.csv: unexpected header");
    std::vector<SimManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, label, dir;
        std::getline(row, id, ',');
        std::getline(row, label, ',');
        std::getline(row, dir, ',');
        rows.push_back({id, label_from_string(label), dir});
    }
    return rows;
}

train::Sample to_sample(const model::SwarmClassifier& model, const prep::LongExposureImage& img) {
    return {model.prepare(img), img.label, img.well_id, img.window_start};
}

// A throwaway classifier only used for its input preparation.
model::SwarmClassifier preparer(const model::ModelConfig& mc) {
    model::ModelConfig c = mc;
    return model::SwarmClassifier(c, 0);
}

std::string json_lines(const std::vector<train::EpochRecord>& history) {
    std::string out;
    for (const auto& r : history) out += train::to_json(r).dump() + "\n";
    return out;
}

} // namespace

std::vector<WellJob> plan_wells(const config::RunConfig& cfg) {
    std::vector<WellJob> jobs;
    int index = 0;
    for (int i = 0; i < cfg.simulation.n_positive; ++i, ++index) {
        WellJob j{indexed("swarm", i), cfg.simulation.swarm};
        j.config.seed = derive_seed(cfg.seed, "simulate", static_cast<std::uint64_t>(index));
        jobs.push_back(std::move(j));
    }
    for (int i = 0; i < cfg.simulation.n_negative; ++i, ++index) {
        WellJob j{indexed("plank", i), cfg.simulation.planktonic};
        j.config.seed = derive_seed(cfg.seed, "simulate", static_cast<std::uint64_t>(index));
        jobs.push_back(std::move(j));
    }
    return jobs;
}

StageSeeds stage_seeds(std::uint64_t global_seed) {
    return {derive_seed(global_seed, "split"), derive_seed(global_seed, "init"), derive_seed(global_seed, "shuffle")};
}

void simulate_to_dir(const config::RunConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    io::ensure_writable_dir(out_dir);
    const auto jobs = plan_wells(cfg);
    fs::create_directories(out_dir / "wells");
    std::vector<SimManifestRow> rows(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto seq = sim::simulate_well(job.config, job.well_id);
        const std::string rel = "wells/" + job.well_id;
        sim::write_well_dir(out_dir / rel, seq, job.config);
        rows[i] = {job.well_id, seq.well.label, rel};
    });
    io::write_text_atomic(out_dir / "config.json", config::to_json(cfg).dump(2) + "\n");
    io::write_text_atomic(out_dir / "wells.csv", sim_manifest_csv(rows));
}

void preprocess_dir(const config::RunConfig& cfg, const fs::path& sim_dir, const fs::path& out_dir) {
    cfg.validate();
    if (!fs::exists(sim_dir / "wells.csv")) throw MissingInputError((sim_dir / "wells.csv").string());
    const auto rows = read_sim_manifest(sim_dir);
    io::ensure_writable_dir(out_dir);
    fs::create_directories(out_dir / "images");
    std::vector<std::vector<prep::ManifestEntry>> per_well(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        const auto& row = rows[i];
        const auto seq = sim::read_well_dir(sim_dir / row.dir);
        const auto images = prep::augment_windows(seq, cfg.preprocess.window, cfg.preprocess.stride, cfg.preprocess.crop_size);
        fs::create_directories(out_dir / "images" / row.well_id);
        for (const auto& img : images) {
            const auto rel = image_path(img.well_id, img.window_start);
            io::write_npy(out_dir / rel, img.pixels);
            per_well[i].push_back({img.well_id, seq.well.source_id, img.label, img.window_start, rel});
        }
        io::write_text_atomic(out_dir / "images" / row.well_id / "well.json", config::to_json(seq.well).dump(2) + "\n");
    });
    std::vector<prep::ManifestEntry> entries;
    for (auto& w : per_well) entries.insert(entries.end(), w.begin(), w.end());
    io::write_text_atomic(out_dir / "manifest.csv", prep::manifest_to_csv(entries));
}

TrainOutcome train_from_dir(const config::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& run_dir,
                            const train::EpochCallback& on_epoch) {
    cfg.validate();
    if (!fs::exists(dataset_dir / "manifest.csv")) throw MissingInputError((dataset_dir / "manifest.csv").string());
    const auto entries = prep::read_manifest(dataset_dir);
    io::ensure_writable_dir(run_dir);

    TrainOutcome outcome;
    outcome.dataset_fingerprint = prep::manifest_fingerprint(dataset_dir);
    const auto seeds = stage_seeds(cfg.seed);
    const auto wells = prep::wells_in(entries);
    outcome.split = train::split_dataset(wells, cfg.training.train_fraction, seeds.split);

    model::SwarmClassifier model(cfg.model, seeds.init);
    std::vector<train::Sample> train_set, val_set;
    for (const auto& e : entries) {
        const bool is_train = outcome.split.train_wells.contains(e.well_id);
        const bool is_val = outcome.split.val_wells.contains(e.well_id);
        if (!is_train && !is_val) continue;
        if (is_val && e.window_start % cfg.preprocess.eval_stride != 0) continue;
        const auto path = dataset_dir / e.path;
        if (!fs::exists(path)) throw MissingInputError(path.string());
        train::Sample s{model.prepare(io::read_npy(path)), e.label, e.well_id, e.window_start};
        (is_train ? train_set : val_set).push_back(std::move(s));
    }

    train::TrainConfig tc = cfg.training;
    tc.seed = seeds.shuffle;
    outcome.result = train::train(model, train_set, val_set, tc, on_epoch);

    io::write_text_atomic(run_dir / "config.json", config::to_json(cfg).dump(2) + "\n");
    io::write_text_atomic(run_dir / "split.json", train::to_json(outcome.split).dump(2) + "\n");
    io::write_text_atomic(run_dir / "metrics.jsonl", json_lines(outcome.result.history));
    const nlohmann::json seeds_json = {{"global", cfg.seed}, {"split", seeds.split}, {"init", seeds.init}, {"shuffle", seeds.shuffle}};
    io::write_text_atomic(run_dir / "seeds.json", seeds_json.dump(2) + "\n");
    model.save(run_dir / "weights.bin");

    std::ostringstream card;
    card << "swarmnet model card\n"
         << "config_hash: " << model.config_hash() << "\n"
         << "dataset_manifest_sha256: " << outcome.dataset_fingerprint << "\n"
         << "seed: " << cfg.seed << "\n"
         << "attention_enabled: " << (cfg.model.attention_enabled ? "true" : "false") << "\n"
         << "trainable_parameters: " << nn::parameter_count(model.trainable_parameters()) << "\n"
         << "train_wells: " << outcome.split.train_wells.size() << " (" << train_set.size() << " images)\n"
         << "val_wells: " << outcome.split.val_wells.size() << " (" << val_set.size() << " images)\n"
         << "best_epoch: " << outcome.result.best_epoch << " of " << outcome.result.history.size() << "\n"
         << "best_val_loss: " << outcome.result.best_val_loss << "\n";
    io::write_text_atomic(run_dir / "model_card.txt", card.str());
    return outcome;
}

eval::EvalReport evaluate_from_dir(const config::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& run_dir,
                                   const fs::path& out_dir) {
    cfg.validate();
    for (const auto& p : {dataset_dir / "manifest.csv", run_dir / "weights.bin"})
        if (!fs::exists(p)) throw MissingInputError(p.string());
    const auto entries = prep::read_manifest(dataset_dir);
    const auto fingerprint = prep::manifest_fingerprint(dataset_dir);
    auto model = model::SwarmClassifier::load(run_dir / "weights.bin");

    // Same dataset as training: only held-out wells count. Otherwise everything is blind test data.
    std::set<std::string> subset;
    if (fs::exists(run_dir / "split.json") && fs::exists(run_dir / "model_card.txt") &&
        io::read_text(run_dir / "model_card.txt").find(fingerprint) != std::string::npos) {
        subset = train::split_from_json(nlohmann::json::parse(io::read_text(run_dir / "split.json"))).val_wells;
    }

    std::map<std::string, std::vector<model::ImageScore>> per_well;
    std::map<std::string, Label> labels;
    std::vector<std::string> order;
    for (const auto& e : entries) {
        if (!subset.empty() && !subset.contains(e.well_id)) continue;
        if (e.window_start % cfg.preprocess.eval_stride != 0) continue;
        const auto path = dataset_dir / e.path;
        if (!fs::exists(path)) throw MissingInputError(path.string());
        prep::LongExposureImage img;
        img.pixels = io::read_npy(path);
        img.well_id = e.well_id;
        if (!per_well.contains(e.well_id)) order.push_back(e.well_id);
        per_well[e.well_id].push_back({e.well_id, model.predict(img)});
        labels[e.well_id] = e.label;
    }
    std::vector<eval::WellScore> scores;
    for (const auto& id : order) {
        const auto wp = model::aggregate_well(per_well[id], cfg.evaluation.threshold);
        scores.push_back({id, labels[id], wp.score});
    }
    const auto grid = eval::default_threshold_grid(cfg.evaluation.sweep_points);
    auto report = eval::build_report(std::move(scores), cfg.evaluation.threshold, grid, fingerprint);

    io::ensure_writable_dir(out_dir);
    io::write_text_atomic(out_dir / "report.json", eval::to_json(report).dump(2) + "\n");
    const std::string run_id = run_dir.filename().empty() ? run_dir.parent_path().filename().string() : run_dir.filename().string();
    eval::write_plots(report, out_dir, run_id.empty() ? "run" : run_id);
    return report;
}

std::vector<PreparedWell> prepare_dataset(const config::RunConfig& cfg, std::string* manifest_hash) {
    cfg.validate();
    const auto prep_model = preparer(cfg.model);
    const auto jobs = plan_wells(cfg);
    std::vector<PreparedWell> out(jobs.size());
    std::vector<std::vector<prep::ManifestEntry>> per_well(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto seq = sim::simulate_well(jobs[i].config, jobs[i].well_id);
        out[i].well = seq.well;
        for (const auto& img : prep::augment_windows(seq, cfg.preprocess.window, cfg.preprocess.stride, cfg.preprocess.crop_size)) {
            out[i].samples.push_back(to_sample(prep_model, img));
            per_well[i].push_back({img.well_id, seq.well.source_id, img.label, img.window_start, image_path(img.well_id, img.window_start)});
        }
    });
    std::vector<prep::ManifestEntry> entries;
    for (auto& w : per_well) entries.insert(entries.end(), w.begin(), w.end());
    if (manifest_hash) *manifest_hash = io::sha256_hex(prep::manifest_to_csv(entries));
    return out;
}

std::vector<model::WellPrediction> score_wells(model::SwarmClassifier& model, const std::vector<const PreparedWell*>& wells,
                                               int eval_stride, double threshold) {
    std::vector<model::WellPrediction> out;
    for (const auto* w : wells) {
        std::vector<const std::vector<double>*> batch;
        for (const auto& s : w->samples)
            if (s.window_start % eval_stride == 0) batch.push_back(&s.input);
        const auto logits = model.forward(batch, nn::Phase::inference);
        std::vector<model::ImageScore> scores;
        for (double z : logits) scores.push_back({w->well.well_id, 1.0 / (1.0 + std::exp(-z))});
        out.push_back(model::aggregate_well(scores, threshold));
    }
    return out;
}

ExperimentResult run_experiment(const config::RunConfig& cfg, const std::vector<PreparedWell>& wells,
                                const std::string& manifest_hash, const train::EpochCallback& on_epoch) {
    cfg.validate();
    ExperimentResult res;
    res.manifest_hash = manifest_hash;
    const auto seeds = stage_seeds(cfg.seed);
    std::vector<WellRecord> records;
    for (const auto& w : wells) records.push_back(w.well);
    res.split = train::split_dataset(records, cfg.training.train_fraction, seeds.split);

    std::vector<train::Sample> train_set, val_set;
    std::vector<const PreparedWell*> held_out;
    for (const auto& w : wells) {
        const bool is_val = res.split.val_wells.contains(w.well.well_id);
        if (is_val) held_out.push_back(&w);
        for (const auto& s : w.samples) {
            if (!is_val) train_set.push_back(s);
            else if (s.window_start % cfg.preprocess.eval_stride == 0) val_set.push_back(s);
        }
    }

    model::SwarmClassifier model(cfg.model, seeds.init);
    train::TrainConfig tc = cfg.training;
    tc.seed = seeds.shuffle;
    res.training = train::train(model, train_set, val_set, tc, on_epoch);

    std::vector<eval::WellScore> scores;
    for (const auto& wp : score_wells(model, held_out, cfg.preprocess.eval_stride, cfg.evaluation.threshold)) {
        const auto it = std::find_if(held_out.begin(), held_out.end(), [&](const PreparedWell* w) { return w->well.well_id == wp.well_id; });
        scores.push_back({wp.well_id, (*it)->well.label, wp.score});
    }
    res.report = eval::build_report(std::move(scores), cfg.evaluation.threshold,
                                    eval::default_threshold_grid(cfg.evaluation.sweep_points), manifest_hash);
    return res;
}

} // namespace swarmnet::pipeline
