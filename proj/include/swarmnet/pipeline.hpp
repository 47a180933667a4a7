#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "swarmnet/config.hpp"
#include "swarmnet/evaluation.hpp"
#include "swarmnet/model.hpp"
#include "swarmnet/preprocess.hpp"
#include "swarmnet/simulator.hpp"
#include "swarmnet/training.hpp"

namespace swarmnet::pipeline {

struct WellJob {
    std::string well_id;
    sim::SimConfig config;  // seed already derived
};

// Positive wells first ("swarm_000", ...), then negatives ("plank_000", ...).
std::vector<WellJob> plan_wells(const config::RunConfig& cfg);

struct StageSeeds {
    std::uint64_t split = 0;
    std::uint64_t init = 0;
    std::uint64_t shuffle = 0;
};
StageSeeds stage_seeds(std::uint64_t global_seed);

// ---- on-disk stages (CLI)

// <out>/wells/<id>/ per well plus <out>/wells.csv, written last.
void simulate_to_dir(const config::RunConfig& cfg, const std::filesystem::path& out_dir);

// <out>/images/<id>/w0000.npy ... plus <out>/manifest.csv, written last.
void preprocess_dir(const config::RunConfig& cfg, const std::filesystem::path& sim_dir, const std::filesystem::path& out_dir);

struct TrainOutcome {
    train::SplitPlan split;
    train::TrainResult result;
    std::string dataset_fingerprint;
};

// Run directory: config.json, split.json, metrics.jsonl, weights.bin, seeds.json, model_card.txt.
TrainOutcome train_from_dir(const config::RunConfig& cfg, const std::filesystem::path& dataset_dir,
                            const std::filesystem::path& run_dir, const train::EpochCallback& on_epoch = {});

// Scores the run's validation wells (or every well when the dataset does not
// match the run) and writes report.json plus three plots.
eval::EvalReport evaluate_from_dir(const config::RunConfig& cfg, const std::filesystem::path& dataset_dir,
                                   const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

// ---- in-memory experiment (acceptance and studies)

struct PreparedWell {
    WellRecord well;
    std::vector<train::Sample> samples;  // every augmentation window
};

// Simulates and preprocesses every planned well, keeping only mask-grid inputs.
std::vector<PreparedWell> prepare_dataset(const config::RunConfig& cfg, std::string* manifest_hash = nullptr);

struct ExperimentResult {
    train::SplitPlan split;
    train::TrainResult training;
    eval::EvalReport report;  // held-out wells
    std::string manifest_hash;
};

ExperimentResult run_experiment(const config::RunConfig& cfg, const std::vector<PreparedWell>& wells,
                                const std::string& manifest_hash, const train::EpochCallback& on_epoch = {});

// Windows with start % eval_stride == 0 are used for validation and scoring.
std::vector<model::WellPrediction> score_wells(model::SwarmClassifier& model, const std::vector<const PreparedWell*>& wells,
                                               int eval_stride, double threshold);

} // namespace swarmnet::pipeline
