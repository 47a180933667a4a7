#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "swarmnet/model.hpp"
#include "swarmnet/preprocess.hpp"
#include "swarmnet/simulator.hpp"
#include "swarmnet/training.hpp"

namespace swarmnet::config {

using nlohmann::json;

struct SimulationPlan {
    int n_positive = 52;
    int n_negative = 38;
    sim::SimConfig swarm = sim::swarm_defaults();
    sim::SimConfig planktonic = sim::planktonic_defaults();
};

struct EvalConfig {
    double threshold = 0.5;
    int sweep_points = 101;
};

struct Paths {
    std::string simulation_dir = "runs/simulation";
    std::string dataset_dir = "runs/dataset";
    std::string run_dir = "runs/train";
    std::string eval_dir = "runs/eval";
};

// Whole pipeline configuration. One global seed; per-stage seeds derive from it.
struct RunConfig {
    std::uint64_t seed = 2024;
    SimulationPlan simulation;
    prep::PreprocessConfig preprocess;
    model::ModelConfig model;
    train::TrainConfig training;
    EvalConfig evaluation;
    Paths paths;

    // Validates every section; throws ConfigError naming the field.
    void validate() const;
};

json to_json(const sim::SimConfig& c);
json to_json(const WellRecord& w);
json to_json(const prep::PreprocessConfig& c);
json to_json(const model::ModelConfig& c);
json to_json(const train::TrainConfig& c);
json to_json(const RunConfig& c);

WellRecord well_from_json(const json& j);
model::ModelConfig model_config_from_json(const json& j);
sim::SimConfig sim_config_from_json(const json& j);

// Merges `j` over the defaults. Unknown keys and type mismatches raise
// ConfigError with the dotted path of the field.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "dotted.key=value" to a config tree; value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_override(json& tree, std::string_view assignment);

} // namespace swarmnet::config
