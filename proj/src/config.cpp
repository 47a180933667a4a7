#include "swarmnet/config.hpp"

#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"

namespace swarmnet::config {

namespace {

// Overlays `patch` on `base`, rejecting keys the base does not know and
// values whose JSON type differs (integers are accepted where floats are).
void strict_merge(json& base, const json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string field = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError(field, "unknown key");
        json& slot = base[key];
        if (slot.is_object()) {
            strict_merge(slot, value, field);
            continue;
        }
        const bool both_numbers = slot.is_number() && value.is_number();
        if (!both_numbers && slot.type() != value.type()) throw ConfigError(field, "wrong type (got " + std::string(value.type_name()) + ", expected " + slot.type_name() + ")");
        if (slot.is_number_integer() && !value.is_number_integer()) throw ConfigError(field, "expected an integer");
        if (slot.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0)
            throw ConfigError(field, "must be non-negative");
        slot = value;
    }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + key, e.what());
    }
}

json sim_block(const sim::SimConfig& c) {
    json j = to_json(c);
    j.erase("mode");
    j.erase("seed");
    return j;
}

sim::SimConfig sim_from(const json& j, sim::SimConfig c, const std::string& p) {
    c.n_agents = get<int>(j, "n_agents", p);
    c.well_radius_um = get<double>(j, "well_radius_um", p);
    c.fps = get<double>(j, "fps", p);
    c.pixel_pitch_um = get<double>(j, "pixel_pitch_um", p);
    c.n_frames = get<int>(j, "n_frames", p);
    c.warmup_s = get<double>(j, "warmup_s", p);
    c.substeps = get<int>(j, "substeps", p);
    c.speed_um_s = get<double>(j, "speed_um_s", p);
    c.speed_jitter = get<double>(j, "speed_jitter", p);
    c.alignment_strength = get<double>(j, "alignment_strength", p);
    c.interaction_radius_um = get<double>(j, "interaction_radius_um", p);
    c.noise_sigma = get<double>(j, "noise_sigma", p);
    c.edge_follow_strength = get<double>(j, "edge_follow_strength", p);
    c.edge_layer_um = get<double>(j, "edge_layer_um", p);
    c.vortex_strength = get<double>(j, "vortex_strength", p);
    c.agent_radius_um = get<double>(j, "agent_radius_um", p);
    c.repulsion_strength = get<double>(j, "repulsion_strength", p);
    c.repulsion_radius_um = get<double>(j, "repulsion_radius_um", p);
    c.frame_width = get<int>(j, "frame_width", p);
    c.frame_height = get<int>(j, "frame_height", p);
    c.blob_sigma_um = get<double>(j, "blob_sigma_um", p);
    c.blob_amplitude = get<double>(j, "blob_amplitude", p);
    c.background_level = get<double>(j, "background_level", p);
    c.pixel_noise_sigma = get<double>(j, "pixel_noise_sigma", p);
    c.edge_ring_amplitude = get<double>(j, "edge_ring_amplitude", p);
    c.edge_ring_width_um = get<double>(j, "edge_ring_width_um", p);
    c.edge_ring_jitter = get<double>(j, "edge_ring_jitter", p);
    c.placement_jitter_px = get<double>(j, "placement_jitter_px", p);
    c.annotation_error_px = get<double>(j, "annotation_error_px", p);
    if (j.contains("mode")) c.mode = sim::mode_from_string(get<std::string>(j, "mode", p));
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", p);
    return c;
}

void validate_sim(const sim::SimConfig& c, const std::string& prefix) {
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.field(), e.what());
    }
}

} // namespace

json to_json(const sim::SimConfig& c) {
    return {
        {"mode", sim::to_string(c.mode)},
        {"n_agents", c.n_agents},
        {"well_radius_um", c.well_radius_um},
        {"fps", c.fps},
        {"pixel_pitch_um", c.pixel_pitch_um},
        {"n_frames", c.n_frames},
        {"warmup_s", c.warmup_s},
        {"substeps", c.substeps},
        {"speed_um_s", c.speed_um_s},
        {"speed_jitter", c.speed_jitter},
        {"alignment_strength", c.alignment_strength},
        {"interaction_radius_um", c.interaction_radius_um},
        {"noise_sigma", c.noise_sigma},
        {"edge_follow_strength", c.edge_follow_strength},
        {"edge_layer_um", c.edge_layer_um},
        {"vortex_strength", c.vortex_strength},
        {"agent_radius_um", c.agent_radius_um},
        {"repulsion_strength", c.repulsion_strength},
        {"repulsion_radius_um", c.repulsion_radius_um},
        {"frame_width", c.frame_width},
        {"frame_height", c.frame_height},
        {"blob_sigma_um", c.blob_sigma_um},
        {"blob_amplitude", c.blob_amplitude},
        {"background_level", c.background_level},
        {"pixel_noise_sigma", c.pixel_noise_sigma},
        {"edge_ring_amplitude", c.edge_ring_amplitude},
        {"edge_ring_width_um", c.edge_ring_width_um},
        {"edge_ring_jitter", c.edge_ring_jitter},
        {"placement_jitter_px", c.placement_jitter_px},
        {"annotation_error_px", c.annotation_error_px},
        {"seed", c.seed},
    };
}

sim::SimConfig sim_config_from_json(const json& j) {
    json base = to_json(sim::SimConfig{});
    strict_merge(base, j, "");
    return sim_from(base, sim::SimConfig{}, "");
}

json to_json(const WellRecord& w) {
    return {{"well_id", w.well_id},         {"source_id", w.source_id}, {"centroid_x_px", w.centroid_x_px},
            {"centroid_y_px", w.centroid_y_px}, {"radius_px", w.radius_px}, {"label", to_string(w.label)}};
}

WellRecord well_from_json(const json& j) {
    WellRecord w;
    w.well_id = get<std::string>(j, "well_id", "well.");
    w.source_id = j.value("source_id", w.well_id);
    w.centroid_x_px = get<double>(j, "centroid_x_px", "well.");
    w.centroid_y_px = get<double>(j, "centroid_y_px", "well.");
    w.radius_px = get<double>(j, "radius_px", "well.");
    w.label = label_from_string(j.value("label", std::string("unknown")));
    return w;
}

json to_json(const prep::PreprocessConfig& c) {
    return {{"crop_size", c.crop_size}, {"window", c.window}, {"stride", c.stride}, {"eval_stride", c.eval_stride}};
}

json to_json(const model::ModelConfig& c) {
    return {
        {"crop_size", c.crop_size},         {"mask_grid", c.mask_grid},
        {"input_size", c.input_size},       {"stem_channels", c.stem_channels},
        {"growth_rate", c.growth_rate},     {"block_layers", c.block_layers},
        {"compression", c.compression},     {"attention_enabled", c.attention_enabled},
        {"kappa", c.kappa},                 {"head_channels", c.head_channels},
        {"head_grid", c.head_grid},         {"max_shift_px", c.max_shift_px},
        {"max_radius_px", c.max_radius_px}, {"bn_momentum", c.bn_momentum},
        {"bn_eps", c.bn_eps},
    };
}

model::ModelConfig model_config_from_json(const json& patch) {
    json j = to_json(model::ModelConfig{});
    strict_merge(j, patch, "model");
    const std::string p = "model.";
    model::ModelConfig c;
    c.crop_size = get<int>(j, "crop_size", p);
    c.mask_grid = get<int>(j, "mask_grid", p);
    c.input_size = get<int>(j, "input_size", p);
    c.stem_channels = get<int>(j, "stem_channels", p);
    c.growth_rate = get<int>(j, "growth_rate", p);
    c.block_layers = get<std::vector<int>>(j, "block_layers", p);
    c.compression = get<double>(j, "compression", p);
    c.attention_enabled = get<bool>(j, "attention_enabled", p);
    c.kappa = get<double>(j, "kappa", p);
    c.head_channels = get<int>(j, "head_channels", p);
    c.head_grid = get<int>(j, "head_grid", p);
    c.max_shift_px = get<double>(j, "max_shift_px", p);
    c.max_radius_px = get<double>(j, "max_radius_px", p);
    c.bn_momentum = get<double>(j, "bn_momentum", p);
    c.bn_eps = get<double>(j, "bn_eps", p);
    return c;
}

json to_json(const train::TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"patience", c.patience},
            {"train_fraction", c.train_fraction},
            {"class_weighting", c.class_weighting}};
}

json to_json(const RunConfig& c) {
    return {
        {"seed", c.seed},
        {"simulation",
         {{"n_positive", c.simulation.n_positive},
          {"n_negative", c.simulation.n_negative},
          {"swarm", sim_block(c.simulation.swarm)},
          {"planktonic", sim_block(c.simulation.planktonic)}}},
        {"preprocess", to_json(c.preprocess)},
        {"model", to_json(c.model)},
        {"training", to_json(c.training)},
        {"evaluation", {{"threshold", c.evaluation.threshold}, {"sweep_points", c.evaluation.sweep_points}}},
        {"paths",
         {{"simulation_dir", c.paths.simulation_dir},
          {"dataset_dir", c.paths.dataset_dir},
          {"run_dir", c.paths.run_dir},
          {"eval_dir", c.paths.eval_dir}}},
    };
}

RunConfig run_config_from_json(const json& patch) {
    const RunConfig defaults;
    json j = to_json(defaults);
    strict_merge(j, patch, "");

    RunConfig c;
    c.seed = get<std::uint64_t>(j, "seed", "");
    const auto& s = j.at("simulation");
    c.simulation.n_positive = get<int>(s, "n_positive", "simulation.");
    c.simulation.n_negative = get<int>(s, "n_negative", "simulation.");
    c.simulation.swarm = sim_from(s.at("swarm"), defaults.simulation.swarm, "simulation.swarm.");
    c.simulation.planktonic = sim_from(s.at("planktonic"), defaults.simulation.planktonic, "simulation.planktonic.");

    const auto& pp = j.at("preprocess");
    c.preprocess.crop_size = get<int>(pp, "crop_size", "preprocess.");
    c.preprocess.window = get<int>(pp, "window", "preprocess.");
    c.preprocess.stride = get<int>(pp, "stride", "preprocess.");
    c.preprocess.eval_stride = get<int>(pp, "eval_stride", "preprocess.");

    c.model = model_config_from_json(j.at("model"));

    const auto& t = j.at("training");
    c.training.epochs = get<int>(t, "epochs", "training.");
    c.training.batch_size = get<int>(t, "batch_size", "training.");
    c.training.learning_rate = get<double>(t, "learning_rate", "training.");
    c.training.beta1 = get<double>(t, "beta1", "training.");
    c.training.beta2 = get<double>(t, "beta2", "training.");
    c.training.adam_eps = get<double>(t, "adam_eps", "training.");
    c.training.patience = get<int>(t, "patience", "training.");
    c.training.train_fraction = get<double>(t, "train_fraction", "training.");
    c.training.class_weighting = get<bool>(t, "class_weighting", "training.");

    const auto& e = j.at("evaluation");
    c.evaluation.threshold = get<double>(e, "threshold", "evaluation.");
    c.evaluation.sweep_points = get<int>(e, "sweep_points", "evaluation.");

    const auto& p = j.at("paths");
    c.paths.simulation_dir = get<std::string>(p, "simulation_dir", "paths.");
    c.paths.dataset_dir = get<std::string>(p, "dataset_dir", "paths.");
    c.paths.run_dir = get<std::string>(p, "run_dir", "paths.");
    c.paths.eval_dir = get<std::string>(p, "eval_dir", "paths.");

    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (simulation.n_positive < 2) throw ConfigError("simulation.n_positive", "must be >= 2");
    if (simulation.n_negative < 2) throw ConfigError("simulation.n_negative", "must be >= 2");
    validate_sim(simulation.swarm, "simulation.swarm.");
    validate_sim(simulation.planktonic, "simulation.planktonic.");
    if (simulation.swarm.mode != sim::Mode::swarm) throw ConfigError("simulation.swarm.mode", "must be swarm");
    if (simulation.planktonic.mode != sim::Mode::planktonic)
        throw ConfigError("simulation.planktonic.mode", "must be planktonic");
    for (const auto* s : {&simulation.swarm, &simulation.planktonic})
        if (s->n_frames < preprocess.window)
            throw ConfigError("simulation." + std::string(sim::to_string(s->mode)) + ".n_frames",
                              "must be >= preprocess.window");
    preprocess.validate();
    model.validate();
    if (model.crop_size != preprocess.crop_size) throw ConfigError("model.crop_size", "must equal preprocess.crop_size");
    training.validate();
    if (!(evaluation.threshold >= 0.0 && evaluation.threshold <= 1.0))
        throw ConfigError("evaluation.threshold", "must be in [0, 1]");
    if (evaluation.sweep_points < 2) throw ConfigError("evaluation.sweep_points", "must be >= 2");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingInputError(path.string());
    json j;
    try {
        j = json::parse(io::read_text(path), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

void apply_override(json& tree, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ValidationError("override must look like key.path=value");
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null()) throw ConfigError(key.substr(0, dot), "is not a section");
        start = dot + 1;
    }
}

} // namespace swarmnet::config
