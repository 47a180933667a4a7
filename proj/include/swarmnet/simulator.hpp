#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "swarmnet/raster.hpp"
#include "swarmnet/well.hpp"

namespace swarmnet::sim {

enum class Mode { swarm, planktonic };

std::string_view to_string(Mode mode) noexcept;
Mode mode_from_string(std::string_view text);

// Imaging geometry: 2448 x 2048 px spanning about 422 x 353 um.
inline constexpr double kDefaultPixelPitchUm = 422.0 / 2448.0;

struct SimConfig {
    Mode mode = Mode::swarm;
    int n_agents = 400;
    double well_radius_um = 37.0;
    double fps = 29.0;
    double pixel_pitch_um = kDefaultPixelPitchUm;
    int n_frames = 40;
    double warmup_s = 6.0;
    int substeps = 2;

    // Motility. Rates are per second; noise_sigma is in rad / sqrt(s).
    double speed_um_s = 25.0;
    double speed_jitter = 0.1;  // relative standard deviation of per-agent speed
    double alignment_strength = 20.0;
    double interaction_radius_um = 6.0;
    double noise_sigma = 0.6;
    double edge_follow_strength = 4.0;
    double vortex_strength = 0.0;  // relaxation rate toward the tangent of the agent's own circle
    double edge_layer_um = 3.0;
    double agent_radius_um = 0.5;
    double repulsion_strength = 0.0;  // um/s push at contact, fading linearly to zero at repulsion_radius_um
    double repulsion_radius_um = 1.5;

    // Rendering.
    int frame_width = 520;
    int frame_height = 520;
    double blob_sigma_um = 2.0;
    double blob_amplitude = 400.0;
    double background_level = 1000.0;
    double pixel_noise_sigma = 30.0;
    double edge_ring_amplitude = 400.0;  // optical rim of the well, added to every frame
    double edge_ring_width_um = 1.5;
    double edge_ring_jitter = 0.5;     // per-well relative amplitude spread, uniform in [-j, j]
    double placement_jitter_px = 6.0;   // offset of the true well center from the frame center
    double annotation_error_px = 3.0;   // error of the recorded centroid, like a manual pick

    std::uint64_t seed = 0;

    // Throws ConfigError naming the first offending field.
    void validate() const;

    double confinement_radius_um() const noexcept { return well_radius_um - agent_radius_um; }
    double well_radius_px() const noexcept { return well_radius_um / pixel_pitch_um; }
};

// Calibrated mode defaults (mirrored in configs/default.json).
SimConfig swarm_defaults();
SimConfig planktonic_defaults();
SimConfig defaults_for(Mode mode);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Positions in um relative to the well center. Headings in [-pi, pi).
struct AgentState {
    std::vector<Vec2> positions;
    std::vector<double> headings;
    std::vector<double> speeds;
    int sense = 1;  // circulation sense of the vortex drive, +1 counter-clockwise

    std::size_t size() const noexcept { return positions.size(); }
    friend bool operator==(const AgentState&, const AgentState&) = default;
};

double wrap_angle(double a) noexcept;

AgentState initial_state(const SimConfig& config, std::mt19937_64& rng);

// One update of duration dt. Headings relax toward the neighbourhood mean
// heading, toward the tangent of the agent's circle in the state's sense, and
// toward the wall tangent inside the boundary layer, then get rotational
// noise; positions advance along the new heading plus the short-range
// repulsion displacement. Agents that would leave the confinement disk are
// projected back onto it and take the heading of the projected step.
AgentState step_agents(const AgentState& state, const SimConfig& config, double dt, std::mt19937_64& rng);

// Normalized azimuthal projection: 1 for pure circulation (either sense),
// 0 in expectation for isotropic headings, -2/pi/(1-2/pi) for radial motion.
// Agents with zero speed or sitting exactly at the center are skipped.
double vortex_order(const AgentState& state);

struct FrameGeometry {
    int width = 0;
    int height = 0;
    double center_x_px = 0.0;  // true well center, pixel centers at integer coordinates
    double center_y_px = 0.0;
};

// Gaussian blob per agent and an optional bright rim at the well wall over a
// constant background, plus optional pixel noise, clipped at zero. Pass
// rng == nullptr (or pixel_noise_sigma == 0) for a noise-free frame.
Raster render_frame(const AgentState& state, const SimConfig& config, const FrameGeometry& geometry,
                    std::mt19937_64* rng);

struct FrameSequence {
    std::vector<Raster> frames;
    double fps = 0.0;
    double pixel_pitch_um = 0.0;
    WellRecord well;
    std::vector<double> order_trace;  // vortex_order after each recorded frame
};

// Deterministic in config (including seed). `well_id` names the generated well.
FrameSequence simulate_well(const SimConfig& config, const std::string& well_id = "well");

// Directory per well: frame_0000.pgm ... plus meta.json.
void write_well_dir(const std::filesystem::path& dir, const FrameSequence& seq, const SimConfig& config);
FrameSequence read_well_dir(const std::filesystem::path& dir);

} // namespace swarmnet::sim
