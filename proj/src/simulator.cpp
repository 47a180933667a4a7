#include "swarmnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "swarmnet/config.hpp"
#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"

namespace fs = std::filesystem;

namespace swarmnet::sim {

std::string_view to_string(Mode mode) noexcept { return mode == Mode::swarm ? "swarm" : "planktonic"; }

Mode mode_from_string(std::string_view text) {
    if (text == "swarm") return Mode::swarm;
    if (text == "planktonic") return Mode::planktonic;
    throw ConfigError("mode", "expected 'swarm' or 'planktonic', got '" + std::string(text) + "'");
}

void SimConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(field, what);
    };
    require(n_agents >= 1, "n_agents", "must be >= 1");
    require(well_radius_um > 0.0, "well_radius_um", "must be > 0");
    require(fps > 0.0, "fps", "must be > 0");
    require(pixel_pitch_um > 0.0, "pixel_pitch_um", "must be > 0");
    require(n_frames >= 10, "n_frames", "must be >= 10");
    require(warmup_s >= 0.0, "warmup_s", "must be >= 0");
    require(substeps >= 1, "substeps", "must be >= 1");
    require(speed_um_s >= 0.0, "speed_um_s", "must be >= 0");
    require(speed_jitter >= 0.0, "speed_jitter", "must be >= 0");
    require(alignment_strength >= 0.0, "alignment_strength", "must be >= 0");
    require(interaction_radius_um > 0.0, "interaction_radius_um", "must be > 0");
    require(noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
    require(edge_follow_strength >= 0.0, "edge_follow_strength", "must be >= 0");
    require(vortex_strength >= 0.0, "vortex_strength", "must be >= 0");
    require(edge_layer_um > 0.0, "edge_layer_um", "must be > 0");
    require(agent_radius_um >= 0.0 && agent_radius_um < well_radius_um, "agent_radius_um",
            "must be in [0, well_radius_um)");
    require(repulsion_strength >= 0.0, "repulsion_strength", "must be >= 0");
    require(repulsion_radius_um > 0.0 && repulsion_radius_um <= interaction_radius_um, "repulsion_radius_um",
            "must be in (0, interaction_radius_um]");
    require(frame_width >= 1, "frame_width", "must be >= 1");
    require(frame_height >= 1, "frame_height", "must be >= 1");
    require(blob_sigma_um > 0.0, "blob_sigma_um", "must be > 0");
    require(blob_amplitude >= 0.0, "blob_amplitude", "must be >= 0");
    require(background_level >= 0.0, "background_level", "must be >= 0");
    require(pixel_noise_sigma >= 0.0, "pixel_noise_sigma", "must be >= 0");
    require(edge_ring_amplitude >= 0.0, "edge_ring_amplitude", "must be >= 0");
    require(edge_ring_width_um > 0.0, "edge_ring_width_um", "must be > 0");
    require(edge_ring_jitter >= 0.0 && edge_ring_jitter <= 1.0, "edge_ring_jitter", "must be in [0, 1]");
    require(placement_jitter_px >= 0.0, "placement_jitter_px", "must be >= 0");
    require(annotation_error_px >= 0.0, "annotation_error_px", "must be >= 0");
}

SimConfig swarm_defaults() {
    SimConfig c;
    c.mode = Mode::swarm;
    c.n_frames = 34;
    c.alignment_strength = 2.0;
    c.vortex_strength = 3.0;
    c.noise_sigma = 0.6;
    c.edge_follow_strength = 4.0;
    return c;
}

SimConfig planktonic_defaults() {
    SimConfig c;
    c.mode = Mode::planktonic;
    c.n_frames = 80;
    c.alignment_strength = 0.0;
    c.noise_sigma = 4.0;
    c.edge_follow_strength = 4.0;
    return c;
}

SimConfig defaults_for(Mode mode) { return mode == Mode::swarm ? swarm_defaults() : planktonic_defaults(); }

double wrap_angle(double a) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a < 0.0) a += two_pi;
    a -= std::numbers::pi;
    return a >= std::numbers::pi ? -std::numbers::pi : a;
}

AgentState initial_state(const SimConfig& config, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double r_max = config.confinement_radius_um() * 0.98;

    AgentState s;
    s.positions.reserve(config.n_agents);
    while (static_cast<int>(s.positions.size()) < config.n_agents) {
        const Vec2 p{unit(rng) * r_max, unit(rng) * r_max};
        if (p.x * p.x + p.y * p.y < r_max * r_max) s.positions.push_back(p);
    }
    for (int i = 0; i < config.n_agents; ++i) {
        s.headings.push_back(wrap_angle(angle(rng)));
        s.speeds.push_back(config.speed_um_s * std::max(0.1, 1.0 + config.speed_jitter * gauss(rng)));
    }
    s.sense = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? 1 : -1;
    return s;
}

namespace {

// Uniform bucket grid over the confinement square for neighbour queries.
class CellList {
public:
    CellList(const std::vector<Vec2>& positions, double extent, double cell_size)
        : origin_(-extent), cell_(cell_size), n_(std::max(1, static_cast<int>(std::ceil(2.0 * extent / cell_size)))),
          heads_(static_cast<std::size_t>(n_) * n_, -1), next_(positions.size(), -1) {
        for (std::size_t i = 0; i < positions.size(); ++i) {
            const auto c = cell_of(positions[i]);
            const auto key = static_cast<std::size_t>(c.second) * n_ + c.first;
            next_[i] = heads_[key];
            heads_[key] = static_cast<int>(i);
        }
    }

    template <typename F>
    void for_each_near(const Vec2& p, F&& f) const {
        const auto [cx, cy] = cell_of(p);
        for (int y = std::max(0, cy - 1); y <= std::min(n_ - 1, cy + 1); ++y)
            for (int x = std::max(0, cx - 1); x <= std::min(n_ - 1, cx + 1); ++x)
                for (int j = heads_[static_cast<std::size_t>(y) * n_ + x]; j >= 0; j = next_[j]) f(j);
    }

private:
    std::pair<int, int> cell_of(const Vec2& p) const {
        auto clampi = [this](double v) { return std::clamp(static_cast<int>(std::floor((v - origin_) / cell_)), 0, n_ - 1); };
        return {clampi(p.x), clampi(p.y)};
    }

    double origin_;
    double cell_;
    int n_;
    std::vector<int> heads_;
    std::vector<int> next_;
};

// Tangent direction at p (counter-clockwise when sense >= 0).
double tangent_angle(const Vec2& p, double sense) {
    return sense >= 0.0 ? std::atan2(p.x, -p.y) : std::atan2(-p.x, p.y);
}

} // namespace

AgentState step_agents(const AgentState& state, const SimConfig& config, double dt, std::mt19937_64& rng) {
    const std::size_t n = state.size();
    const double r_conf = config.confinement_radius_um();
    const double r_int2 = config.interaction_radius_um * config.interaction_radius_um;
    const double r_rep2 = config.repulsion_radius_um * config.repulsion_radius_um;
    const double align_gain = 1.0 - std::exp(-config.alignment_strength * dt);
    const double edge_gain = 1.0 - std::exp(-config.edge_follow_strength * dt);
    const double vortex_gain = 1.0 - std::exp(-config.vortex_strength * dt);
    const double noise_scale = config.noise_sigma * std::sqrt(dt);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const CellList cells(state.positions, config.well_radius_um, config.interaction_radius_um);

    AgentState out = state;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 p = state.positions[i];
        double theta = state.headings[i];

        Vec2 push{};
        if (align_gain > 0.0 || config.repulsion_strength > 0.0) {
            double sx = 0.0, sy = 0.0;
            cells.for_each_near(p, [&](int j) {
                const double dx = state.positions[j].x - p.x;
                const double dy = state.positions[j].y - p.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 >= r_int2) return;
                sx += std::cos(state.headings[j]);
                sy += std::sin(state.headings[j]);
                if (d2 > 0.0 && d2 < r_rep2) {
                    const double d = std::sqrt(d2);
                    const double f = config.repulsion_strength * (1.0 - d / config.repulsion_radius_um) / d;
                    push.x -= f * dx;
                    push.y -= f * dy;
                }
            });
            if (align_gain > 0.0 && (sx != 0.0 || sy != 0.0)) theta += align_gain * wrap_angle(std::atan2(sy, sx) - theta);
        }

        const double r = std::hypot(p.x, p.y);
        if (vortex_gain > 0.0 && r > 0.0) {
            // Turning at the orbital rate keeps agents on their circle; relaxing
            // toward the tangent alone lags the curvature and drifts outward.
            const double rate = state.speeds[i] / std::max(r, config.interaction_radius_um);
            theta += state.sense * rate * dt + vortex_gain * wrap_angle(tangent_angle(p, state.sense) - theta);
        }

        const double gap = r_conf - r;
        if (edge_gain > 0.0 && r > 0.0 && gap < config.edge_layer_um) {
            const double weight = std::clamp(1.0 - gap / config.edge_layer_um, 0.0, 1.0);
            // Tangential component of the heading picks the sliding sense.
            const double sense = (-p.y * std::cos(theta) + p.x * std::sin(theta));
            theta += edge_gain * weight * wrap_angle(tangent_angle(p, sense) - theta);
        }

        theta += noise_scale * gauss(rng);

        const double step = state.speeds[i] * dt;
        Vec2 q{p.x + step * std::cos(theta) + dt * push.x, p.y + step * std::sin(theta) + dt * push.y};
        const double rq = std::hypot(q.x, q.y);
        if (rq > r_conf) {
            q = {q.x * (r_conf / rq), q.y * (r_conf / rq)};
            // Heading follows the realized displacement, which slides along
            // the wall and is continuous at the contact point.
            const double mx = q.x - p.x, my = q.y - p.y;
            if (mx != 0.0 || my != 0.0) theta = std::atan2(my, mx);
        }
        out.positions[i] = q;
        out.headings[i] = wrap_angle(theta);
    }
    return out;
}

double vortex_order(const AgentState& state) {
    double acc = 0.0;
    std::size_t counted = 0;
    bool any_moving = false;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.speeds[i] == 0.0) continue;
        any_moving = true;
        const Vec2 p = state.positions[i];
        const double r = std::hypot(p.x, p.y);
        if (r == 0.0) continue;
        const double ux = std::cos(state.headings[i]), uy = std::sin(state.headings[i]);
        acc += std::abs((-p.y * ux + p.x * uy) / r);
        ++counted;
    }
    if (!any_moving) throw UndefinedMetricError("vortex_order: all agent speeds are zero");
    if (counted == 0) throw UndefinedMetricError("vortex_order: no agent away from the well center");
    constexpr double iso = 2.0 / std::numbers::pi;
    return (acc / static_cast<double>(counted) - iso) / (1.0 - iso);
}

Raster render_frame(const AgentState& state, const SimConfig& config, const FrameGeometry& g, std::mt19937_64* rng) {
    Raster frame(g.width, g.height, config.background_level);
    const double sigma_px = config.blob_sigma_um / config.pixel_pitch_um;
    const int half = static_cast<int>(std::ceil(4.0 * sigma_px));
    const double norm1d = std::sqrt(2.0 * std::numbers::pi) * sigma_px;
    std::vector<double> wx(2 * half + 1), wy(2 * half + 1);

    // Truncated 1-D kernels rescaled to the untruncated integral, so every
    // fully visible blob carries exactly amplitude * 2 pi sigma^2.
    auto kernel = [&](double centre, std::vector<double>& w) {
        const int c0 = static_cast<int>(std::lround(centre));
        double s = 0.0;
        for (int k = -half; k <= half; ++k) {
            const double d = (c0 + k) - centre;
            w[k + half] = std::exp(-0.5 * d * d / (sigma_px * sigma_px));
            s += w[k + half];
        }
        for (auto& v : w) v *= norm1d / s;
        return c0;
    };

    for (std::size_t i = 0; i < state.size(); ++i) {
        const double px = g.center_x_px + state.positions[i].x / config.pixel_pitch_um;
        const double py = g.center_y_px + state.positions[i].y / config.pixel_pitch_um;
        const int cx = kernel(px, wx);
        const int cy = kernel(py, wy);
        for (int ky = -half; ky <= half; ++ky) {
            const int y = cy + ky;
            if (y < 0 || y >= g.height) continue;
            const double ay = config.blob_amplitude * wy[ky + half];
            const int x_lo = std::max(-half, -cx);
            const int x_hi = std::min(half, g.width - 1 - cx);
            double* row = &frame(0, y);
            for (int kx = x_lo; kx <= x_hi; ++kx) row[cx + kx] += ay * wx[kx + half];
        }
    }

    if (config.edge_ring_amplitude > 0.0) {
        const double r0 = config.well_radius_px();
        const double w = config.edge_ring_width_um / config.pixel_pitch_um;
        const int y_lo = std::max(0, static_cast<int>(std::floor(g.center_y_px - r0 - 5 * w)));
        const int y_hi = std::min(g.height - 1, static_cast<int>(std::ceil(g.center_y_px + r0 + 5 * w)));
        const int x_lo = std::max(0, static_cast<int>(std::floor(g.center_x_px - r0 - 5 * w)));
        const int x_hi = std::min(g.width - 1, static_cast<int>(std::ceil(g.center_x_px + r0 + 5 * w)));
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                const double d = (std::hypot(x - g.center_x_px, y - g.center_y_px) - r0) / w;
                if (std::abs(d) < 5.0) frame(x, y) += config.edge_ring_amplitude * std::exp(-0.5 * d * d);
            }
    }

    if (rng != nullptr && config.pixel_noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, config.pixel_noise_sigma);
        for (auto& v : frame.pixels()) v += noise(*rng);
    }
    for (auto& v : frame.pixels()) v = std::max(0.0, v);
    return frame;
}

FrameSequence simulate_well(const SimConfig& config, const std::string& well_id) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    auto disk_offset = [&](double radius) {
        if (radius <= 0.0) return Vec2{};
        while (true) {
            const Vec2 v{unit(rng), unit(rng)};
            if (v.x * v.x + v.y * v.y <= 1.0) return Vec2{v.x * radius, v.y * radius};
        }
    };

    const Vec2 placement = disk_offset(config.placement_jitter_px);
    const Vec2 annotation = disk_offset(config.annotation_error_px);
    FrameGeometry geometry{config.frame_width, config.frame_height, config.frame_width / 2.0 + placement.x,
                           config.frame_height / 2.0 + placement.y};

    SimConfig render_config = config;
    if (config.edge_ring_jitter > 0.0) render_config.edge_ring_amplitude *= 1.0 + config.edge_ring_jitter * unit(rng);

    FrameSequence seq;
    seq.fps = config.fps;
    seq.pixel_pitch_um = config.pixel_pitch_um;
    seq.well.well_id = well_id;
    seq.well.source_id = well_id;
    seq.well.centroid_x_px = geometry.center_x_px + annotation.x;
    seq.well.centroid_y_px = geometry.center_y_px + annotation.y;
    seq.well.radius_px = config.well_radius_px();
    seq.well.label = config.mode == Mode::swarm ? Label::positive : Label::negative;

    AgentState state = initial_state(config, rng);
    const double dt = 1.0 / (config.fps * config.substeps);
    const long warmup_steps = std::lround(config.warmup_s * config.fps) * config.substeps;
    for (long s = 0; s < warmup_steps; ++s) state = step_agents(state, config, dt, rng);

    // Motion and pixel noise draw from separate streams so that rendering
    // choices never perturb trajectories.
    std::mt19937_64 noise_rng(config.seed ^ 0x5DEECE66Dull);
    seq.frames.reserve(config.n_frames);
    for (int f = 0; f < config.n_frames; ++f) {
        for (int s = 0; s < config.substeps; ++s) state = step_agents(state, config, dt, rng);
        Raster frame = render_frame(state, render_config, geometry, &noise_rng);
        for (auto& v : frame.pixels()) v = std::clamp(std::round(v), 0.0, 65535.0);
        seq.frames.push_back(std::move(frame));
        seq.order_trace.push_back(vortex_order(state));
    }
    return seq;
}

void write_well_dir(const fs::path& dir, const FrameSequence& seq, const SimConfig& config) {
    fs::create_directories(dir);
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", f);
        io::write_pgm16(dir / name, seq.frames[f]);
    }
    nlohmann::json meta = {
        {"well", config::to_json(seq.well)},
        {"fps", seq.fps},
        {"pixel_pitch_um", seq.pixel_pitch_um},
        {"n_frames", seq.frames.size()},
        {"frame_width", seq.frames.empty() ? 0 : seq.frames.front().width()},
        {"frame_height", seq.frames.empty() ? 0 : seq.frames.front().height()},
        {"seed", config.seed},
        {"label", to_string(seq.well.label)},
        {"order_trace", seq.order_trace},
        {"sim_config", config::to_json(config)},
    };
    io::write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

FrameSequence read_well_dir(const fs::path& dir) {
    const auto meta_path = dir / "meta.json";
    if (!fs::exists(meta_path)) throw MissingInputError(meta_path.string());
    const auto meta = nlohmann::json::parse(io::read_text(meta_path));
    FrameSequence seq;
    seq.fps = meta.at("fps").get<double>();
    seq.pixel_pitch_um = meta.at("pixel_pitch_um").get<double>();
    seq.well = config::well_from_json(meta.at("well"));
    if (meta.contains("order_trace")) seq.order_trace = meta.at("order_trace").get<std::vector<double>>();
    const auto n = meta.at("n_frames").get<std::size_t>();
    for (std::size_t f = 0; f < n; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", f);
        const auto path = dir / name;
        if (!fs::exists(path)) throw MissingInputError(path.string());
        seq.frames.push_back(io::read_pgm16(path));
        if (!seq.frames.back().same_shape(seq.frames.front()))
            throw ShapeError("frame " + path.string() + " differs in size from frame 0");
    }
    return seq;
}

} // namespace swarmnet::sim
