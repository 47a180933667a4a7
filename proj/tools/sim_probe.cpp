// Prints vortex-order statistics per mode and optionally dumps one
// long-exposure image per well for inspection.
//
//   sim_probe [--seeds N] [--dump DIR] [--set simulation.swarm.key=value] ...

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swarmnet/config.hpp"
#include "swarmnet/io.hpp"
#include "swarmnet/preprocess.hpp"
#include "swarmnet/simulator.hpp"

using namespace swarmnet;

int main(int argc, char** argv) {
    CLI::App app{"simulator probe"};
    int seeds = 10;
    std::string dump;
    std::vector<std::string> overrides;
    app.add_option("--seeds", seeds);
    app.add_option("--dump", dump);
    app.add_option("--set", overrides, "simulation.swarm.key=value style overrides");
    CLI11_PARSE(app, argc, argv);

    nlohmann::json tree = nlohmann::json::object();
    for (const auto& o : overrides) config::apply_override(tree, o);
    const auto cfg = config::run_config_from_json(tree);

    for (const auto* base : {&cfg.simulation.swarm, &cfg.simulation.planktonic}) {
        std::vector<double> vops;
        const auto t0 = std::chrono::steady_clock::now();
        for (int s = 0; s < seeds; ++s) {
            sim::SimConfig c = *base;
            c.seed = static_cast<std::uint64_t>(s);
            const std::string id = std::string(sim::to_string(c.mode)) + "_" + std::to_string(s);
            const auto seq = sim::simulate_well(c, id);
            const std::size_t skip = seq.order_trace.size() / 5;
            const double v = std::accumulate(seq.order_trace.begin() + skip, seq.order_trace.end(), 0.0) /
                             static_cast<double>(seq.order_trace.size() - skip);
            vops.push_back(v);
            if (!dump.empty()) {
                std::filesystem::create_directories(dump);
                Raster raw = prep::crop_well(prep::average_frames(seq.frames, 0), seq.well.centroid_x_px,
                                             seq.well.centroid_y_px);
                io::write_pgm16(std::filesystem::path(dump) / (id + ".pgm"), raw);
            }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double mean = std::accumulate(vops.begin(), vops.end(), 0.0) / static_cast<double>(vops.size());
        const auto [lo, hi] = std::minmax_element(vops.begin(), vops.end());
        std::printf("%-10s mean VOP %.3f  min %.3f  max %.3f  (%.2fs per well)\n", std::string(sim::to_string(base->mode)).c_str(),
                    mean, *lo, *hi, secs / seeds);
    }
    return 0;
}
