#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "swarmnet/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;  // stdout and stderr
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(SWARMNET_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) r.output += buf;
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Six small wells, one short epoch.
const char* tiny_config = R"({
  "seed": 5,
  "simulation": {
    "n_positive": 3, "n_negative": 3,
    "swarm": {"n_frames": 12, "n_agents": 120, "warmup_s": 1.0},
    "planktonic": {"n_frames": 12, "n_agents": 120, "warmup_s": 1.0}
  },
  "preprocess": {"stride": 2, "eval_stride": 2},
  "model": {"input_size": 32, "stem_channels": 4, "growth_rate": 4, "block_layers": [1, 1]},
  "training": {"epochs": 1, "batch_size": 4, "train_fraction": 0.6}
})";

} // namespace

TEST_CASE("command line pipeline") {
    const auto root = fs::temp_directory_path() / "swarmnet_test_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg_path = root / "tiny.json";
    std::ofstream(cfg_path) << tiny_config;
    const std::string c = "--config " + cfg_path.string() + " ";
    const auto sim = root / "sim", data = root / "data", run = root / "run", eval = root / "eval";

    SUBCASE("default config plans 52 + 38 wells") {
        const auto r = cli("show-config");
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.output);
        CHECK(j["simulation"]["n_positive"] == 52);
        CHECK(j["simulation"]["n_negative"] == 38);
        const auto s = cli("show-config --seed 9 --threshold 0.3 --no-attention");
        const auto k = nlohmann::json::parse(s.output);
        CHECK(k["seed"] == 9);
        CHECK(k["evaluation"]["threshold"] == 0.3);
        CHECK(k["model"]["attention_enabled"] == false);
    }

    SUBCASE("full run: simulate, preprocess, train, evaluate, predict") {
        REQUIRE(cli(c + "simulate --out " + sim.string()).code == 0);
        REQUIRE(fs::exists(sim / "wells.csv"));
        REQUIRE(cli(c + "preprocess --in " + sim.string() + " --out " + data.string()).code == 0);
        const auto hash = swarmnet::io::sha256_file(data / "manifest.csv");

        // Same config and seed: byte-identical manifest.
        const auto sim2 = root / "sim2", data2 = root / "data2";
        REQUIRE(cli(c + "simulate --out " + sim2.string()).code == 0);
        REQUIRE(cli(c + "preprocess --in " + sim2.string() + " --out " + data2.string()).code == 0);
        CHECK(swarmnet::io::sha256_file(data2 / "manifest.csv") == hash);

        REQUIRE(cli(c + "train --in " + data.string() + " --out " + run.string()).code == 0);
        for (const char* f : {"weights.bin", "split.json", "metrics.jsonl", "seeds.json", "config.json", "model_card.txt"})
            CHECK_MESSAGE(fs::exists(run / f), f);
        CHECK(swarmnet::io::read_text(run / "model_card.txt").find(hash) != std::string::npos);

        const auto ev = cli(c + "evaluate --in " + data.string() + " --run " + run.string() + " --out " + eval.string());
        REQUIRE(ev.code == 0);
        const auto report = nlohmann::json::parse(swarmnet::io::read_text(eval / "report.json"));
        CHECK(report["dataset_fingerprint"] == hash);
        int svg = 0;
        for (const auto& e : fs::directory_iterator(eval)) svg += e.path().extension() == ".svg";
        CHECK(svg == 3);

        const auto pr = cli(c + "predict --frames " + (sim / "wells" / "swarm_000").string() + " --weights " +
                            (run / "weights.bin").string() + " --threshold 0");
        REQUIRE(pr.code == 0);
        CHECK(pr.output.find("probability") != std::string::npos);
        CHECK(pr.output.find("label swarming") != std::string::npos);
    }

    SUBCASE("unwritable output directory fails without a manifest") {
        std::ofstream(root / "plain_file") << "x";
        const auto out = root / "plain_file" / "sim";
        const auto r = cli(c + "simulate --out " + out.string());
        CHECK(r.code == 1);
        CHECK(!fs::exists(out / "wells.csv"));
    }

    SUBCASE("missing upstream artifacts name the path") {
        const auto r = cli(c + "preprocess --in " + (root / "nowhere").string() + " --out " + data.string());
        CHECK(r.code == 1);
        CHECK(r.output.find((root / "nowhere" / "wells.csv").string()) != std::string::npos);
        const auto t = cli(c + "train --in " + (root / "nodata").string() + " --out " + run.string());
        CHECK(t.code == 1);
        CHECK(t.output.find("manifest.csv") != std::string::npos);
        const auto p = cli(c + "predict --frames " + (root / "nowell").string() + " --weights " + (root / "w.bin").string());
        CHECK(p.code == 1);
        CHECK(p.output.find("w.bin") != std::string::npos);
    }

    SUBCASE("usage and config errors exit with 1") {
        CHECK(cli("").code == 1);
        CHECK(cli("simulate --bogus").code == 1);
        CHECK(cli("--config " + (root / "absent.json").string() + " show-config").code == 1);
        CHECK(cli("--set training.epochs=-3 show-config").code == 1);
        CHECK(cli("--set model.kapa=1 show-config").code == 1);
    }

    SUBCASE("runtime failures exit with 2") {
        fs::create_directories(root / "fakerun");
        std::ofstream(root / "fakerun" / "weights.bin") << "not weights";
        fs::create_directories(data);
        std::ofstream(data / "manifest.csv") << "well_id,source_id,label,window_start,path\n";
        const auto r = cli(c + "evaluate --in " + data.string() + " --run " + (root / "fakerun").string() + " --out " + eval.string());
        CHECK(r.code == 2);
    }

    fs::remove_all(root);
}
