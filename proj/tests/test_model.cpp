#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "swarmnet/errors.hpp"
#include "swarmnet/model.hpp"
#include "oracles.hpp"

using namespace swarmnet;
using namespace swarmnet::model;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.mask_grid = 40;
    c.crop_size = 80;
    c.input_size = 16;
    c.stem_channels = 4;
    c.growth_rate = 3;
    c.block_layers = {1, 1};
    c.head_grid = 2;
    c.max_shift_px = 8.0;
    c.max_radius_px = 40.0;
    c.kappa = 0.3;
    return c;
}

std::vector<double> random_input(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

} // namespace

TEST_CASE("mask matches its definition") {
    const AttentionParams p{7.5, -3.25, 90.0, 0.1};
    const auto m = soft_disk_mask(p, 125, 500);
    for (int y = 0; y < 125; y += 7)
        for (int x = 0; x < 125; x += 5) {
            const double qx = (x + 0.5) * 4.0 - 0.5, qy = (y + 0.5) * 4.0 - 0.5;
            REQUIRE(m(x, y) == doctest::Approx(oracle::mask_at(p, qx, qy, 500)).epsilon(1e-14));
        }
}

TEST_CASE("mask is one half on the circle and one at the center when kappa*rho >= 20") {
    const AttentionParams p{0.0, 0.0, 100.0, 0.2};
    const auto m = soft_disk_mask(p, 500, 500);
    CHECK(m(350, 250) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m(250, 150) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(m(250, 250) - 1.0) <= 1e-6);
    for (int x = 251; x < 500; ++x) REQUIRE(m(x, 250) < m(x - 1, 250));
}

TEST_CASE("criterion 4: mask gradient matches central differences") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> shift(-40.0, 40.0), radius(30.0, 230.0), kap(0.05, 0.3);
    const int grid = 50, crop = 500;
    for (int trial = 0; trial < 25; ++trial) {
        AttentionParams p{shift(rng), shift(rng), radius(rng), kap(rng)};
        Raster up(grid, grid);
        std::normal_distribution<double> g(0.0, 1.0);
        for (auto& v : up.pixels()) v = g(rng);
        const auto an = soft_disk_mask_backward(p, up, crop);
        auto loss = [&](const AttentionParams& q) {
            const auto m = soft_disk_mask(q, grid, crop);
            double s = 0.0;
            for (std::size_t k = 0; k < m.pixels().size(); ++k) s += m.pixels()[k] * up.pixels()[k];
            return s;
        };
        const double h = 1e-5;
        auto fd = [&](double AttentionParams::*field) {
            AttentionParams a = p, b = p;
            a.*field += h;
            b.*field -= h;
            return (loss(a) - loss(b)) / (2 * h);
        };
        CHECK(rel_err(an.d_dx, fd(&AttentionParams::dx)) <= 1e-3);
        CHECK(rel_err(an.d_dy, fd(&AttentionParams::dy)) <= 1e-3);
        CHECK(rel_err(an.d_rho, fd(&AttentionParams::rho)) <= 1e-3);
    }
}

TEST_CASE("raw attention gradient through the whole model") {
    auto cfg = small_config();
    SwarmClassifier model(cfg, 3);
    std::mt19937_64 rng(5);
    std::vector<std::vector<double>> batch{random_input(40 * 40, rng), random_input(40 * 40, rng)};
    std::vector<std::array<double, 3>> raw{{0.3, -0.2, 0.4}, {-0.5, 0.1, -0.3}};

    auto total = [&](const std::vector<std::array<double, 3>>& r) {
        model.set_raw_override(r);
        const auto z = model.forward(batch, nn::Phase::inference);
        return 0.7 * z[0] - 1.3 * z[1];
    };
    total(raw);
    const std::vector<double> dz{0.7, -1.3};
    model.backward(dz);
    const auto grad = model.last_raw_grad();
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) {
            auto a = raw, b = raw;
            a[i][k] += h;
            b[i][k] -= h;
            const double fd = (total(a) - total(b)) / (2 * h);
            CHECK(rel_err(grad[i][k], fd) <= 1e-4);
        }
}

TEST_CASE("parameter gradients through head and backbone") {
    auto cfg = small_config();
    SwarmClassifier model(cfg, 8);
    std::mt19937_64 rng(9);
    std::vector<std::vector<double>> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_input(40 * 40, rng));
    // Non-zero head output weights so the head receives gradient.
    for (auto* p : model.attention_parameters())
        if (p->name.find("attention.fc") != std::string::npos)
            for (auto& v : p->value) v = 0.05 * std::normal_distribution<double>(0.0, 1.0)(rng);

    const std::vector<double> coeff{0.4, -0.9, 1.1, 0.3};
    auto loss = [&] {
        const auto z = model.forward(batch, nn::Phase::train);
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += coeff[i] * z[i];
        return s;
    };
    for (auto* p : model.trainable_parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    loss();
    model.backward(coeff);

    int checked = 0;
    for (auto* p : model.trainable_parameters()) {
        for (std::size_t k = 0; k < p->value.size(); k += std::max<std::size_t>(1, p->value.size() / 3)) {
            const double keep = p->value[k];
            const double h = 1e-6;
            p->value[k] = keep + h;
            const double lp = loss();
            p->value[k] = keep - h;
            const double lm = loss();
            p->value[k] = keep;
            const double fd = (lp - lm) / (2 * h);
            if (std::abs(fd) < 1e-7 && std::abs(p->grad[k]) < 1e-7) continue;
            CHECK_MESSAGE(rel_err(p->grad[k], fd) <= 1e-3, p->name << "[" << k << "]");
            ++checked;
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("zero-initialized head predicts the centred half-size disk") {
    ModelConfig cfg;
    SwarmClassifier model(cfg, 1);
    std::mt19937_64 rng(2);
    std::vector<std::vector<double>> batch{random_input(125 * 125, rng), random_input(125 * 125, rng)};
    model.forward(batch, nn::Phase::inference);
    for (const auto& p : model.last_attention()) {
        CHECK(p.dx == 0.0);
        CHECK(p.dy == 0.0);
        CHECK(p.rho == 125.0);
    }
}

TEST_CASE("outputs are probabilities and deterministic") {
    auto cfg = small_config();
    SwarmClassifier model(cfg, 4);
    std::mt19937_64 rng(6);
    prep::LongExposureImage img;
    img.pixels = Raster(80, 80);
    for (auto& v : img.pixels.pixels()) v = std::normal_distribution<double>(0.0, 3.0)(rng);
    const double p1 = model.predict(img);
    const double p2 = model.predict(img);
    CHECK(p1 > 0.0);
    CHECK(p1 < 1.0);
    CHECK(p1 == p2);
    const auto x = model.prepare(img);
    const auto z = model.forward(std::vector<std::vector<double>>{x, x}, nn::Phase::inference);
    CHECK(z[0] == z[1]);

    prep::LongExposureImage wrong;
    wrong.pixels = Raster(81, 80);
    CHECK_THROWS_AS(model.prepare(wrong), ShapeError);
}

TEST_CASE("well aggregation") {
    std::vector<ImageScore> s{{"w", 0.2}, {"w", 0.4}};
    const auto wp = aggregate_well(s, 0.3);
    CHECK(wp.score == doctest::Approx(0.3));
    CHECK(wp.label == Label::positive);
    CHECK(aggregate_well(s, 0.31).label == Label::negative);
    std::reverse(s.begin(), s.end());
    CHECK(aggregate_well(s, 0.3).label == Label::positive);
    CHECK_THROWS_AS(aggregate_well(std::vector<ImageScore>{}, 0.5), EmptyInputError);
    std::vector<ImageScore> mixed{{"a", 0.2}, {"b", 0.4}};
    CHECK_THROWS_AS(aggregate_well(mixed, 0.5), InconsistencyError);
}

TEST_CASE("disabled attention keeps the head out of training") {
    auto cfg = small_config();
    cfg.attention_enabled = false;
    SwarmClassifier model(cfg, 1);
    const auto head = model.attention_parameters();
    const auto trainable = model.trainable_parameters();
    for (const auto* p : head) CHECK(std::find(trainable.begin(), trainable.end(), p) == trainable.end());
    CHECK(model.parameters().size() > trainable.size());
}

TEST_CASE("weights round-trip and reject foreign files") {
    auto cfg = small_config();
    SwarmClassifier model(cfg, 12);
    const auto dir = std::filesystem::temp_directory_path() / "swarmnet_test_model";
    std::filesystem::create_directories(dir);
    model.save(dir / "w.bin");
    auto back = SwarmClassifier::load(dir / "w.bin");
    CHECK(back.config_hash() == model.config_hash());

    std::mt19937_64 rng(1);
    std::vector<std::vector<double>> batch{random_input(40 * 40, rng), random_input(40 * 40, rng)};
    CHECK(model.forward(batch, nn::Phase::inference) == back.forward(batch, nn::Phase::inference));

    std::ofstream(dir / "junk.bin") << "not weights at all";
    CHECK_THROWS_AS(SwarmClassifier::load(dir / "junk.bin"), IoError);
    CHECK_THROWS_AS(SwarmClassifier::load(dir / "absent.bin"), MissingInputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("model config validation") {
    ModelConfig c;
    c.input_size = 4;
    c.block_layers = {1, 1, 1, 1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.mask_grid = 600;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
