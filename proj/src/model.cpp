#include "swarmnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "swarmnet/config.hpp"
#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"

namespace swarmnet::model {

namespace {

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double grid_coord(int i, int grid, int crop) { return (i + 0.5) * static_cast<double>(crop) / grid - 0.5; }

constexpr char kWeightsMagic[8] = {'S', 'W', 'N', 'E', 'T', 'W', '0', '1'};

} // namespace

Raster soft_disk_mask(const AttentionParams& p, int grid, int crop) {
    Raster m(grid, grid);
    const double cx = crop / 2.0 + p.dx, cy = crop / 2.0 + p.dy;
    for (int y = 0; y < grid; ++y) {
        const double qy = grid_coord(y, grid, crop) - cy;
        for (int x = 0; x < grid; ++x) {
            const double qx = grid_coord(x, grid, crop) - cx;
            m(x, y) = logistic(p.kappa * (p.rho - std::sqrt(qx * qx + qy * qy)));
        }
    }
    return m;
}

MaskGradient soft_disk_mask_backward(const AttentionParams& p, const Raster& upstream, int crop) {
    const int grid = upstream.width();
    const double cx = crop / 2.0 + p.dx, cy = crop / 2.0 + p.dy;
    MaskGradient g;
    for (int y = 0; y < grid; ++y) {
        const double qy = grid_coord(y, grid, crop) - cy;
        for (int x = 0; x < grid; ++x) {
            const double u = upstream(x, y);
            if (u == 0.0) continue;
            const double qx = grid_coord(x, grid, crop) - cx;
            const double r = std::sqrt(qx * qx + qy * qy);
            const double m = logistic(p.kappa * (p.rho - r));
            const double dm_dz = p.kappa * m * (1.0 - m);
            g.d_rho += u * dm_dz;
            if (r > 0.0) {
                // dr/dcx = -(qx)/r, dm/dr = -dm_dz
                g.d_dx += u * dm_dz * qx / r;
                g.d_dy += u * dm_dz * qy / r;
            }
        }
    }
    return g;
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(std::string("model.") + field, what);
    };
    require(crop_size >= 1, "crop_size", "must be >= 1");
    require(mask_grid >= 1 && mask_grid <= crop_size, "mask_grid", "must be in [1, crop_size]");
    require(input_size >= 1 && input_size <= mask_grid, "input_size", "must be in [1, mask_grid]");
    require(stem_channels >= 1, "stem_channels", "must be >= 1");
    require(growth_rate >= 1, "growth_rate", "must be >= 1");
    require(!block_layers.empty(), "block_layers", "needs at least one dense block");
    for (int l : block_layers) require(l >= 1, "block_layers", "every block needs >= 1 layer");
    require((input_size >> block_layers.size()) >= 1, "input_size", "too small for the number of pooling stages");
    require(compression > 0.0 && compression <= 1.0, "compression", "must be in (0, 1]");
    require(kappa > 0.0, "kappa", "must be > 0");
    require(head_channels >= 1, "head_channels", "must be >= 1");
    require(head_grid >= 1 && head_grid <= input_size, "head_grid", "must be in [1, input_size]");
    require(max_shift_px > 0.0, "max_shift_px", "must be > 0");
    require(max_radius_px > 0.0, "max_radius_px", "must be > 0");
    require(bn_momentum > 0.0 && bn_momentum <= 1.0, "bn_momentum", "must be in (0, 1]");
    require(bn_eps > 0.0, "bn_eps", "must be > 0");
}

AttentionParams attention_from_raw(const std::array<double, 3>& raw, const ModelConfig& config) {
    return {config.max_shift_px * std::tanh(raw[0]), config.max_shift_px * std::tanh(raw[1]),
            config.max_radius_px * logistic(raw[2]), config.kappa};
}

WellPrediction aggregate_well(std::span<const ImageScore> images, double threshold) {
    if (images.empty()) throw EmptyInputError("predict_well: no images for well");
    WellPrediction out;
    out.well_id = images.front().well_id;
    double sum = 0.0;
    for (const auto& s : images) {
        if (s.well_id != out.well_id) throw InconsistencyError("predict_well: images from different wells");
        sum += s.probability;
    }
    out.score = sum / static_cast<double>(images.size());
    out.label = out.score >= threshold ? Label::positive : Label::negative;
    return out;
}

// ---------------------------------------------------------------- resampler

nn::Tensor SwarmClassifier::Resampler::apply(const nn::Tensor& x) const {
    if (in == out) return x;
    nn::Tensor y(x.c, x.n, out, out);
    std::vector<double> tmp(static_cast<std::size_t>(in) * out);
    for (int c = 0; c < x.c; ++c)
        for (int ni = 0; ni < x.n; ++ni) {
            const double* s = x.at(c, ni);
            for (int r = 0; r < in; ++r)
                for (int o = 0; o < out; ++o) {
                    double acc = 0.0;
                    for (const auto& t : taps[o]) acc += t.weight * s[r * in + t.index];
                    tmp[static_cast<std::size_t>(r) * out + o] = acc;
                }
            double* d = y.at(c, ni);
            for (int o = 0; o < out; ++o)
                for (const auto& t : taps[o]) {
                    const double* row = tmp.data() + static_cast<std::size_t>(t.index) * out;
                    for (int xx = 0; xx < out; ++xx) d[o * out + xx] += t.weight * row[xx];
                }
        }
    return y;
}

nn::Tensor SwarmClassifier::Resampler::apply_transpose(const nn::Tensor& g) const {
    if (in == out) return g;
    nn::Tensor dx(g.c, g.n, in, in);
    std::vector<double> tmp(static_cast<std::size_t>(in) * out);
    for (int c = 0; c < g.c; ++c)
        for (int ni = 0; ni < g.n; ++ni) {
            const double* s = g.at(c, ni);
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (int o = 0; o < out; ++o)
                for (const auto& t : taps[o]) {
                    double* row = tmp.data() + static_cast<std::size_t>(t.index) * out;
                    for (int xx = 0; xx < out; ++xx) row[xx] += t.weight * s[o * out + xx];
                }
            double* d = dx.at(c, ni);
            for (int r = 0; r < in; ++r)
                for (int o = 0; o < out; ++o) {
                    const double v = tmp[static_cast<std::size_t>(r) * out + o];
                    for (const auto& t : taps[o]) d[r * in + t.index] += t.weight * v;
                }
        }
    return dx;
}

// --------------------------------------------------------------- classifier

SwarmClassifier::SwarmClassifier(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);

    to_input_ = {area_resample_taps(config_.mask_grid, config_.input_size), config_.mask_grid, config_.input_size};
    crop_to_grid_ = {area_resample_taps(config_.crop_size, config_.mask_grid), config_.crop_size, config_.mask_grid};

    head_.emplace<nn::Conv2d>("attention.conv", 1, config_.head_channels, 3, true).init_he(rng);
    head_.emplace<nn::ReLU>();
    head_.emplace<nn::AdaptiveAvgPool>(config_.head_grid);
    head_.emplace<nn::Linear>("attention.fc", config_.head_channels * config_.head_grid * config_.head_grid, 3).zero();

    const double mom = config_.bn_momentum, eps = config_.bn_eps;
    int channels = config_.stem_channels;
    backbone_.emplace<nn::Conv2d>("stem.conv", 1, channels, 3, false).init_he(rng);
    backbone_.emplace<nn::AvgPool2>();
    for (std::size_t b = 0; b < config_.block_layers.size(); ++b) {
        const std::string name = "block" + std::to_string(b);
        auto& block = backbone_.emplace<nn::DenseBlock>(name, channels, config_.block_layers[b], config_.growth_rate, mom, eps, rng);
        channels = block.out_channels();
        if (b + 1 < config_.block_layers.size()) {
            const int reduced = std::max(1, static_cast<int>(std::floor(channels * config_.compression)));
            backbone_.emplace<nn::BatchNorm2d>("transition" + std::to_string(b) + ".bn", channels, mom, eps);
            backbone_.emplace<nn::ReLU>();
            backbone_.emplace<nn::Conv2d>("transition" + std::to_string(b) + ".conv", channels, reduced, 1, false).init_he(rng);
            backbone_.emplace<nn::AvgPool2>();
            channels = reduced;
        }
    }
    backbone_.emplace<nn::BatchNorm2d>("final.bn", channels, mom, eps);
    backbone_.emplace<nn::ReLU>();
    backbone_.emplace<nn::AdaptiveAvgPool>(1);
    backbone_.emplace<nn::Linear>("classifier", channels, 1).init_xavier(rng);
}

std::vector<double> SwarmClassifier::prepare(const Raster& crop) const {
    if (crop.width() != config_.crop_size || crop.height() != config_.crop_size)
        throw ShapeError("model input must be " + std::to_string(config_.crop_size) + "x" +
                         std::to_string(config_.crop_size) + ", got " + std::to_string(crop.width()) + "x" +
                         std::to_string(crop.height()));
    const Raster small = resample_area(crop, config_.mask_grid, config_.mask_grid);
    return {small.pixels().begin(), small.pixels().end()};
}

std::vector<double> SwarmClassifier::prepare(const prep::LongExposureImage& image) const { return prepare(image.pixels); }

std::vector<double> SwarmClassifier::forward(const std::vector<std::vector<double>>& inputs, nn::Phase phase) {
    std::vector<const std::vector<double>*> ptrs;
    ptrs.reserve(inputs.size());
    for (const auto& v : inputs) ptrs.push_back(&v);
    return forward(ptrs, phase);
}

std::vector<double> SwarmClassifier::forward(std::span<const std::vector<double>* const> inputs, nn::Phase phase) {
    const int n = static_cast<int>(inputs.size());
    const int g = config_.mask_grid;
    if (n == 0) throw EmptyInputError("forward: empty batch");
    last_input_ = nn::Tensor(1, n, g, g);
    for (int i = 0; i < n; ++i) {
        if (inputs[i]->size() != last_input_.plane())
            throw ShapeError("forward: prepared input has " + std::to_string(inputs[i]->size()) + " values, expected " +
                             std::to_string(last_input_.plane()));
        std::copy(inputs[i]->begin(), inputs[i]->end(), last_input_.at(0, i));
    }

    last_params_.clear();
    last_raw_.clear();
    last_raw_grad_.clear();
    last_masks_.clear();

    nn::Tensor backbone_in;
    if (config_.attention_enabled) {
        if (raw_override_) {
            if (static_cast<int>(raw_override_->size()) != n) throw ShapeError("forward: raw override size mismatch");
            last_raw_ = *raw_override_;
        } else {
            const nn::Tensor raw = head_.forward(to_input_.apply(last_input_), phase);
            for (int i = 0; i < n; ++i) last_raw_.push_back({raw.at(0, i)[0], raw.at(1, i)[0], raw.at(2, i)[0]});
        }
        nn::Tensor masked = last_input_;
        for (int i = 0; i < n; ++i) {
            last_params_.push_back(attention_from_raw(last_raw_[i], config_));
            last_masks_.push_back(soft_disk_mask(last_params_.back(), g, config_.crop_size));
            const auto m = last_masks_.back().pixels();
            double* px = masked.at(0, i);
            for (std::size_t k = 0; k < m.size(); ++k) px[k] *= m[k];
        }
        backbone_in = to_input_.apply(masked);
    } else {
        backbone_in = to_input_.apply(last_input_);
    }

    const nn::Tensor logits = backbone_.forward(backbone_in, phase);
    return {logits.data.begin(), logits.data.end()};
}

void SwarmClassifier::backward(std::span<const double> d_logits) {
    const int n = last_input_.n;
    if (static_cast<int>(d_logits.size()) != n) throw ShapeError("backward: gradient size does not match batch");
    nn::Tensor g(1, n, 1, 1);
    std::copy(d_logits.begin(), d_logits.end(), g.data.begin());
    const nn::Tensor d_in = backbone_.backward(g);
    if (!config_.attention_enabled) return;

    const nn::Tensor d_masked = to_input_.apply_transpose(d_in);
    const int grid = config_.mask_grid;
    nn::Tensor d_raw(3, n, 1, 1);
    for (int i = 0; i < n; ++i) {
        Raster upstream(grid, grid);
        auto up = upstream.pixels();
        const double* dm = d_masked.at(0, i);
        const double* x = last_input_.at(0, i);
        for (std::size_t k = 0; k < up.size(); ++k) up[k] = dm[k] * x[k];
        const MaskGradient mg = soft_disk_mask_backward(last_params_[i], upstream, config_.crop_size);

        const auto& raw = last_raw_[i];
        const double t0 = std::tanh(raw[0]), t1 = std::tanh(raw[1]), s2 = logistic(raw[2]);
        const std::array<double, 3> dr = {mg.d_dx * config_.max_shift_px * (1.0 - t0 * t0),
                                          mg.d_dy * config_.max_shift_px * (1.0 - t1 * t1),
                                          mg.d_rho * config_.max_radius_px * s2 * (1.0 - s2)};
        last_raw_grad_.push_back(dr);
        for (int k = 0; k < 3; ++k) d_raw.at(k, i)[0] = dr[k];
    }
    if (!raw_override_) head_.backward(d_raw);
}

double SwarmClassifier::predict(const prep::LongExposureImage& image) {
    const std::vector<std::vector<double>> batch = {prepare(image)};
    return logistic(forward(batch, nn::Phase::inference).front());
}

std::vector<nn::Parameter*> SwarmClassifier::attention_parameters() {
    std::vector<nn::Parameter*> out;
    head_.collect(out);
    return out;
}

std::vector<nn::Parameter*> SwarmClassifier::parameters() {
    std::vector<nn::Parameter*> out = attention_parameters();
    backbone_.collect(out);
    return out;
}

std::vector<nn::Parameter*> SwarmClassifier::trainable_parameters() {
    std::vector<nn::Parameter*> out;
    if (config_.attention_enabled) head_.collect(out);
    backbone_.collect(out);
    std::erase_if(out, [](const nn::Parameter* p) { return !p->trainable; });
    return out;
}

std::string SwarmClassifier::config_hash() const { return io::sha256_hex(config::to_json(config_).dump()); }

// Weights container:
//   8 bytes  magic "SWNETW01"
//   8 bytes  little-endian u64 header length L
//   L bytes  JSON header {"model_config": {...}, "tensors": [{"name", "size"}...]}
//   float64 little-endian tensor values, concatenated in header order
void SwarmClassifier::save(const std::filesystem::path& path) const {
    auto& self = const_cast<SwarmClassifier&>(*this);
    const auto params = self.parameters();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto* p : params) tensors.push_back({{"name", p->name}, {"size", p->value.size()}});
    const nlohmann::json header = {{"format", "swarmnet-weights"}, {"version", 1},
                                   {"model_config", config::to_json(config_)}, {"tensors", tensors}};
    const std::string h = header.dump();

    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(kWeightsMagic, 8);
        const std::uint64_t len = h.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(h.data(), static_cast<std::streamsize>(h.size()));
        for (const auto* p : params)
            out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

SwarmClassifier SwarmClassifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kWeightsMagic, 8) != 0) throw IoError("not a swarmnet weights file: " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    std::string h(len, '\0');
    in.read(h.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(h);
    SwarmClassifier model(config::model_config_from_json(header.at("model_config")), 0);

    std::map<std::string, nn::Parameter*> by_name;
    for (auto* p : model.parameters()) by_name[p->name] = p;
    for (const auto& t : header.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto size = t.at("size").get<std::size_t>();
        auto it = by_name.find(name);
        if (it == by_name.end() || it->second->value.size() != size)
            throw ShapeError("weights file tensor '" + name + "' does not match the embedded config");
        in.read(reinterpret_cast<char*>(it->second->value.data()), static_cast<std::streamsize>(size * sizeof(double)));
        by_name.erase(it);
    }
    if (!in) throw IoError("truncated weights file: " + path.string());
    if (!by_name.empty()) throw ShapeError("weights file is missing tensor '" + by_name.begin()->first + "'");
    return model;
}

WellPrediction predict_well(SwarmClassifier& model, std::span<const prep::LongExposureImage> images, double threshold) {
    std::vector<ImageScore> scores;
    scores.reserve(images.size());
    for (const auto& img : images) scores.push_back({img.well_id, model.predict(img)});
    return aggregate_well(scores, threshold);
}

} // namespace swarmnet::model
