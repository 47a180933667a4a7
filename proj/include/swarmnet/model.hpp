#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarmnet/nn.hpp"
#include "swarmnet/preprocess.hpp"
#include "swarmnet/raster.hpp"

namespace swarmnet::model {

// Predicted circular active region, in crop pixel units.
struct AttentionParams {
    double dx = 0.0;     // centroid shift from the crop center
    double dy = 0.0;
    double rho = 125.0;  // radius
    double kappa = 0.1;  // edge sharpness, 1/pixel
};

// mask(q) = logistic(kappa * (rho - |q - c|)), c = (crop/2 + dx, crop/2 + dy).
// The grid is grid x grid pixels covering a crop x crop field; grid pixel i
// sits at crop coordinate (i + 0.5) * crop / grid - 0.5.
Raster soft_disk_mask(const AttentionParams& p, int grid = prep::kCropSize, int crop = prep::kCropSize);

struct MaskGradient {
    double d_dx = 0.0;
    double d_dy = 0.0;
    double d_rho = 0.0;
};

// Chain rule through the mask: sum_q upstream(q) * d mask(q) / d(dx, dy, rho).
MaskGradient soft_disk_mask_backward(const AttentionParams& p, const Raster& upstream, int crop = prep::kCropSize);

struct ModelConfig {
    int crop_size = prep::kCropSize;
    int mask_grid = 125;   // resolution the attention mask is applied at
    int input_size = 64;   // backbone input resolution
    int stem_channels = 16;
    int growth_rate = 8;
    std::vector<int> block_layers = {2, 2, 2};
    double compression = 0.5;
    bool attention_enabled = true;
    double kappa = 0.1;
    int head_channels = 4;
    int head_grid = 4;
    double max_shift_px = 50.0;
    double max_radius_px = 250.0;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    void validate() const;
};

// Squashes raw head outputs into the bounded parametrization.
AttentionParams attention_from_raw(const std::array<double, 3>& raw, const ModelConfig& config);

struct ImageScore {
    std::string well_id;
    double probability = 0.0;
};

struct WellPrediction {
    std::string well_id;
    double score = 0.0;
    Label label = Label::unknown;
};

// score = mean probability; positive iff score >= threshold.
WellPrediction aggregate_well(std::span<const ImageScore> images, double threshold);

class SwarmClassifier {
public:
    SwarmClassifier(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }

    // Downscales a crop to the mask grid; the representation every forward
    // pass consumes. Throws ShapeError when the crop has the wrong size.
    std::vector<double> prepare(const prep::LongExposureImage& image) const;
    std::vector<double> prepare(const Raster& crop) const;

    // inputs: batch of prepared images, each mask_grid^2 values.
    // Returns per-sample logits; probabilities are logistic(logit).
    std::vector<double> forward(std::span<const std::vector<double>* const> inputs, nn::Phase phase);
    std::vector<double> forward(const std::vector<std::vector<double>>& inputs, nn::Phase phase);

    // d loss / d logit for the batch of the last forward call.
    void backward(std::span<const double> d_logits);

    double predict(const prep::LongExposureImage& image);

    // Attention parameters and raw-output gradients of the last batch.
    const std::vector<AttentionParams>& last_attention() const noexcept { return last_params_; }
    const std::vector<std::array<double, 3>>& last_raw() const noexcept { return last_raw_; }
    const std::vector<std::array<double, 3>>& last_raw_grad() const noexcept { return last_raw_grad_; }

    // Bypasses the head with fixed raw outputs (one triple per batch sample).
    void set_raw_override(std::optional<std::vector<std::array<double, 3>>> raw) { raw_override_ = std::move(raw); }

    std::vector<nn::Parameter*> parameters();            // everything serialized
    std::vector<nn::Parameter*> trainable_parameters();  // excludes attention when disabled
    std::vector<nn::Parameter*> attention_parameters();

    void save(const std::filesystem::path& path) const;
    static SwarmClassifier load(const std::filesystem::path& path);

    std::string config_hash() const;

private:
    struct Resampler {
        std::vector<std::vector<ResampleTap>> taps;
        int in = 0, out = 0;
        nn::Tensor apply(const nn::Tensor& x) const;
        nn::Tensor apply_transpose(const nn::Tensor& g) const;
    };

    ModelConfig config_;
    nn::Sequential head_;
    nn::Sequential backbone_;
    Resampler to_input_;
    Resampler crop_to_grid_;

    std::optional<std::vector<std::array<double, 3>>> raw_override_;
    nn::Tensor last_input_;
    std::vector<Raster> last_masks_;
    std::vector<AttentionParams> last_params_;
    std::vector<std::array<double, 3>> last_raw_;
    std::vector<std::array<double, 3>> last_raw_grad_;
};

WellPrediction predict_well(SwarmClassifier& model, std::span<const prep::LongExposureImage> images, double threshold);

} // namespace swarmnet::model
