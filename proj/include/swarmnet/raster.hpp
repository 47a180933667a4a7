#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace swarmnet {

// Row-major single-channel image. Pixel (x, y) is column x, row y.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator()(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> pixels() noexcept { return data_; }
    std::span<const double> pixels() const noexcept { return data_; }

    bool same_shape(const Raster& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    double sum() const noexcept;
    double max() const noexcept;

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// Area-weighted (box filter) resampling. Each output pixel is the mean of the
// source area it covers, so the operator is linear and preserves the mean.
Raster resample_area(const Raster& src, int out_width, int out_height);

// Sparse 1-D area-resampling weights: out[i] = sum_k weight * in[index].
struct ResampleTap {
    int index;
    double weight;
};
std::vector<std::vector<ResampleTap>> area_resample_taps(int in_size, int out_size);

} // namespace swarmnet
