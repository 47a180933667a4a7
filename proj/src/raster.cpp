#include "swarmnet/raster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace swarmnet {

Raster::Raster(int width, int height, double fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("raster dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

double Raster::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Raster::max() const noexcept {
    if (data_.empty()) return -std::numeric_limits<double>::infinity();
    return *std::max_element(data_.begin(), data_.end());
}

std::vector<std::vector<ResampleTap>> area_resample_taps(int in_size, int out_size) {
    if (in_size <= 0 || out_size <= 0) throw std::invalid_argument("resample sizes must be positive");
    std::vector<std::vector<ResampleTap>> taps(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        const int first = static_cast<int>(lo);
        const int last = std::min(in_size - 1, static_cast<int>(hi - 1e-12));
        for (int i = first; i <= last; ++i) {
            const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (overlap > 1e-12) taps[o].push_back({i, overlap / scale});
        }
    }
    return taps;
}

Raster resample_area(const Raster& src, int out_width, int out_height) {
    if (src.width() == out_width && src.height() == out_height) return src;
    const auto tx = area_resample_taps(src.width(), out_width);
    const auto ty = area_resample_taps(src.height(), out_height);

    // Horizontal pass then vertical pass.
    Raster tmp(out_width, src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < out_width; ++x) {
            double acc = 0.0;
            for (const auto& t : tx[x]) acc += t.weight * src(t.index, y);
            tmp(x, y) = acc;
        }
    }
    Raster out(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        for (const auto& t : ty[y]) {
            for (int x = 0; x < out_width; ++x) out(x, y) += t.weight * tmp(x, t.index);
        }
    }
    return out;
}

} // namespace swarmnet
