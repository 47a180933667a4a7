#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "swarmnet/raster.hpp"
#include "swarmnet/simulator.hpp"
#include "swarmnet/well.hpp"

namespace swarmnet::prep {

inline constexpr int kCropSize = 500;
inline constexpr int kWindow = 10;

struct PreprocessConfig {
    int crop_size = kCropSize;
    int window = kWindow;
    int stride = 1;        // augmentation stride written to the manifest
    int eval_stride = 10;  // validation/test windows use starts divisible by this

    void validate() const;
};

// Normalized, well-masked long-exposure image.
struct LongExposureImage {
    Raster pixels;
    std::vector<std::uint8_t> mask;  // 1 inside the well disk, row-major like pixels
    std::string well_id;
    Label label = Label::unknown;
    int window_start = 0;
};

// size x size window whose pixel (size/2, size/2) is the source pixel nearest
// to `centroid`. Parts outside the frame are zero.
Raster crop_well(const Raster& frame, double centroid_x_px, double centroid_y_px, int size = kCropSize);

// Pixelwise mean of frames[start, start + window).
Raster average_frames(std::span<const Raster> frames, int start, int window = kWindow);

// Effective exposure of a window-frame average.
double integration_time_s(int window, double fps);

// Disk of radius well.radius_px centred on the well inside a crop produced by
// crop_well (the sub-pixel part of the centroid is kept).
std::vector<std::uint8_t> well_mask(const WellRecord& well, int size);

// Standardizes in-mask pixels to mean 0 / variance 1 using in-mask
// statistics only and sets every out-of-mask pixel to exactly 0.
LongExposureImage normalize_and_mask(const Raster& image, const WellRecord& well);

int window_count(int n_frames, int window, int stride);

// One image per start index 0, stride, 2*stride, ... with start + window <= n.
std::vector<LongExposureImage> augment_windows(const sim::FrameSequence& seq, int window = kWindow, int stride = 1,
                                               int crop_size = kCropSize);

// Dataset manifest: one row per long-exposure image.
struct ManifestEntry {
    std::string well_id;
    std::string source_id;
    Label label = Label::unknown;
    int window_start = 0;
    std::string path;  // relative to the manifest directory
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::string manifest_to_csv(std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> manifest_from_csv(const std::string& text);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset_dir);
std::string manifest_fingerprint(const std::filesystem::path& dataset_dir);

// Well-level view of a manifest, first-appearance order.
std::vector<WellRecord> wells_in(std::span<const ManifestEntry> entries);

} // namespace swarmnet::prep
