#include "swarmnet/preprocess.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "swarmnet/errors.hpp"
#include "swarmnet/io.hpp"

namespace swarmnet::prep {

void PreprocessConfig::validate() const {
    if (crop_size < 1) throw ConfigError("preprocess.crop_size", "must be >= 1");
    if (window < 1) throw ConfigError("preprocess.window", "must be >= 1");
    if (stride < 1) throw ConfigError("preprocess.stride", "must be >= 1");
    if (eval_stride < 1) throw ConfigError("preprocess.eval_stride", "must be >= 1");
}

Raster crop_well(const Raster& frame, double cx, double cy, int size) {
    if (frame.width() < 1 || frame.height() < 1) throw InvalidWellError("crop_well: empty frame");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw InvalidWellError("crop_well: non-finite centroid");
    const long ix = std::lround(cx);
    const long iy = std::lround(cy);
    if (ix < 0 || iy < 0 || ix >= frame.width() || iy >= frame.height())
        throw InvalidWellError("crop_well: centroid outside frame bounds");

    Raster out(size, size, 0.0);
    const long x0 = ix - size / 2;
    const long y0 = iy - size / 2;
    for (int v = 0; v < size; ++v) {
        const long sy = y0 + v;
        if (sy < 0 || sy >= frame.height()) continue;
        for (int u = 0; u < size; ++u) {
            const long sx = x0 + u;
            if (sx >= 0 && sx < frame.width()) out(u, v) = frame(static_cast<int>(sx), static_cast<int>(sy));
        }
    }
    return out;
}

Raster average_frames(std::span<const Raster> frames, int start, int window) {
    if (window < 1) throw InsufficientFramesError("average_frames: window must be >= 1");
    if (start < 0 || static_cast<std::size_t>(start) + window > frames.size())
        throw InsufficientFramesError("average_frames: need frames [" + std::to_string(start) + ", " +
                                      std::to_string(start + window) + ") but only " +
                                      std::to_string(frames.size()) + " available");
    const Raster& first = frames[start];
    Raster out(first.width(), first.height(), 0.0);
    auto acc = out.pixels();
    for (int f = start; f < start + window; ++f) {
        if (!frames[f].same_shape(first)) throw ShapeError("average_frames: frames differ in size");
        const auto px = frames[f].pixels();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
    }
    for (auto& v : acc) v /= window;
    return out;
}

double integration_time_s(int window, double fps) { return window / fps; }

std::vector<std::uint8_t> well_mask(const WellRecord& well, int size) {
    well.validate();
    const double mx = size / 2 + (well.centroid_x_px - std::lround(well.centroid_x_px));
    const double my = size / 2 + (well.centroid_y_px - std::lround(well.centroid_y_px));
    const double r2 = well.radius_px * well.radius_px;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - mx, dy = y - my;
            mask[static_cast<std::size_t>(y) * size + x] = (dx * dx + dy * dy <= r2) ? 1 : 0;
        }
    return mask;
}

LongExposureImage normalize_and_mask(const Raster& image, const WellRecord& well) {
    if (image.width() != image.height()) throw ShapeError("normalize_and_mask: image must be square");
    LongExposureImage out;
    out.mask = well_mask(well, image.width());
    out.well_id = well.well_id;
    out.label = well.label;

    const auto px = image.pixels();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < px.size(); ++i)
        if (out.mask[i]) {
            sum += px[i];
            ++count;
        }
    if (count == 0) throw InvalidWellError("normalize_and_mask: well disk does not intersect the crop");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i)
        if (out.mask[i]) ss += (px[i] - mean) * (px[i] - mean);
    const double var = ss / static_cast<double>(count);
    if (var < 1e-12) throw DegenerateImageError("normalize_and_mask: in-mask variance below 1e-12");

    const double inv_sd = 1.0 / std::sqrt(var);
    out.pixels = Raster(image.width(), image.height(), 0.0);
    auto dst = out.pixels.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        if (out.mask[i]) dst[i] = (px[i] - mean) * inv_sd;
    return out;
}

int window_count(int n_frames, int window, int stride) {
    if (n_frames < window) return 0;
    return (n_frames - window) / stride + 1;
}

std::vector<LongExposureImage> augment_windows(const sim::FrameSequence& seq, int window, int stride, int crop_size) {
    if (stride < 1) throw InsufficientFramesError("augment_windows: stride must be >= 1");
    if (window < 1 || static_cast<int>(seq.frames.size()) < window)
        throw InsufficientFramesError("augment_windows: " + std::to_string(seq.frames.size()) +
                                      " frames is fewer than the window of " + std::to_string(window));
    std::vector<Raster> crops;
    crops.reserve(seq.frames.size());
    for (const auto& f : seq.frames) crops.push_back(crop_well(f, seq.well.centroid_x_px, seq.well.centroid_y_px, crop_size));

    std::vector<LongExposureImage> out;
    const int n = static_cast<int>(crops.size());
    for (int start = 0; start + window <= n; start += stride) {
        auto img = normalize_and_mask(average_frames(crops, start, window), seq.well);
        img.window_start = start;
        out.push_back(std::move(img));
    }
    return out;
}

std::string manifest_to_csv(std::span<const ManifestEntry> entries) {
    std::ostringstream s;
    s << "well_id,source_id,label,window_start,path\n";
    for (const auto& e : entries)
        s << e.well_id << ',' << e.source_id << ',' << to_string(e.label) << ',' << e.window_start << ',' << e.path << '\n';
    return s.str();
}

std::vector<ManifestEntry> manifest_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "well_id,source_id,label,window_start,path")
        throw ValidationError("manifest: unexpected header");
    std::vector<ManifestEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::istringstream row(line);
        for (std::string col; std::getline(row, col, ',');) cols.push_back(col);
        if (cols.size() != 5) throw ValidationError("manifest: malformed row '" + line + "'");
        out.push_back({cols[0], cols[1], label_from_string(cols[2]), std::stoi(cols[3]), cols[4]});
    }
    return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset_dir) {
    return manifest_from_csv(io::read_text(dataset_dir / "manifest.csv"));
}

std::string manifest_fingerprint(const std::filesystem::path& dataset_dir) {
    return io::sha256_file(dataset_dir / "manifest.csv");
}

std::vector<WellRecord> wells_in(std::span<const ManifestEntry> entries) {
    std::vector<WellRecord> wells;
    std::map<std::string, std::size_t> seen;
    for (const auto& e : entries) {
        auto [it, inserted] = seen.emplace(e.well_id, wells.size());
        if (inserted) {
            WellRecord w;
            w.well_id = e.well_id;
            w.source_id = e.source_id;
            w.label = e.label;
            wells.push_back(std::move(w));
        } else if (wells[it->second].label != e.label) {
            throw InconsistencyError("manifest: well '" + e.well_id + "' has conflicting labels");
        }
    }
    return wells;
}

} // namespace swarmnet::prep
