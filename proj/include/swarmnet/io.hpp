#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "swarmnet/raster.hpp"

namespace swarmnet::io {

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples). Values are
// rounded and clamped to [0, 65535] on write.
void write_pgm16(const std::filesystem::path& path, const Raster& raster);
Raster read_pgm16(const std::filesystem::path& path);

// NumPy .npy v1.0, dtype '<f8', C order, shape (height, width).
void write_npy(const std::filesystem::path& path, const Raster& raster);
Raster read_npy(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

// Fails with ValidationError when the directory cannot be created or written.
void ensure_writable_dir(const std::filesystem::path& dir);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace swarmnet::io
