#include "swarmnet/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "swarmnet/errors.hpp"

namespace fs = std::filesystem;

namespace swarmnet::io {

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path.string());
    return in;
}

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in) {
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

fs::path temp_sibling(const fs::path& path) { return path.parent_path() / (path.filename().string() + ".tmp"); }

} // namespace

void write_pgm16(const fs::path& path, const Raster& raster) {
    auto out = open_out(path);
    out << "P5\n" << raster.width() << ' ' << raster.height() << "\n65535\n";
    std::vector<unsigned char> buf(raster.size() * 2);
    const auto px = raster.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double v = std::clamp(std::round(px[i]), 0.0, 65535.0);
        const auto u = static_cast<std::uint16_t>(v);
        buf[2 * i] = static_cast<unsigned char>(u >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(u & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Raster read_pgm16(const fs::path& path) {
    auto in = open_in(path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("not a binary PGM: " + path.string());
    int width = 0, height = 0, maxval = 0;
    skip_pnm_space(in);
    in >> width;
    skip_pnm_space(in);
    in >> height;
    skip_pnm_space(in);
    in >> maxval;
    in.get();
    if (!in || width <= 0 || height <= 0 || maxval != 65535) throw IoError("unsupported PGM header: " + path.string());
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError("truncated PGM: " + path.string());
    Raster r(width, height);
    auto px = r.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
    return r;
}

void write_npy(const fs::path& path, const Raster& raster) {
    std::ostringstream dict;
    dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << raster.height() << ", " << raster.width()
         << "), }";
    std::string header = dict.str();
    // magic(6) + version(2) + len(2) + header + '\n' must be a multiple of 64.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    auto out = open_out(path);
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    static_assert(std::endian::native == std::endian::little, "npy writer assumes a little-endian host");
    const auto px = raster.pixels();
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size_bytes()));
    if (!out) throw IoError("write failed: " + path.string());
}

Raster read_npy(const fs::path& path) {
    auto in = open_in(path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0 || magic[6] != 1) throw IoError("not an npy v1 file: " + path.string());
    unsigned char len_bytes[2];
    in.read(reinterpret_cast<char*>(len_bytes), 2);
    const std::size_t len = len_bytes[0] | (len_bytes[1] << 8);
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (header.find("'<f8'") == std::string::npos || header.find("'fortran_order': False") == std::string::npos)
        throw IoError("unsupported npy dtype/order: " + path.string());
    int height = 0, width = 0;
    const auto shape = header.find("'shape': (");
    if (shape == std::string::npos ||
        std::sscanf(header.c_str() + shape + 10, "%d, %d", &height, &width) != 2 || width <= 0 || height <= 0)
        throw IoError("unsupported npy shape: " + path.string());
    Raster r(width, height);
    auto px = r.pixels();
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size_bytes()));
    if (!in) throw IoError("truncated npy: " + path.string());
    return r;
}

std::string read_text(const fs::path& path) {
    auto in = open_in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_atomic(const fs::path& path, std::string_view content) {
    const auto tmp = temp_sibling(path);
    {
        auto out = open_out(tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create output directory: " + dir.string());
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw ValidationError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int md_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &md_len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

} // namespace swarmnet::io
