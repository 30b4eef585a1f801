#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "lanekit/error.hpp"
#include "lanekit/image.hpp"

namespace lanekit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PNG (8-bit RGB or gray) through libpng's simplified API.

inline ImageBuffer read_png(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw Error(ErrorKind::FileError, "cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw Error(ErrorKind::FileError, "empty PNG " + path.string());
    }
    ImageBuffer img(static_cast<int>(image.width), static_cast<int>(image.height), 3);
    if (!png_image_finish_read(&image, nullptr, img.samples().data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorKind::FileError, "cannot decode PNG " + path.string() + ": " + image.message);
    }
    return img;
}

inline void write_png(const ImageBuffer& img, const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.samples().data(), 0, nullptr)) {
        throw Error(ErrorKind::FileError, "cannot write PNG " + path.string() + ": " + image.message);
    }
}

// ---------------------------------------------------------------------------
// Binary PPM (P6, maxval 255).

namespace detail {

inline bool ppm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return true;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return !tok.empty();
}

}  // namespace detail

inline ImageBuffer read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
    std::string magic, ws, hs, ms;
    if (!detail::ppm_token(in, magic) || magic != "P6") {
        throw Error(ErrorKind::ParseError, path.string() + ": not a binary PPM (P6)");
    }
    if (!detail::ppm_token(in, ws) || !detail::ppm_token(in, hs) || !detail::ppm_token(in, ms)) {
        throw Error(ErrorKind::ParseError, path.string() + ": truncated PPM header");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        maxval = std::stoi(ms);
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, path.string() + ": malformed PPM header");
    }
    if (w < 1 || h < 1) throw Error(ErrorKind::ParseError, path.string() + ": invalid PPM size");
    if (maxval != 255) throw Error(ErrorKind::ParseError, path.string() + ": only maxval 255 is supported");
    ImageBuffer img(w, h, 3);
    auto s = img.samples();
    in.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(s.size()));
    if (in.gcount() != static_cast<std::streamsize>(s.size())) {
        throw Error(ErrorKind::ParseError, path.string() + ": truncated PPM pixel data");
    }
    return img;
}

inline void write_ppm(const ImageBuffer& img, const fs::path& path) {
    if (img.channels() != 3) throw Error(ErrorKind::ChannelMismatch, "PPM output requires 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::FileError, "cannot write " + path.string());
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    const auto s = img.samples();
    out.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size()));
    if (!out) throw Error(ErrorKind::FileError, "failed writing " + path.string());
}

/// Dispatches on the file signature, not the extension.
inline ImageBuffer read_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    const auto got = in.gcount();
    in.close();
    if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
    throw Error(ErrorKind::ParseError, path.string() + ": unrecognized image format");
}

inline bool is_frame_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm";
}

/// Frame files (.png / .ppm) directly inside dir, in lexicographic name order.
inline std::vector<fs::path> list_frames(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::FileError, "not a directory: " + dir.string());
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_frame_file(entry.path())) frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return frames;
}

}  // namespace lanekit
