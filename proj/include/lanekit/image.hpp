#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lanekit/error.hpp"
#include "lanekit/parallel.hpp"

namespace lanekit {

/// Row-major 8-bit raster with 1 or 3 interleaved channels.
class ImageBuffer {
public:
    ImageBuffer() = default;

    ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0)
        : width_(width), height_(height), channels_(channels) {
        validate();
        samples_.assign(sample_count(), fill);
    }

    ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> samples)
        : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
        validate();
        if (samples_.size() != sample_count()) {
            throw Error(ErrorKind::DimensionMismatch, "sample buffer length does not match width*height*channels");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return samples_.empty(); }

    std::span<std::uint8_t> samples() noexcept { return samples_; }
    std::span<const std::uint8_t> samples() const noexcept { return samples_; }

    std::uint8_t& at(int x, int y, int c = 0) noexcept {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const noexcept {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::uint8_t* row(int y) noexcept { return samples_.data() + static_cast<std::size_t>(y) * width_ * channels_; }
    const std::uint8_t* row(int y) const noexcept {
        return samples_.data() + static_cast<std::size_t>(y) * width_ * channels_;
    }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    friend bool operator==(const ImageBuffer& a, const ImageBuffer& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.samples_ == b.samples_;
    }

private:
    std::size_t sample_count() const {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_) * static_cast<std::size_t>(channels_);
    }
    void validate() const {
        if (width_ < 1 || height_ < 1) throw Error(ErrorKind::DimensionMismatch, "image dimensions must be positive");
        if (channels_ != 1 && channels_ != 3) throw Error(ErrorKind::ChannelMismatch, "channels must be 1 or 3");
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> samples_;
};

/// Single float channel; the unit depends on the producer.
class PlaneF32 {
public:
    PlaneF32() = default;
    PlaneF32(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
        if (width < 1 || height < 1) throw Error(ErrorKind::DimensionMismatch, "plane dimensions must be positive");
        samples_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return samples_.size(); }

    float& at(int x, int y) noexcept { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
    float at(int x, int y) const noexcept { return samples_[static_cast<std::size_t>(y) * width_ + x]; }

    float* row(int y) noexcept { return samples_.data() + static_cast<std::size_t>(y) * width_; }
    const float* row(int y) const noexcept { return samples_.data() + static_cast<std::size_t>(y) * width_; }

    std::span<float> samples() noexcept { return samples_; }
    std::span<const float> samples() const noexcept { return samples_; }

    bool same_shape(const PlaneF32& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> samples_;
};

namespace detail {

inline void require_rgb(const ImageBuffer& img, const char* op) {
    if (img.channels() != 3) throw Error(ErrorKind::ChannelMismatch, std::string(op) + " requires a 3-channel image");
}

inline const std::array<float, 256>& srgb_linear_lut() {
    static const std::array<float, 256> lut = [] {
        std::array<float, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const double c = i / 255.0;
            t[i] = static_cast<float>(c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4));
        }
        return t;
    }();
    return lut;
}

inline const std::array<float, 256>& unit_lut() {
    static const std::array<float, 256> lut = [] {
        std::array<float, 256> t{};
        for (int i = 0; i < 256; ++i) t[i] = static_cast<float>(i / 255.0);
        return t;
    }();
    return lut;
}

// CIELAB companding with the linear segment below (6/29)^3.
inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    constexpr double eps = delta * delta * delta;
    return t > eps ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// D65 reference white.
inline constexpr double kWhiteX = 0.95047;
inline constexpr double kWhiteY = 1.0;
inline constexpr double kWhiteZ = 1.08883;

}  // namespace detail

struct Hls {
    float h, l, s;
};
struct Hsv {
    float h, s, v;
};
struct Lab {
    float l, a, b;
};

/// Hue in degrees [0, 360); achromatic pixels get hue 0.
inline float hue_degrees(float r, float g, float b, float mx, float delta) {
    if (delta <= 0.0f) return 0.0f;
    float h;
    if (mx == r) {
        h = 60.0f * (g - b) / delta;
    } else if (mx == g) {
        h = 120.0f + 60.0f * (b - r) / delta;
    } else {
        h = 240.0f + 60.0f * (r - g) / delta;
    }
    if (h < 0.0f) h += 360.0f;
    if (h >= 360.0f) h -= 360.0f;
    return h;
}

inline Hls hls_pixel(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const auto& u = detail::unit_lut();
    const float r = u[r8], g = u[g8], b = u[b8];
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float delta = mx - mn;
    const float l = 0.5f * (mx + mn);
    float s = 0.0f;
    if (delta > 0.0f) s = l <= 0.5f ? delta / (mx + mn) : delta / (2.0f - mx - mn);
    return {hue_degrees(r, g, b, mx, delta), l, std::clamp(s, 0.0f, 1.0f)};
}

inline Hsv hsv_pixel(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const auto& u = detail::unit_lut();
    const float r = u[r8], g = u[g8], b = u[b8];
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float delta = mx - mn;
    const float s = mx > 0.0f ? delta / mx : 0.0f;
    return {hue_degrees(r, g, b, mx, delta), s, mx};
}

inline Lab lab_pixel(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const auto& lin = detail::srgb_linear_lut();
    const double r = lin[r8], g = lin[g8], b = lin[b8];
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / detail::kWhiteX;
    const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / detail::kWhiteY;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / detail::kWhiteZ;
    const double fx = detail::lab_f(x), fy = detail::lab_f(y), fz = detail::lab_f(z);
    return {static_cast<float>(116.0 * fy - 16.0), static_cast<float>(500.0 * (fx - fy)),
            static_cast<float>(200.0 * (fy - fz))};
}

/// Rec.601 luma on unit-interval channels.
inline PlaneF32 to_grayscale(const ImageBuffer& img) {
    detail::require_rgb(img, "to_grayscale");
    PlaneF32 out(img.width(), img.height());
    parallel_rows(img.height(), [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const std::uint8_t* src = img.row(y);
            float* dst = out.row(y);
            for (int x = 0; x < img.width(); ++x, src += 3) {
                const double luma = (0.299 * src[0] + 0.587 * src[1] + 0.114 * src[2]) / 255.0;
                dst[x] = static_cast<float>(std::clamp(luma, 0.0, 1.0));
            }
        }
    });
    return out;
}

struct ColorPlanes {
    PlaneF32 c0, c1, c2;
};

namespace detail {

template <typename PixelFn>
ColorPlanes convert_planes(const ImageBuffer& img, const char* op, PixelFn&& fn) {
    require_rgb(img, op);
    ColorPlanes out{PlaneF32(img.width(), img.height()), PlaneF32(img.width(), img.height()),
                    PlaneF32(img.width(), img.height())};
    parallel_rows(img.height(), [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const std::uint8_t* src = img.row(y);
            float* d0 = out.c0.row(y);
            float* d1 = out.c1.row(y);
            float* d2 = out.c2.row(y);
            for (int x = 0; x < img.width(); ++x, src += 3) {
                const auto px = fn(src[0], src[1], src[2]);
                d0[x] = px[0];
                d1[x] = px[1];
                d2[x] = px[2];
            }
        }
    });
    return out;
}

}  // namespace detail

/// Planes are (H degrees, L, S).
inline ColorPlanes rgb_to_hls(const ImageBuffer& img) {
    return detail::convert_planes(img, "rgb_to_hls", [](auto r, auto g, auto b) {
        const Hls p = hls_pixel(r, g, b);
        return std::array<float, 3>{p.h, p.l, p.s};
    });
}

/// Planes are (H degrees, S, V).
inline ColorPlanes rgb_to_hsv(const ImageBuffer& img) {
    return detail::convert_planes(img, "rgb_to_hsv", [](auto r, auto g, auto b) {
        const Hsv p = hsv_pixel(r, g, b);
        return std::array<float, 3>{p.h, p.s, p.v};
    });
}

/// Planes are (L*, a*, b*), sRGB input, D65 white.
inline ColorPlanes rgb_to_lab(const ImageBuffer& img) {
    return detail::convert_planes(img, "rgb_to_lab", [](auto r, auto g, auto b) {
        const Lab p = lab_pixel(r, g, b);
        return std::array<float, 3>{p.l, p.a, p.b};
    });
}

/// Individual channels addressable by the segmentation rules.
enum class ColorChannel {
    Gray,
    RgbR,
    RgbG,
    RgbB,
    RgbMin,
    HlsH,
    HlsL,
    HlsS,
    HsvH,
    HsvS,
    HsvV,
    LabL,
    LabA,
    LabB,
};

/// Computes one channel without materializing the other two planes of its space.
inline PlaneF32 color_channel(const ImageBuffer& img, ColorChannel channel) {
    if (channel == ColorChannel::Gray) return to_grayscale(img);
    detail::require_rgb(img, "color_channel");
    PlaneF32 out(img.width(), img.height());
    const auto& u = detail::unit_lut();
    const auto& lin = detail::srgb_linear_lut();
    parallel_rows(img.height(), [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const std::uint8_t* s = img.row(y);
            float* d = out.row(y);
            for (int x = 0; x < img.width(); ++x, s += 3) {
                float v = 0.0f;
                switch (channel) {
                    case ColorChannel::RgbR: v = u[s[0]]; break;
                    case ColorChannel::RgbG: v = u[s[1]]; break;
                    case ColorChannel::RgbB: v = u[s[2]]; break;
                    case ColorChannel::RgbMin: v = u[std::min({s[0], s[1], s[2]})]; break;
                    case ColorChannel::HlsH: v = hls_pixel(s[0], s[1], s[2]).h; break;
                    case ColorChannel::HlsL: v = hls_pixel(s[0], s[1], s[2]).l; break;
                    case ColorChannel::HlsS: v = hls_pixel(s[0], s[1], s[2]).s; break;
                    case ColorChannel::HsvH: v = hsv_pixel(s[0], s[1], s[2]).h; break;
                    case ColorChannel::HsvS: v = hsv_pixel(s[0], s[1], s[2]).s; break;
                    case ColorChannel::HsvV: v = hsv_pixel(s[0], s[1], s[2]).v; break;
                    case ColorChannel::LabL: v = lab_pixel(s[0], s[1], s[2]).l; break;
                    case ColorChannel::LabA: v = lab_pixel(s[0], s[1], s[2]).a; break;
                    case ColorChannel::LabB: {
                        // b* needs only Y and Z.
                        const double r = lin[s[0]], g = lin[s[1]], b = lin[s[2]];
                        const double yy = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
                        const double zz = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / detail::kWhiteZ;
                        v = static_cast<float>(200.0 * (detail::lab_f(yy) - detail::lab_f(zz)));
                        break;
                    }
                    case ColorChannel::Gray: break;
                }
                d[x] = v;
            }
        }
    });
    return out;
}

enum class Axis { X, Y };

/// 3x3 Sobel with replicated borders; output is the raw (unnormalized) response.
inline PlaneF32 sobel(const PlaneF32& plane, Axis axis) {
    const int w = plane.width();
    const int h = plane.height();
    if (w < 3 || h < 3) throw Error(ErrorKind::ImageTooSmall, "sobel requires at least a 3x3 plane");
    PlaneF32 out(w, h);
    parallel_rows(h, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const float* up = plane.row(std::max(y - 1, 0));
            const float* mid = plane.row(y);
            const float* dn = plane.row(std::min(y + 1, h - 1));
            float* dst = out.row(y);
            auto sample = [&](int x) {
                const int xl = std::max(x - 1, 0);
                const int xr = std::min(x + 1, w - 1);
                if (axis == Axis::X) {
                    return (up[xr] - up[xl]) + 2.0f * (mid[xr] - mid[xl]) + (dn[xr] - dn[xl]);
                }
                return (dn[xl] - up[xl]) + 2.0f * (dn[x] - up[x]) + (dn[xr] - up[xr]);
            };
            dst[0] = sample(0);
            if (axis == Axis::X) {
                for (int x = 1; x < w - 1; ++x) {
                    dst[x] = (up[x + 1] - up[x - 1]) + 2.0f * (mid[x + 1] - mid[x - 1]) + (dn[x + 1] - dn[x - 1]);
                }
            } else {
                for (int x = 1; x < w - 1; ++x) {
                    dst[x] = (dn[x - 1] - up[x - 1]) + 2.0f * (dn[x] - up[x]) + (dn[x + 1] - up[x + 1]);
                }
            }
            dst[w - 1] = sample(w - 1);
        }
    });
    return out;
}

inline PlaneF32 grad_magnitude(const PlaneF32& gx, const PlaneF32& gy) {
    if (!gx.same_shape(gy)) throw Error(ErrorKind::DimensionMismatch, "gradient planes differ in size");
    PlaneF32 out(gx.width(), gx.height());
    auto a = gx.samples();
    auto b = gy.samples();
    auto o = out.samples();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::hypot(a[i], b[i]);
    return out;
}

/// atan(|gy|/|gx|) in [0, pi/2]; zero gradient maps to 0.
inline PlaneF32 grad_direction(const PlaneF32& gx, const PlaneF32& gy) {
    if (!gx.same_shape(gy)) throw Error(ErrorKind::DimensionMismatch, "gradient planes differ in size");
    PlaneF32 out(gx.width(), gx.height());
    auto a = gx.samples();
    auto b = gy.samples();
    auto o = out.samples();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::atan2(std::fabs(b[i]), std::fabs(a[i]));
    return out;
}

namespace detail {

// Shared bilinear kernel so remap() and bilinear_sample() agree bit for bit.
inline void bilinear_kernel(const ImageBuffer& img, float x, float y, float* out) {
    const int c = img.channels();
    const float xmax = static_cast<float>(img.width() - 1);
    const float ymax = static_cast<float>(img.height() - 1);
    if (!(x >= 0.0f && y >= 0.0f && x <= xmax && y <= ymax)) {
        for (int k = 0; k < c; ++k) out[k] = 0.0f;
        return;
    }
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const std::uint8_t* r0 = img.row(y0);
    const std::uint8_t* r1 = img.row(y1);
    for (int k = 0; k < c; ++k) {
        const float top = r0[x0 * c + k] + fx * (static_cast<float>(r0[x1 * c + k]) - r0[x0 * c + k]);
        const float bot = r1[x0 * c + k] + fx * (static_cast<float>(r1[x1 * c + k]) - r1[x0 * c + k]);
        out[k] = top + fy * (bot - top);
    }
}

inline std::uint8_t round_to_u8(float v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f));
}

}  // namespace detail

/// Bilinear interpolation in 8-bit units; anything outside [0,w-1]x[0,h-1] is black.
/// Unused channels of a single-channel image are returned as 0.
inline std::array<float, 3> bilinear_sample(const ImageBuffer& img, double x, double y) {
    std::array<float, 3> out{0.0f, 0.0f, 0.0f};
    detail::bilinear_kernel(img, static_cast<float>(x), static_cast<float>(y), out.data());
    return out;
}

/// Per-output-pixel source coordinates. Reused across frames so the geometric
/// work of undistortion and warping is paid once per video.
struct RemapTable {
    int width = 0;
    int height = 0;
    std::vector<float> src_x;
    std::vector<float> src_y;

    RemapTable() = default;
    RemapTable(int w, int h)
        : width(w), height(h), src_x(static_cast<std::size_t>(w) * h), src_y(static_cast<std::size_t>(w) * h) {}

    void set(int x, int y, double sx, double sy) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        src_x[i] = static_cast<float>(snap(sx));
        src_y[i] = static_cast<float>(snap(sy));
    }

private:
    // Round-off in a mathematically integral source coordinate must not push a
    // border pixel outside the image.
    static double snap(double v) {
        if (!std::isfinite(v)) return -1.0;
        const double r = std::round(v);
        return std::fabs(v - r) < 1e-6 ? r : v;
    }
};

inline ImageBuffer remap(const ImageBuffer& img, const RemapTable& table) {
    ImageBuffer out(table.width, table.height, img.channels());
    const int c = img.channels();
    parallel_rows(table.height, [&](int y0, int y1) {
        float px[3];
        for (int y = y0; y < y1; ++y) {
            std::uint8_t* dst = out.row(y);
            const std::size_t base = static_cast<std::size_t>(y) * table.width;
            for (int x = 0; x < table.width; ++x) {
                detail::bilinear_kernel(img, table.src_x[base + x], table.src_y[base + x], px);
                for (int k = 0; k < c; ++k) dst[x * c + k] = detail::round_to_u8(px[k]);
            }
        }
    });
    return out;
}

}  // namespace lanekit
