#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "lanekit/error.hpp"
#include "lanekit/geometry.hpp"
#include "lanekit/image.hpp"
#include "lanekit/lane_detect.hpp"
#include "lanekit/perspective.hpp"

namespace lanekit {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(Rgb, Rgb) = default;
};

struct OverlayStyle {
    Rgb fill{0, 128, 0};
    double alpha = 0.3;
    Rgb line{255, 64, 0};
    Rgb text{255, 255, 255};
    int glyph_scale = 2;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::ConfigError, "overlay alpha must be in [0, 1]");
        if (glyph_scale < 1) throw Error(ErrorKind::ConfigError, "glyph scale must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Embedded 8x8 bitmap font. '#' marks a lit pixel.

struct Glyph {
    char ch;
    std::array<const char*, 8> rows;
};

inline constexpr Glyph kFont[] = {
    {' ', {"........", "........", "........", "........", "........", "........", "........", "........"}},
    {'+', {"........", "...#....", "...#....", ".#####..", "...#....", "...#....", "........", "........"}},
    {'-', {"........", "........", "........", ".#####..", "........", "........", "........", "........"}},
    {'.', {"........", "........", "........", "........", "........", "..##....", "..##....", "........"}},
    {':', {"........", "..##....", "..##....", "........", "..##....", "..##....", "........", "........"}},
    {'0', {"..###...", ".#...#..", ".#..##..", ".#.#.#..", ".##..#..", ".#...#..", "..###...", "........"}},
    {'1', {"...#....", "..##....", "...#....", "...#....", "...#....", "...#....", "..###...", "........"}},
    {'2', {"..###...", ".#...#..", ".....#..", "....#...", "...#....", "..#.....", ".#####..", "........"}},
    {'3', {".#####..", "....#...", "...#....", "....#...", ".....#..", ".#...#..", "..###...", "........"}},
    {'4', {"....#...", "...##...", "..#.#...", ".#..#...", ".#####..", "....#...", "....#...", "........"}},
    {'5', {".#####..", ".#......", ".####...", ".....#..", ".....#..", ".#...#..", "..###...", "........"}},
    {'6', {"...##...", "..#.....", ".#......", ".####...", ".#...#..", ".#...#..", "..###...", "........"}},
    {'7', {".#####..", ".....#..", "....#...", "...#....", "..#.....", "..#.....", "..#.....", "........"}},
    {'8', {"..###...", ".#...#..", ".#...#..", "..###...", ".#...#..", ".#...#..", "..###...", "........"}},
    {'9', {"..###...", ".#...#..", ".#...#..", "..####..", ".....#..", "....#...", "..##....", "........"}},
    {'A', {"..###...", ".#...#..", ".#...#..", ".#####..", ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'B', {".####...", ".#...#..", ".#...#..", ".####...", ".#...#..", ".#...#..", ".####...", "........"}},
    {'C', {"..###...", ".#...#..", ".#......", ".#......", ".#......", ".#...#..", "..###...", "........"}},
    {'D', {".###....", ".#..#...", ".#...#..", ".#...#..", ".#...#..", ".#..#...", ".###....", "........"}},
    {'E', {".#####..", ".#......", ".#......", ".####...", ".#......", ".#......", ".#####..", "........"}},
    {'F', {".#####..", ".#......", ".#......", ".####...", ".#......", ".#......", ".#......", "........"}},
    {'G', {"..###...", ".#...#..", ".#......", ".#.###..", ".#...#..", ".#...#..", "..####..", "........"}},
    {'H', {".#...#..", ".#...#..", ".#...#..", ".#####..", ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'I', {"..###...", "...#....", "...#....", "...#....", "...#....", "...#....", "..###...", "........"}},
    {'J', {"...###..", "....#...", "....#...", "....#...", "....#...", ".#..#...", "..##....", "........"}},
    {'K', {".#...#..", ".#..#...", ".#.#....", ".##.....", ".#.#....", ".#..#...", ".#...#..", "........"}},
    {'L', {".#......", ".#......", ".#......", ".#......", ".#......", ".#......", ".#####..", "........"}},
    {'M', {".#...#..", ".##.##..", ".#.#.#..", ".#.#.#..", ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'N', {".#...#..", ".#...#..", ".##..#..", ".#.#.#..", ".#..##..", ".#...#..", ".#...#..", "........"}},
    {'O', {"..###...", ".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"}},
    {'P', {".####...", ".#...#..", ".#...#..", ".####...", ".#......", ".#......", ".#......", "........"}},
    {'Q', {"..###...", ".#...#..", ".#...#..", ".#...#..", ".#.#.#..", ".#..#...", "..##.#..", "........"}},
    {'R', {".####...", ".#...#..", ".#...#..", ".####...", ".#.#....", ".#..#...", ".#...#..", "........"}},
    {'S', {"..####..", ".#......", ".#......", "..###...", ".....#..", ".....#..", ".####...", "........"}},
    {'T', {".#####..", "...#....", "...#....", "...#....", "...#....", "...#....", "...#....", "........"}},
    {'U', {".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"}},
    {'V', {".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..#.#...", "...#....", "........"}},
    {'W', {".#...#..", ".#...#..", ".#...#..", ".#.#.#..", ".#.#.#..", ".#.#.#..", "..#.#...", "........"}},
    {'X', {".#...#..", ".#...#..", "..#.#...", "...#....", "..#.#...", ".#...#..", ".#...#..", "........"}},
    {'Y', {".#...#..", ".#...#..", "..#.#...", "...#....", "...#....", "...#....", "...#....", "........"}},
    {'Z', {".#####..", ".....#..", "....#...", "...#....", "..#.....", ".#......", ".#####..", "........"}},
    {'a', {"........", "........", "..###...", ".....#..", "..####..", ".#...#..", "..####..", "........"}},
    {'b', {".#......", ".#......", ".#.##...", ".##..#..", ".#...#..", ".#...#..", ".####...", "........"}},
    {'c', {"........", "........", "..###...", ".#......", ".#......", ".#...#..", "..###...", "........"}},
    {'d', {".....#..", ".....#..", "..##.#..", ".#..##..", ".#...#..", ".#...#..", "..####..", "........"}},
    {'e', {"........", "........", "..###...", ".#...#..", ".#####..", ".#......", "..###...", "........"}},
    {'f', {"...##...", "..#..#..", "..#.....", ".###....", "..#.....", "..#.....", "..#.....", "........"}},
    {'g', {"........", "........", "..####..", ".#...#..", ".#...#..", "..####..", ".....#..", "..###..."}},
    {'h', {".#......", ".#......", ".#.##...", ".##..#..", ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'i', {"...#....", "........", "..##....", "...#....", "...#....", "...#....", "..###...", "........"}},
    {'j', {"....#...", "........", "...##...", "....#...", "....#...", "....#...", ".#..#...", "..##...."}},
    {'k', {".#......", ".#......", ".#..#...", ".#.#....", ".##.....", ".#.#....", ".#..#...", "........"}},
    {'l', {"..##....", "...#....", "...#....", "...#....", "...#....", "...#....", "..###...", "........"}},
    {'m', {"........", "........", ".##.#...", ".#.#.#..", ".#.#.#..", ".#...#..", ".#...#..", "........"}},
    {'n', {"........", "........", ".#.##...", ".##..#..", ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'o', {"........", "........", "..###...", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"}},
    {'p', {"........", "........", ".####...", ".#...#..", ".#...#..", ".####...", ".#......", ".#......"}},
    {'q', {"........", "........", "..##.#..", ".#..##..", ".#...#..", "..####..", ".....#..", ".....#.."}},
    {'r', {"........", "........", ".#.##...", ".##..#..", ".#......", ".#......", ".#......", "........"}},
    {'s', {"........", "........", "..####..", ".#......", "..###...", ".....#..", ".####...", "........"}},
    {'t', {"..#.....", "..#.....", ".###....", "..#.....", "..#.....", "..#..#..", "...##...", "........"}},
    {'u', {"........", "........", ".#...#..", ".#...#..", ".#...#..", ".#..##..", "..##.#..", "........"}},
    {'v', {"........", "........", ".#...#..", ".#...#..", ".#...#..", "..#.#...", "...#....", "........"}},
    {'w', {"........", "........", ".#...#..", ".#...#..", ".#.#.#..", ".#.#.#..", "..#.#...", "........"}},
    {'x', {"........", "........", ".#...#..", "..#.#...", "...#....", "..#.#...", ".#...#..", "........"}},
    {'y', {"........", "........", ".#...#..", ".#...#..", ".#...#..", "..####..", ".....#..", "..###..."}},
    {'z', {"........", "........", ".#####..", "....#...", "...#....", "..#.....", ".#####..", "........"}},
};

/// Rows of the glyph for ch, or nullptr when the font has no such glyph.
inline const std::array<const char*, 8>* find_glyph(char ch) {
    for (const auto& g : kFont)
        if (g.ch == ch) return &g.rows;
    return nullptr;
}

/// Top-left corner of the first annotation line; lines are 10 glyph rows apart.
inline constexpr int kTextOriginX = 16;
inline constexpr int kTextOriginY = 16;

inline int text_line_y(int line, int scale) { return kTextOriginY + line * 10 * scale; }
inline int text_char_x(int index, int scale) { return kTextOriginX + index * 8 * scale; }

/// Draws lit glyph pixels only; characters missing from the font are blank.
inline void draw_text(ImageBuffer& img, std::string_view text, int x, int y, Rgb color, int scale) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto* glyph = find_glyph(text[i]);
        if (!glyph) continue;
        const int gx = x + static_cast<int>(i) * 8 * scale;
        for (int row = 0; row < 8; ++row) {
            for (int col = 0; col < 8; ++col) {
                if ((*glyph)[row][col] != '#') continue;
                for (int dy = 0; dy < scale; ++dy) {
                    for (int dx = 0; dx < scale; ++dx) {
                        const int px = gx + col * scale + dx;
                        const int py = y + row * scale + dy;
                        if (!img.contains(px, py)) continue;
                        if (img.channels() == 3) {
                            img.at(px, py, 0) = color.r;
                            img.at(px, py, 1) = color.g;
                            img.at(px, py, 2) = color.b;
                        } else {
                            img.at(px, py) = color.g;
                        }
                    }
                }
            }
        }
    }
}

inline std::string radius_text(const FrameMetrics& m) {
    if (!m.mean_radius_m) return "Radius: straight";
    return "Radius: " + std::to_string(std::lround(*m.mean_radius_m)) + " m";
}

inline std::string offset_text(const FrameMetrics& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "Offset: %+.2f m", m.offset_m);
    return buf;
}

/// Two text lines: curvature radius, then lateral offset.
inline ImageBuffer annotate_metrics(const ImageBuffer& frame, const FrameMetrics& metrics, const OverlayStyle& style) {
    style.validate();
    ImageBuffer out = frame;
    draw_text(out, radius_text(metrics), kTextOriginX, text_line_y(0, style.glyph_scale), style.text, style.glyph_scale);
    draw_text(out, offset_text(metrics), kTextOriginX, text_line_y(1, style.glyph_scale), style.text, style.glyph_scale);
    return out;
}

/// Row spans [x0, x1] (inclusive) between the fits in bird's-eye space; rows
/// where the right curve is left of the left curve are empty.
inline std::vector<std::pair<int, int>> lane_spans(const LanePair& pair, Size birdseye) {
    std::vector<std::pair<int, int>> spans(static_cast<std::size_t>(birdseye.height));
    for (int y = 0; y < birdseye.height; ++y) {
        const long long l = std::llround(pair.left.x_at(y));
        const long long r = std::llround(pair.right.x_at(y));
        const long long x0 = std::max<long long>(l, 0);
        const long long x1 = std::min<long long>(r, birdseye.width - 1);
        spans[static_cast<std::size_t>(y)] = x0 <= x1 ? std::pair<int, int>{static_cast<int>(x0), static_cast<int>(x1)}
                                                      : std::pair<int, int>{1, 0};
    }
    return spans;
}

/// Fills the lane region in bird's-eye space (scanline fill between the fits),
/// maps it back through warp_inv (bird's-eye -> camera) and alpha-blends the
/// fill colour onto covered pixels: out = (1 - alpha) * frame + alpha * fill,
/// rounded to nearest with ties away from zero. The bird's-eye plane has the
/// frame's size.
inline ImageBuffer render_lane_region(const ImageBuffer& frame, const LanePair& pair, const Homography& warp_inv,
                                      const OverlayStyle& style) {
    style.validate();
    detail::require_rgb(frame, "render_lane_region");
    const Homography to_bird = invert(warp_inv);
    const Size size{frame.width(), frame.height()};
    const auto spans = lane_spans(pair, size);
    ImageBuffer out = frame;
    if (style.alpha == 0.0) return out;
    const auto& m = to_bird.matrix();
    // Camera pixels beyond the horizon have the opposite sign of w from the road.
    const Point2 road = apply_homography(warp_inv, {0.5 * size.width, size.height - 1.0});
    const double front = homogeneous_w(to_bird, road) > 0 ? 1.0 : -1.0;
    const double fill[3] = {static_cast<double>(style.fill.r), static_cast<double>(style.fill.g),
                            static_cast<double>(style.fill.b)};
    parallel_rows(frame.height(), [&](int y0, int y1) {
        for (int v = y0; v < y1; ++v) {
            std::uint8_t* row = out.row(v);
            for (int u = 0; u < frame.width(); ++u) {
                const double w = m(2, 0) * u + m(2, 1) * v + m(2, 2);
                if (!(w * front > 1e-12)) continue;
                const double bx = (m(0, 0) * u + m(0, 1) * v + m(0, 2)) / w;
                const double by = (m(1, 0) * u + m(1, 1) * v + m(1, 2)) / w;
                const long long iy = std::llround(by);
                const long long ix = std::llround(bx);
                if (iy < 0 || iy >= size.height || ix < 0 || ix >= size.width) continue;
                const auto [x0, x1] = spans[static_cast<std::size_t>(iy)];
                if (ix < x0 || ix > x1) continue;
                for (int k = 0; k < 3; ++k) {
                    const double blended = (1.0 - style.alpha) * row[3 * u + k] + style.alpha * fill[k];
                    row[3 * u + k] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(blended), 0, 255));
                }
            }
        }
    });
    return out;
}

/// 1-px rectangle outlines in the line colour, clipped to the frame.
inline ImageBuffer draw_window_trace(const ImageBuffer& frame, const std::vector<WindowRect>& trace,
                                     const OverlayStyle& style) {
    ImageBuffer out = frame;
    auto paint = [&](int x, int y) {
        if (!out.contains(x, y)) return;
        if (out.channels() == 3) {
            out.at(x, y, 0) = style.line.r;
            out.at(x, y, 1) = style.line.g;
            out.at(x, y, 2) = style.line.b;
        } else {
            out.at(x, y) = 255;
        }
    };
    for (const auto& r : trace) {
        if (r.x1 <= r.x0 || r.y1 <= r.y0) continue;
        const int xa = std::max(r.x0, 0), xb = std::min(r.x1 - 1, out.width() - 1);
        for (int x = xa; x <= xb; ++x) {
            paint(x, r.y0);
            paint(x, r.y1 - 1);
        }
        const int ya = std::max(r.y0, 0), yb = std::min(r.y1 - 1, out.height() - 1);
        for (int y = ya; y <= yb; ++y) {
            paint(r.x0, y);
            paint(r.x1 - 1, y);
        }
    }
    return out;
}

}  // namespace lanekit
