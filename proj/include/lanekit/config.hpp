#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "lanekit/error.hpp"
#include "lanekit/geometry.hpp"
#include "lanekit/lane_detect.hpp"
#include "lanekit/overlay.hpp"
#include "lanekit/perspective.hpp"
#include "lanekit/segmentation.hpp"

namespace lanekit {

struct PipelineConfig {
    std::optional<std::filesystem::path> calibration_file;
    QuadFractions quad;
    ThresholdConfig thresholds = ThresholdConfig::defaults();
    SlidingWindowConfig windows;
    ScaleConfig scale;
    double tracker_alpha = 0.2;
    int miss_threshold = 5;
    int search_margin = 100;
    SanityConfig sanity;
    OverlayStyle overlay;
    bool debug = false;
    bool record_timing = true;

    TrackerConfig tracker() const { return {windows, sanity, tracker_alpha, miss_threshold, search_margin}; }

    void validate() const {
        for (const auto* pts : {&quad.src, &quad.dst}) {
            for (const auto& p : *pts) {
                if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
                    throw Error(ErrorKind::ConfigError, "perspective coordinates must be fractions in [0, 1]");
                }
            }
        }
        thresholds.validate();
        windows.validate();
        scale.validate();
        overlay.validate();
        if (!(tracker_alpha > 0.0 && tracker_alpha <= 1.0)) throw Error(ErrorKind::ConfigError, "tracker.alpha must be in (0, 1]");
        if (miss_threshold < 1) throw Error(ErrorKind::ConfigError, "tracker.miss_threshold must be >= 1");
        if (search_margin < 1) throw Error(ErrorKind::ConfigError, "tracker.search_margin must be >= 1");
        if (!(sanity.min_width > 0.0 && sanity.min_width <= sanity.max_width)) {
            throw Error(ErrorKind::ConfigError, "sanity widths must satisfy 0 < min_width <= max_width");
        }
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class ConfigLine {
public:
    ConfigLine(int line, std::string key, std::string value) : line_(line), key_(std::move(key)), value_(std::move(value)) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorKind::ConfigError, "config line " + std::to_string(line_) + " (" + key_ + "): " + why);
    }

    double number() const {
        double v = 0.0;
        const auto* end = value_.data() + value_.size();
        const auto [ptr, ec] = std::from_chars(value_.data(), end, v);
        if (ec != std::errc() || ptr != end) fail("expected a number, got '" + value_ + "'");
        return v;
    }

    int integer() const {
        int v = 0;
        const auto* end = value_.data() + value_.size();
        const auto [ptr, ec] = std::from_chars(value_.data(), end, v);
        if (ec != std::errc() || ptr != end) fail("expected an integer, got '" + value_ + "'");
        return v;
    }

    bool boolean() const {
        if (value_ == "true" || value_ == "1" || value_ == "on") return true;
        if (value_ == "false" || value_ == "0" || value_ == "off") return false;
        fail("expected true or false, got '" + value_ + "'");
    }

    Rgb color() const {
        std::istringstream ss(value_);
        int r = -1, g = -1, b = -1;
        std::string extra;
        if (!(ss >> r >> g >> b) || (ss >> extra) || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
            fail("expected three integers in [0, 255]");
        }
        return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    }

    const std::string& value() const { return value_; }

private:
    int line_;
    std::string key_;
    std::string value_;
};

}  // namespace detail

/// Parses "key = value" lines. '#' starts a comment line; values may be wrapped
/// in double quotes. Unknown keys are errors. Relative calibration paths are
/// resolved against base_dir.
inline PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    PipelineConfig cfg;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(detail::trim(line.substr(0, eq)));
        std::string_view v = detail::trim(line.substr(eq + 1));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        const detail::ConfigLine c(line_no, key, std::string(v));

        if (key == "calibration.file") {
            std::filesystem::path p(c.value());
            cfg.calibration_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (key.starts_with("perspective.")) {
            const std::string_view rest = std::string_view(key).substr(12);
            // srcN_x / dstN_y
            if (rest.size() != 6 || (rest.substr(0, 3) != "src" && rest.substr(0, 3) != "dst") || rest[3] < '0' ||
                rest[3] > '3' || rest[4] != '_' || (rest[5] != 'x' && rest[5] != 'y')) {
                c.fail("unknown key");
            }
            auto& pts = rest.substr(0, 3) == "src" ? cfg.quad.src : cfg.quad.dst;
            auto& pt = pts[static_cast<std::size_t>(rest[3] - '0')];
            (rest[5] == 'x' ? pt.x : pt.y) = c.number();
        } else if (key.starts_with("threshold.rule.")) {
            const std::string name = key.substr(15);
            if (name.empty()) c.fail("missing rule name");
            std::istringstream ss(c.value());
            std::string source;
            double lo = 0.0, hi = 0.0;
            std::string extra;
            if (!(ss >> source >> lo >> hi) || (ss >> extra)) c.fail("expected '<source> <lo> <hi>'");
            cfg.thresholds.set_rule({name, parse_rule_source(source), lo, hi});
        } else if (key == "threshold.combine") {
            cfg.thresholds.combine_expr = parse_mask_expr(c.value());
        } else if (key == "threshold.adaptive") {
            cfg.thresholds.adaptive.enabled = c.boolean();
        } else if (key == "threshold.adaptive.max_fraction") {
            cfg.thresholds.adaptive.max_fraction = c.number();
        } else if (key == "threshold.adaptive.reference_quantile") {
            cfg.thresholds.adaptive.reference_quantile = c.number();
        } else if (key == "threshold.adaptive.ratio") {
            cfg.thresholds.adaptive.ratio = c.number();
        } else if (key == "threshold.adaptive.floor_fraction") {
            cfg.thresholds.adaptive.floor_fraction = c.number();
        } else if (key == "window.count") {
            cfg.windows.n_windows = c.integer();
        } else if (key == "window.margin") {
            cfg.windows.margin = c.integer();
        } else if (key == "window.minpix") {
            cfg.windows.minpix = c.integer();
        } else if (key == "scale.xm_per_pix") {
            cfg.scale.xm_per_pix = c.number();
        } else if (key == "scale.ym_per_pix") {
            cfg.scale.ym_per_pix = c.number();
        } else if (key == "tracker.alpha") {
            cfg.tracker_alpha = c.number();
        } else if (key == "tracker.miss_threshold") {
            cfg.miss_threshold = c.integer();
        } else if (key == "tracker.search_margin") {
            cfg.search_margin = c.integer();
        } else if (key == "sanity.min_width") {
            cfg.sanity.min_width = c.number();
        } else if (key == "sanity.max_width") {
            cfg.sanity.max_width = c.number();
        } else if (key == "sanity.max_width_change") {
            cfg.sanity.max_width_change = c.number();
        } else if (key == "sanity.max_residual") {
            cfg.sanity.max_residual = c.number();
        } else if (key == "overlay.fill") {
            cfg.overlay.fill = c.color();
        } else if (key == "overlay.alpha") {
            cfg.overlay.alpha = c.number();
        } else if (key == "overlay.line") {
            cfg.overlay.line = c.color();
        } else if (key == "overlay.text") {
            cfg.overlay.text = c.color();
        } else if (key == "overlay.glyph_scale") {
            cfg.overlay.glyph_scale = c.integer();
        } else if (key == "output.timing") {
            cfg.record_timing = c.boolean();
        } else if (key == "debug") {
            cfg.debug = c.boolean();
        } else {
            c.fail("unknown key");
        }
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
    std::istringstream in(text);
    return parse_config(in, base_dir);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileError, "cannot open config " + path.string());
    return parse_config(in, path.parent_path());
}

}  // namespace lanekit
