#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lanekit/error.hpp"
#include "lanekit/image.hpp"

namespace lanekit {

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false) : width_(width), height_(height) {
        if (width < 1 || height < 1) throw Error(ErrorKind::DimensionMismatch, "mask dimensions must be positive");
        bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool get(int x, int y) const noexcept { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v = true) noexcept { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    std::uint8_t* row(int y) noexcept { return bits_.data() + static_cast<std::size_t>(y) * width_; }
    const std::uint8_t* row(int y) const noexcept { return bits_.data() + static_cast<std::size_t>(y) * width_; }

    std::vector<std::uint8_t>& bits() noexcept { return bits_; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool same_shape(const BinaryMask& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Inclusive on both ends: bit set iff lo <= value <= hi.
inline BinaryMask channel_threshold(const PlaneF32& plane, double lo, double hi) {
    if (lo > hi) throw Error(ErrorKind::InvalidRange, "threshold lo exceeds hi");
    BinaryMask mask(plane.width(), plane.height());
    const auto src = plane.samples();
    auto& dst = mask.bits();
    const float flo = static_cast<float>(lo), fhi = static_cast<float>(hi);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] >= flo && src[i] <= fhi) ? 1 : 0;
    return mask;
}

enum class GradientKind { X, Y, Magnitude, Direction };

/// The plane gradient thresholds are applied to: |gradient| rescaled to
/// [0, 255] by its maximum, or the direction in radians.
inline PlaneF32 gradient_plane(const PlaneF32& gray, GradientKind kind) {
    if (gray.width() < 3 || gray.height() < 3) throw Error(ErrorKind::ImageTooSmall, "gradient needs a 3x3 plane");
    PlaneF32 out;
    switch (kind) {
        case GradientKind::X: out = sobel(gray, Axis::X); break;
        case GradientKind::Y: out = sobel(gray, Axis::Y); break;
        case GradientKind::Magnitude: out = grad_magnitude(sobel(gray, Axis::X), sobel(gray, Axis::Y)); break;
        case GradientKind::Direction: return grad_direction(sobel(gray, Axis::X), sobel(gray, Axis::Y));
    }
    auto s = out.samples();
    float mx = 0.0f;
    for (float& v : s) {
        v = std::fabs(v);
        mx = std::max(mx, v);
    }
    if (mx > 0.0f) {
        const float k = 255.0f / mx;
        for (float& v : s) v *= k;
    }
    return out;
}

inline BinaryMask gradient_threshold(const PlaneF32& gray, GradientKind kind, double lo, double hi) {
    if (lo > hi) throw Error(ErrorKind::InvalidRange, "threshold lo exceeds hi");
    return channel_threshold(gradient_plane(gray, kind), lo, hi);
}

/// Boolean combination tree over rule names.
struct MaskExpr {
    enum class Op { Ref, Not, And, Or };
    Op op = Op::Ref;
    std::string name;
    std::vector<MaskExpr> args;

    static MaskExpr ref(std::string n) { return {Op::Ref, std::move(n), {}}; }
    static MaskExpr negate(MaskExpr e) { return {Op::Not, {}, {std::move(e)}}; }
    static MaskExpr both(MaskExpr a, MaskExpr b) { return {Op::And, {}, {std::move(a), std::move(b)}}; }
    static MaskExpr either(MaskExpr a, MaskExpr b) { return {Op::Or, {}, {std::move(a), std::move(b)}}; }

    void collect_names(std::set<std::string>& out) const {
        if (op == Op::Ref) out.insert(name);
        for (const auto& a : args) a.collect_names(out);
    }

    std::string to_string() const {
        switch (op) {
            case Op::Ref: return name;
            case Op::Not: return "!" + args[0].to_string();
            case Op::And: return "(" + args[0].to_string() + " & " + args[1].to_string() + ")";
            case Op::Or: return "(" + args[0].to_string() + " | " + args[1].to_string() + ")";
        }
        return {};
    }
};

namespace detail {

// Recursive-descent parser; `or` binds loosest, then `and`, then `not`.
// Accepts | & ! and the words or/and/not.
class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    MaskExpr parse() {
        MaskExpr e = parse_or();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    MaskExpr parse_or() {
        MaskExpr lhs = parse_and();
        while (accept("|") || accept_word("or")) lhs = MaskExpr::either(std::move(lhs), parse_and());
        return lhs;
    }
    MaskExpr parse_and() {
        MaskExpr lhs = parse_not();
        while (accept("&") || accept_word("and")) lhs = MaskExpr::both(std::move(lhs), parse_not());
        return lhs;
    }
    MaskExpr parse_not() {
        if (accept("!") || accept_word("not")) return MaskExpr::negate(parse_not());
        if (accept("(")) {
            MaskExpr e = parse_or();
            if (!accept(")")) fail("missing ')'");
            return e;
        }
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (start == pos_) fail("expected a rule name");
        return MaskExpr::ref(std::string(text_.substr(start, pos_ - start)));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool accept(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    bool accept_word(std::string_view word) {
        skip_ws();
        if (pos_ + word.size() > text_.size()) return false;
        for (std::size_t i = 0; i < word.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(text_[pos_ + i])) != word[i]) return false;
        }
        const std::size_t end = pos_ + word.size();
        if (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
            return false;
        }
        pos_ = end;
        return true;
    }
    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorKind::ParseError, "combine expression: " + why + " at offset " + std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline MaskExpr parse_mask_expr(std::string_view text) { return detail::ExprParser(text).parse(); }

inline BinaryMask combine(const std::map<std::string, BinaryMask>& masks, const MaskExpr& expr) {
    const BinaryMask* shape = nullptr;
    for (const auto& [name, m] : masks) {
        if (shape && !shape->same_shape(m)) throw Error(ErrorKind::DimensionMismatch, "mask '" + name + "' differs in size");
        shape = &m;
    }
    switch (expr.op) {
        case MaskExpr::Op::Ref: {
            const auto it = masks.find(expr.name);
            if (it == masks.end()) throw Error(ErrorKind::UnknownRuleName, "no mask named '" + expr.name + "'");
            return it->second;
        }
        case MaskExpr::Op::Not: {
            BinaryMask m = combine(masks, expr.args[0]);
            for (auto& b : m.bits()) b ^= 1;
            return m;
        }
        case MaskExpr::Op::And:
        case MaskExpr::Op::Or: {
            BinaryMask a = combine(masks, expr.args[0]);
            const BinaryMask b = combine(masks, expr.args[1]);
            auto& ab = a.bits();
            const auto& bb = b.bits();
            if (expr.op == MaskExpr::Op::And) {
                for (std::size_t i = 0; i < ab.size(); ++i) ab[i] &= bb[i];
            } else {
                for (std::size_t i = 0; i < ab.size(); ++i) ab[i] |= bb[i];
            }
            return a;
        }
    }
    return {};
}

/// What a rule thresholds: a color channel, or a Sobel-derived plane of the luma.
struct RuleSource {
    enum class Kind { Color, Gradient };
    Kind kind = Kind::Color;
    ColorChannel channel = ColorChannel::Gray;
    GradientKind gradient = GradientKind::X;

    static RuleSource color(ColorChannel c) { return {Kind::Color, c, GradientKind::X}; }
    static RuleSource grad(GradientKind g) { return {Kind::Gradient, ColorChannel::Gray, g}; }

    friend bool operator==(const RuleSource&, const RuleSource&) = default;
};

inline constexpr std::array<std::pair<std::string_view, ColorChannel>, 14> kColorSourceNames{{
    {"gray", ColorChannel::Gray},
    {"rgb_r", ColorChannel::RgbR},
    {"rgb_g", ColorChannel::RgbG},
    {"rgb_b", ColorChannel::RgbB},
    {"rgb_min", ColorChannel::RgbMin},
    {"hls_h", ColorChannel::HlsH},
    {"hls_l", ColorChannel::HlsL},
    {"hls_s", ColorChannel::HlsS},
    {"hsv_h", ColorChannel::HsvH},
    {"hsv_s", ColorChannel::HsvS},
    {"hsv_v", ColorChannel::HsvV},
    {"lab_l", ColorChannel::LabL},
    {"lab_a", ColorChannel::LabA},
    {"lab_b", ColorChannel::LabB},
}};

inline constexpr std::array<std::pair<std::string_view, GradientKind>, 4> kGradientSourceNames{{
    {"sobel_x", GradientKind::X},
    {"sobel_y", GradientKind::Y},
    {"grad_mag", GradientKind::Magnitude},
    {"grad_dir", GradientKind::Direction},
}};

inline RuleSource parse_rule_source(std::string_view name) {
    for (const auto& [n, c] : kColorSourceNames)
        if (n == name) return RuleSource::color(c);
    for (const auto& [n, g] : kGradientSourceNames)
        if (n == name) return RuleSource::grad(g);
    throw Error(ErrorKind::ConfigError, "unknown threshold source '" + std::string(name) + "'");
}

inline std::string rule_source_name(const RuleSource& s) {
    if (s.kind == RuleSource::Kind::Color) {
        for (const auto& [n, c] : kColorSourceNames)
            if (c == s.channel) return std::string(n);
    } else {
        for (const auto& [n, g] : kGradientSourceNames)
            if (g == s.gradient) return std::string(n);
    }
    return "?";
}

struct ThresholdRule {
    std::string name;
    RuleSource source;
    double lo = 0.0;
    double hi = 1.0;
};

/// Per-frame threshold adaptation for color rules.
///
/// Luminance-type rules (gray, RGB, HLS-L, HSV-V, LAB-L) follow the frame's
/// exposure: their lower bound becomes
///   lo' = clamp(ratio * P(reference_quantile), floor_fraction * lo, lo)
/// Every adapted rule is then raised, if needed, to the smallest bound that
/// lets at most max_fraction of the in-view pixels pass. Chroma rules (S, a*,
/// b*) and Sobel x/y/magnitude get only this cap. Hue and gradient direction
/// are never adapted.
struct AdaptiveConfig {
    bool enabled = true;
    double max_fraction = 0.08;
    double reference_quantile = 0.998;
    double ratio = 0.8;
    double floor_fraction = 0.35;
};

struct ThresholdConfig {
    std::vector<ThresholdRule> rules;
    MaskExpr combine_expr;
    AdaptiveConfig adaptive;

    const ThresholdRule* find(std::string_view name) const {
        for (const auto& r : rules)
            if (r.name == name) return &r;
        return nullptr;
    }

    void set_rule(ThresholdRule rule) {
        for (auto& r : rules) {
            if (r.name == rule.name) {
                r = std::move(rule);
                return;
            }
        }
        rules.push_back(std::move(rule));
    }

    void validate() const {
        for (const auto& r : rules) {
            if (r.lo > r.hi) throw Error(ErrorKind::InvalidRange, "rule '" + r.name + "' has lo > hi");
        }
        std::set<std::string> names;
        combine_expr.collect_names(names);
        for (const auto& n : names) {
            if (!find(n)) throw Error(ErrorKind::UnknownRuleName, "combine expression references undefined rule '" + n + "'");
        }
        if (!(adaptive.max_fraction > 0.0 && adaptive.max_fraction <= 1.0)) {
            throw Error(ErrorKind::ConfigError, "adaptive max_fraction must be in (0, 1]");
        }
    }

    /// Yellow via HLS saturation or LAB b*, white via the RGB minimum channel,
    /// plus horizontal luma gradient edges.
    static ThresholdConfig defaults() {
        ThresholdConfig cfg;
        cfg.rules = {
            {"yellow_s", RuleSource::color(ColorChannel::HlsS), 0.67, 1.0},
            // b* of 155 on the 0..255 encoding (b* + 128).
            {"yellow_b", RuleSource::color(ColorChannel::LabB), 27.0, 127.0},
            {"white", RuleSource::color(ColorChannel::RgbMin), 200.0 / 255.0, 1.0},
            {"edges", RuleSource::grad(GradientKind::X), 20.0, 100.0},
        };
        cfg.combine_expr = parse_mask_expr("yellow_s | yellow_b | white | edges");
        return cfg;
    }
};

enum class Adaptation { None, CapOnly, Exposure };

inline Adaptation adaptation_for(const RuleSource& s) {
    if (s.kind != RuleSource::Kind::Color) return s.gradient == GradientKind::Direction ? Adaptation::None : Adaptation::CapOnly;
    switch (s.channel) {
        case ColorChannel::HlsH:
        case ColorChannel::HsvH: return Adaptation::None;
        case ColorChannel::HlsS:
        case ColorChannel::HsvS:
        case ColorChannel::LabA:
        case ColorChannel::LabB: return Adaptation::CapOnly;
        default: return Adaptation::Exposure;
    }
}

/// Lower bound after per-frame adaptation (see AdaptiveConfig). Only pixels
/// set in region count; a null region means the whole plane.
inline double adaptive_lower_bound(const PlaneF32& plane, double lo, const AdaptiveConfig& cfg, Adaptation mode,
                                   const BinaryMask* region = nullptr) {
    if (mode == Adaptation::None) return lo;
    if (region && (region->width() != plane.width() || region->height() != plane.height())) {
        throw Error(ErrorKind::DimensionMismatch, "adaptation region differs in size from the plane");
    }
    const auto s = plane.samples();
    auto inside = [&](std::size_t i) { return !region || region->bits()[i] != 0; };
    float vmin = std::numeric_limits<float>::max(), vmax = std::numeric_limits<float>::lowest();
    std::size_t n_in = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!inside(i)) continue;
        vmin = std::min(vmin, s[i]);
        vmax = std::max(vmax, s[i]);
        ++n_in;
    }
    if (n_in == 0 || !(vmax > vmin)) return lo;
    constexpr int kBins = 1024;
    const double width = (static_cast<double>(vmax) - vmin) / kBins;
    std::array<std::size_t, kBins> hist{};
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!inside(i)) continue;
        const int b = std::min(kBins - 1, static_cast<int>((s[i] - vmin) / width));
        ++hist[static_cast<std::size_t>(b)];
    }
    const double n = static_cast<double>(n_in);
    auto edge = [&](int b) { return vmin + b * width; };

    double adapted = lo;
    if (mode == Adaptation::Exposure && lo > 0.0) {
        std::size_t cum = 0;
        double reference = vmax;
        for (int b = 0; b < kBins; ++b) {
            cum += hist[static_cast<std::size_t>(b)];
            if (static_cast<double>(cum) >= cfg.reference_quantile * n) {
                reference = edge(b + 1);
                break;
            }
        }
        adapted = std::clamp(cfg.ratio * reference, cfg.floor_fraction * lo, lo);
    }

    // Smallest bin edge with at most max_fraction of the samples at or above it.
    std::size_t above = 0;
    double cap = vmax;
    for (int b = kBins - 1; b >= 0; --b) {
        if (static_cast<double>(above + hist[static_cast<std::size_t>(b)]) > cfg.max_fraction * n) {
            cap = edge(b + 1);
            break;
        }
        above += hist[static_cast<std::size_t>(b)];
        cap = edge(b);
    }
    return std::max(adapted, cap);
}

/// Planes computed for one frame, each at most once.
class PlaneCache {
public:
    explicit PlaneCache(const ImageBuffer& img) : img_(img) {}

    const PlaneF32& color(ColorChannel c) {
        auto it = color_.find(c);
        if (it == color_.end()) it = color_.emplace(c, color_channel(img_, c)).first;
        return it->second;
    }
    const PlaneF32& gradient(GradientKind g) {
        auto it = grad_.find(g);
        if (it == grad_.end()) it = grad_.emplace(g, gradient_plane(color(ColorChannel::Gray), g)).first;
        return it->second;
    }
    const PlaneF32& plane(const RuleSource& s) {
        return s.kind == RuleSource::Kind::Color ? color(s.channel) : gradient(s.gradient);
    }

private:
    const ImageBuffer& img_;
    std::map<ColorChannel, PlaneF32> color_;
    std::map<GradientKind, PlaneF32> grad_;
};

/// Per-rule masks for every rule the combine expression references.
/// region, when given, marks the in-view pixels that adaptation statistics use.
inline std::map<std::string, BinaryMask> rule_masks(const ImageBuffer& img, const ThresholdConfig& cfg,
                                                    const BinaryMask* region = nullptr) {
    detail::require_rgb(img, "segment_frame");
    cfg.validate();
    std::set<std::string> used;
    cfg.combine_expr.collect_names(used);
    PlaneCache cache(img);
    std::map<std::string, BinaryMask> masks;
    for (const auto& name : used) {
        const ThresholdRule& rule = *cfg.find(name);
        const PlaneF32& plane = cache.plane(rule.source);
        double lo = rule.lo;
        if (cfg.adaptive.enabled) {
            lo = std::min(adaptive_lower_bound(plane, rule.lo, cfg.adaptive, adaptation_for(rule.source), region), rule.hi);
        }
        masks.emplace(name, channel_threshold(plane, lo, rule.hi));
    }
    return masks;
}

inline BinaryMask segment_frame(const ImageBuffer& img, const ThresholdConfig& cfg, const BinaryMask* region = nullptr) {
    return combine(rule_masks(img, cfg, region), cfg.combine_expr);
}

}  // namespace lanekit
