#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lanekit/error.hpp"
#include "lanekit/point.hpp"
#include "lanekit/segmentation.hpp"

namespace lanekit {

struct SlidingWindowConfig {
    int n_windows = 9;
    int margin = 100;
    int minpix = 50;

    void validate() const {
        if (n_windows < 1 || margin < 1 || minpix < 1) {
            throw Error(ErrorKind::ConfigError, "sliding window parameters must be >= 1");
        }
    }
};

struct PixelPos {
    int x = 0;
    int y = 0;
    friend bool operator==(PixelPos, PixelPos) = default;
    friend auto operator<=>(PixelPos, PixelPos) = default;
};

/// x = a*y^2 + b*y + c in bird's-eye pixel units.
struct LaneFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    std::size_t n_pixels = 0;
    double residual_rms = 0.0;

    double x_at(double y) const noexcept { return (a * y + b) * y + c; }
};

enum class Side { Left, Right };

inline std::string_view to_string(Side s) { return s == Side::Left ? "left" : "right"; }

enum class RejectReason { None, Width, Parallelism, Residual, NotFound };

inline std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::None: return "none";
        case RejectReason::Width: return "width";
        case RejectReason::Parallelism: return "parallelism";
        case RejectReason::Residual: return "residual";
        case RejectReason::NotFound: return "not_found";
    }
    return "?";
}

struct LanePair {
    LaneFit left;
    LaneFit right;
    bool accepted = false;
    RejectReason reason = RejectReason::None;
};

struct BaseColumns {
    int left = 0;
    int right = 0;
};

/// Column sums over the lower half; argmax per half with ties to the lowest column.
inline BaseColumns base_histogram(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> hist(static_cast<std::size_t>(w), 0);
    for (int y = h / 2; y < h; ++y) {
        const auto* row = mask.row(y);
        for (int x = 0; x < w; ++x) hist[static_cast<std::size_t>(x)] += row[x];
    }
    auto argmax = [&](int begin, int end, Side side) {
        int best = -1;
        int best_count = 0;
        for (int x = begin; x < end; ++x) {
            if (hist[static_cast<std::size_t>(x)] > best_count) {
                best_count = hist[static_cast<std::size_t>(x)];
                best = x;
            }
        }
        if (best < 0) throw Error(ErrorKind::LaneNotFound, std::string(to_string(side)) + " lane has no pixels");
        return best;
    };
    return {argmax(0, w / 2, Side::Left), argmax(w / 2, w, Side::Right)};
}

/// Window rectangle [x0, x1) x [y0, y1) in mask coordinates (may extend past the image).
struct WindowRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    Side side = Side::Left;
};

struct LanePixels {
    std::vector<PixelPos> left;
    std::vector<PixelPos> right;
    std::vector<WindowRect> trace;
};

/// Stacks n_windows windows per side from the bottom up, each +/-margin around
/// the current centre; a window holding >= minpix pixels recentres the next one
/// on their mean x. A pixel inside both sides' windows goes to the left lane.
inline LanePixels sliding_window_search(const BinaryMask& mask, const SlidingWindowConfig& cfg) {
    cfg.validate();
    const BaseColumns base = base_histogram(mask);
    const int w = mask.width();
    const int h = mask.height();
    int centre[2] = {base.left, base.right};
    LanePixels out;
    for (int i = 0; i < cfg.n_windows; ++i) {
        const int y_hi = h - static_cast<int>(static_cast<long long>(i) * h / cfg.n_windows);
        const int y_lo = h - static_cast<int>(static_cast<long long>(i + 1) * h / cfg.n_windows);
        WindowRect win[2];
        for (int s = 0; s < 2; ++s) {
            win[s] = {centre[s] - cfg.margin, y_lo, centre[s] + cfg.margin, y_hi, s == 0 ? Side::Left : Side::Right};
            out.trace.push_back(win[s]);
        }
        long long sum[2] = {0, 0};
        std::size_t count[2] = {0, 0};
        for (int y = y_lo; y < y_hi; ++y) {
            const auto* row = mask.row(y);
            const int xa = std::max(0, std::min(win[0].x0, win[1].x0));
            const int xb = std::min(w, std::max(win[0].x1, win[1].x1));
            for (int x = xa; x < xb; ++x) {
                if (!row[x]) continue;
                for (int s = 0; s < 2; ++s) {
                    if (x >= win[s].x0 && x < win[s].x1) {
                        (s == 0 ? out.left : out.right).push_back({x, y});
                        sum[s] += x;
                        ++count[s];
                        break;
                    }
                }
            }
        }
        for (int s = 0; s < 2; ++s) {
            if (count[s] >= static_cast<std::size_t>(cfg.minpix)) {
                centre[s] = static_cast<int>(std::lround(static_cast<double>(sum[s]) / static_cast<double>(count[s])));
            }
        }
    }
    return out;
}

/// Least-squares quadratic x(y). Solves the normal equations in the centred,
/// half-range-scaled variable t = (y - mean) / half_range, then maps the
/// coefficients back to pixel units.
/// Accepts any sized range of points with numeric x and y members.
template <std::ranges::sized_range Points>
LaneFit fit_polynomial(const Points& pixels) {
    if (std::ranges::size(pixels) < 3) {
        throw Error(ErrorKind::InsufficientPixels, "need at least 3 pixels to fit a lane");
    }
    double ymin = std::ranges::begin(pixels)->y;
    double ymax = ymin;
    double ysum = 0.0;
    for (const auto& p : pixels) {
        ymin = std::min(ymin, static_cast<double>(p.y));
        ymax = std::max(ymax, static_cast<double>(p.y));
        ysum += p.y;
    }
    if (ymin == ymax) throw Error(ErrorKind::DegenerateGeometry, "all lane pixels share one row");
    const double n = static_cast<double>(std::ranges::size(pixels));
    const double mean = ysum / n;
    const double half = 0.5 * (ymax - ymin);

    // Moments of t and cross terms with x.
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0, sx = 0, stx = 0, st2x = 0;
    for (const auto& p : pixels) {
        const double t = (p.y - mean) / half;
        const double t2 = t * t;
        s1 += t;
        s2 += t2;
        s3 += t2 * t;
        s4 += t2 * t2;
        sx += p.x;
        stx += t * p.x;
        st2x += t2 * p.x;
    }
    double m[3][4] = {{n, s1, s2, sx}, {s1, s2, s3, stx}, {s2, s3, s4, st2x}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        if (std::fabs(m[piv][col]) < 1e-12 * n) {
            throw Error(ErrorKind::DegenerateGeometry, "lane pixels span fewer than 3 distinct rows");
        }
        std::swap(m[piv], m[col]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    const double p0 = m[0][3] / m[0][0];
    const double p1 = m[1][3] / m[1][1];
    const double p2 = m[2][3] / m[2][2];

    double sse = 0.0;
    for (const auto& p : pixels) {
        const double t = (p.y - mean) / half;
        const double r = p.x - (p0 + t * (p1 + t * p2));
        sse += r * r;
    }

    LaneFit fit;
    fit.a = p2 / (half * half);
    fit.b = p1 / half - 2.0 * p2 * mean / (half * half);
    fit.c = p0 - p1 * mean / half + p2 * mean * mean / (half * half);
    fit.n_pixels = std::ranges::size(pixels);
    fit.residual_rms = std::sqrt(sse / n);
    return fit;
}

/// Pixels within margin of each side's prior curve (rounded to the pixel grid).
/// A pixel near both curves goes to the left lane.
inline LanePixels search_around_fit(const BinaryMask& mask, const LanePair& prior, int margin) {
    LanePixels out;
    const int w = mask.width();
    for (int y = 0; y < mask.height(); ++y) {
        const auto* row = mask.row(y);
        const long long lx = std::llround(prior.left.x_at(y));
        const long long rx = std::llround(prior.right.x_at(y));
        auto scan = [&](long long centre, bool left) {
            const long long from = std::max<long long>(0, centre - margin);
            const long long to = std::min<long long>(w - 1, centre + margin);
            for (long long x = from; x <= to; ++x) {
                if (!row[x]) continue;
                if (left) {
                    out.left.push_back({static_cast<int>(x), y});
                } else if (std::llabs(x - lx) > margin) {
                    out.right.push_back({static_cast<int>(x), y});
                }
            }
        };
        scan(lx, true);
        scan(rx, false);
    }
    return out;
}

struct SanityConfig {
    double min_width = 500.0;
    double max_width = 900.0;
    double max_width_change = 0.4;
    double max_residual = 50.0;
};

/// Accepts the pair when the bottom-row width is within [min_width, max_width],
/// top and bottom widths differ by less than max_width_change (relative to the
/// bottom width), and both residuals are below max_residual.
inline LanePair validate_pair(const LaneFit& left, const LaneFit& right, Size image, const SanityConfig& sanity) {
    LanePair pair{left, right, false, RejectReason::None};
    const double bottom = right.x_at(image.height - 1) - left.x_at(image.height - 1);
    const double top = right.x_at(0) - left.x_at(0);
    if (!(bottom >= sanity.min_width && bottom <= sanity.max_width)) {
        pair.reason = RejectReason::Width;
    } else if (!(std::fabs(top - bottom) < sanity.max_width_change * bottom)) {
        pair.reason = RejectReason::Parallelism;
    } else if (!(left.residual_rms < sanity.max_residual && right.residual_rms < sanity.max_residual)) {
        pair.reason = RejectReason::Residual;
    } else {
        pair.accepted = true;
    }
    return pair;
}

enum class FrameMode { SlidingWindow, AroundPrior };

inline std::string_view to_string(FrameMode m) { return m == FrameMode::SlidingWindow ? "sliding_window" : "around_prior"; }

struct TrackerConfig {
    SlidingWindowConfig windows;
    SanityConfig sanity;
    double alpha = 0.2;
    int miss_threshold = 5;
    int search_margin = 100;
};

struct TrackerState {
    std::optional<LanePair> last_accepted;
    std::optional<LanePair> smoothed;
    int consecutive_misses = 0;
    FrameMode mode = FrameMode::SlidingWindow;
};

struct TrackResult {
    TrackerState state;
    LanePair pair;
    FrameMode mode = FrameMode::SlidingWindow;
    std::vector<WindowRect> trace;
};

namespace detail {

inline LaneFit ema(const LaneFit& prev, const LaneFit& cur, double alpha) {
    LaneFit out = cur;
    out.a = alpha * cur.a + (1.0 - alpha) * prev.a;
    out.b = alpha * cur.b + (1.0 - alpha) * prev.b;
    out.c = alpha * cur.c + (1.0 - alpha) * prev.c;
    return out;
}

}  // namespace detail

/// One step of the tracking state machine. Searches around the last accepted
/// pair while fewer than miss_threshold consecutive misses have occurred,
/// otherwise runs the sliding-window search. Accepted pairs update the
/// exponential moving average of the coefficients; a miss re-emits the last
/// smoothed pair flagged as rejected.
inline TrackResult track_frame(const TrackerState& state, const BinaryMask& mask, const TrackerConfig& cfg) {
    TrackResult res;
    res.state = state;
    const bool use_prior = state.last_accepted.has_value() && state.consecutive_misses < cfg.miss_threshold;
    res.mode = use_prior ? FrameMode::AroundPrior : FrameMode::SlidingWindow;
    res.state.mode = res.mode;

    std::optional<LanePair> candidate;
    RejectReason reason = RejectReason::NotFound;
    try {
        LanePixels px = use_prior ? search_around_fit(mask, *state.last_accepted, cfg.search_margin)
                                  : sliding_window_search(mask, cfg.windows);
        res.trace = std::move(px.trace);
        const LaneFit left = fit_polynomial(px.left);
        const LaneFit right = fit_polynomial(px.right);
        candidate = validate_pair(left, right, {mask.width(), mask.height()}, cfg.sanity);
        reason = candidate->reason;
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::LaneNotFound:
            case ErrorKind::InsufficientPixels:
            case ErrorKind::DegenerateGeometry: break;
            default: throw;
        }
    }

    if (candidate && candidate->accepted) {
        LanePair smooth = *candidate;
        if (state.smoothed) {
            smooth.left = detail::ema(state.smoothed->left, candidate->left, cfg.alpha);
            smooth.right = detail::ema(state.smoothed->right, candidate->right, cfg.alpha);
        }
        res.state.last_accepted = *candidate;
        res.state.smoothed = smooth;
        res.state.consecutive_misses = 0;
        res.pair = smooth;
        return res;
    }

    if (!state.smoothed) {
        throw Error(ErrorKind::NoPriorAndNoDetection,
                    "no lane pair detected and no earlier detection to fall back on (" + std::string(to_string(reason)) + ")");
    }
    res.state.consecutive_misses = state.consecutive_misses + 1;
    res.pair = *state.smoothed;
    res.pair.accepted = false;
    res.pair.reason = reason;
    return res;
}

}  // namespace lanekit
