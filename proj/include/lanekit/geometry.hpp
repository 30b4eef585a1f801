#pragma once

#include <cmath>
#include <optional>

#include "lanekit/error.hpp"
#include "lanekit/lane_detect.hpp"

namespace lanekit {

/// Meters per bird's-eye pixel. The defaults assume a 3.7 m lane spanning
/// 700 px and 30 m of road over 720 rows.
struct ScaleConfig {
    double xm_per_pix = 3.7 / 700.0;
    double ym_per_pix = 30.0 / 720.0;

    void validate() const {
        if (!(xm_per_pix > 0.0) || !(ym_per_pix > 0.0)) {
            throw Error(ErrorKind::ConfigError, "meter-per-pixel scales must be positive");
        }
    }
};

/// x_m = a_m*y_m^2 + b_m*y_m + c_m.
struct MeterFit {
    double a_m = 0.0;
    double b_m = 0.0;
    double c_m = 0.0;
};

struct FrameMetrics {
    std::optional<double> left_radius_m;
    std::optional<double> right_radius_m;
    std::optional<double> mean_radius_m;
    double offset_m = 0.0;
    double frame_time_ms = 0.0;
};

inline MeterFit to_meter_space(const LaneFit& fit, const ScaleConfig& scale) {
    return {fit.a * scale.xm_per_pix / (scale.ym_per_pix * scale.ym_per_pix), fit.b * scale.xm_per_pix / scale.ym_per_pix,
            fit.c * scale.xm_per_pix};
}

/// |a_m| below this (per meter) is reported as straight.
inline constexpr double kStraightCurvature = 1e-7;

/// Radius of curvature at row y_eval; nullopt means straight.
inline std::optional<double> curvature_radius(const LaneFit& fit, double y_eval, const ScaleConfig& scale) {
    const MeterFit m = to_meter_space(fit, scale);
    if (std::fabs(m.a_m) < kStraightCurvature) return std::nullopt;
    const double y = y_eval * scale.ym_per_pix;
    const double slope = 2.0 * m.a_m * y + m.b_m;
    return std::pow(1.0 + slope * slope, 1.5) / std::fabs(2.0 * m.a_m);
}

/// Signed offset of the image centre from the lane centre at the bottom row,
/// without checking whether the pair was accepted.
inline double lane_center_offset(const LanePair& pair, int img_width, int img_height, const ScaleConfig& scale) {
    const double y = img_height - 1.0;
    const double centre = 0.5 * (pair.left.x_at(y) + pair.right.x_at(y));
    return (0.5 * img_width - centre) * scale.xm_per_pix;
}

/// Positive when the vehicle (image centre) is right of the lane centre.
inline double vehicle_offset(const LanePair& pair, int img_width, int img_height, const ScaleConfig& scale) {
    if (!pair.accepted) throw Error(ErrorKind::RejectedPair, "offset requires an accepted lane pair");
    return lane_center_offset(pair, img_width, img_height, scale);
}

/// Radii at the bottom row and the offset; the mean radius averages whichever
/// sides are curved.
inline FrameMetrics compute_metrics(const LanePair& pair, int img_width, int img_height, const ScaleConfig& scale) {
    FrameMetrics m;
    const double y = img_height - 1.0;
    m.left_radius_m = curvature_radius(pair.left, y, scale);
    m.right_radius_m = curvature_radius(pair.right, y, scale);
    if (m.left_radius_m && m.right_radius_m) {
        m.mean_radius_m = 0.5 * (*m.left_radius_m + *m.right_radius_m);
    } else if (m.left_radius_m) {
        m.mean_radius_m = m.left_radius_m;
    } else {
        m.mean_radius_m = m.right_radius_m;
    }
    m.offset_m = lane_center_offset(pair, img_width, img_height, scale);
    return m;
}

}  // namespace lanekit
