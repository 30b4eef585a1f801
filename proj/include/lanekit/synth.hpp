#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lanekit/calibration.hpp"
#include "lanekit/calibration_io.hpp"
#include "lanekit/config.hpp"
#include "lanekit/error.hpp"
#include "lanekit/geometry.hpp"
#include "lanekit/io.hpp"
#include "lanekit/lane_detect.hpp"
#include "lanekit/parallel.hpp"
#include "lanekit/perspective.hpp"

namespace lanekit {

enum class Condition { Day, Night, Worn };

inline std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::Day: return "day";
        case Condition::Night: return "night";
        case Condition::Worn: return "worn";
    }
    return "day";
}

inline Condition parse_condition(std::string_view s) {
    if (s == "day") return Condition::Day;
    if (s == "night") return Condition::Night;
    if (s == "worn") return Condition::Worn;
    throw Error(ErrorKind::SpecError, "unknown condition '" + std::string(s) + "'");
}

enum class CurvatureProfile { Straight, Constant, Sine };

enum class StripeColor { Yellow, White };

/// Truth for one frame, in bird's-eye pixels.
struct GroundTruthFrame {
    std::string name;
    LaneFit left;
    LaneFit right;
    Condition condition = Condition::Day;
};

struct ScenarioSpec {
    int frames = 50;
    int width = 1280;
    int height = 720;
    Condition condition = Condition::Day;
    double noise_sigma = 0.0;  // 8-bit units
    CurvatureProfile profile = CurvatureProfile::Straight;
    double curvature_radius_m = 0.0;  // signed; positive bends right
    int curvature_period = 100;       // frames, sine profile only
    double lane_width_px = 700.0;
    double stripe_px = 12.0;
    StripeColor left_color = StripeColor::Yellow;
    StripeColor right_color = StripeColor::White;
    bool dashed_right = false;
    double dash_length_px = 100.0;
    double dash_gap_px = 140.0;
    double speed_px = 40.0;  // bird's-eye rows travelled per frame
    double drift_px = 0.0;   // amplitude of lateral lane motion
    int drift_period = 60;
    double night_gain = 0.35;
    double worn_alpha = 0.4;
    bool sealed_cracks = false;  // aged asphalt: dark longitudinal crack-sealant seams
    std::uint64_t seed = 1;
    CameraModel camera = default_camera();
    ScaleConfig scale;
    QuadFractions quad;
    int calibration_views = 0;
    double corner_noise_px = 0.5;
    bool write_masks = true;

    static CameraModel default_camera() {
        CameraModel m;
        m.fx = m.fy = 1000.0;
        m.cx = 640.0;
        m.cy = 360.0;
        m.k1 = -0.2;
        m.k2 = 0.05;
        m.image_width = 1280;
        m.image_height = 720;
        return m;
    }

    void validate() const {
        if (frames < 1) throw Error(ErrorKind::SpecError, "frame count must be positive");
        if (width < 16 || height < 16) throw Error(ErrorKind::SpecError, "frame size must be at least 16x16");
        if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::SpecError, "noise_sigma must be >= 0");
        if (profile != CurvatureProfile::Straight && !(std::fabs(curvature_radius_m) > 0.0)) {
            throw Error(ErrorKind::SpecError, "curved profiles need a nonzero curvature_radius_m");
        }
        if (curvature_period < 1 || drift_period < 1) throw Error(ErrorKind::SpecError, "periods must be positive");
        if (!(lane_width_px > stripe_px) || !(stripe_px > 0.0)) throw Error(ErrorKind::SpecError, "invalid lane geometry");
        if (!(dash_length_px > 0.0) || !(dash_gap_px >= 0.0)) throw Error(ErrorKind::SpecError, "invalid dash pattern");
        if (!(night_gain > 0.0 && night_gain <= 1.0)) throw Error(ErrorKind::SpecError, "night_gain must be in (0, 1]");
        if (!(worn_alpha >= 0.0 && worn_alpha <= 1.0)) throw Error(ErrorKind::SpecError, "worn_alpha must be in [0, 1]");
        if (calibration_views < 0) throw Error(ErrorKind::SpecError, "calibration_views must be >= 0");
        if (!(camera.fx > 0.0 && camera.fy > 0.0)) throw Error(ErrorKind::SpecError, "camera focal lengths must be positive");
        scale.validate();
    }
};

// ---------------------------------------------------------------------------
// Scenario file: key = value lines, same syntax as the pipeline config.

inline ScenarioSpec parse_scenario(std::istream& in) {
    ScenarioSpec s;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::SpecError, "scenario line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(detail::trim(line.substr(0, eq)));
        std::string_view v = detail::trim(line.substr(eq + 1));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        const detail::ConfigLine c(line_no, key, std::string(v));
        const std::string& val = c.value();
        try {
            if (key == "frames") s.frames = c.integer();
            else if (key == "width") s.width = c.integer();
            else if (key == "height") s.height = c.integer();
            else if (key == "condition") s.condition = parse_condition(val);
            else if (key == "noise_sigma") s.noise_sigma = c.number();
            else if (key == "curvature_radius_m") s.curvature_radius_m = c.number();
            else if (key == "curvature_profile") {
                if (val == "straight") s.profile = CurvatureProfile::Straight;
                else if (val == "constant") s.profile = CurvatureProfile::Constant;
                else if (val == "sine") s.profile = CurvatureProfile::Sine;
                else c.fail("expected straight, constant or sine");
            } else if (key == "curvature_period") s.curvature_period = c.integer();
            else if (key == "lane_width_px") s.lane_width_px = c.number();
            else if (key == "stripe_px") s.stripe_px = c.number();
            else if (key == "left_color" || key == "right_color") {
                StripeColor col = StripeColor::White;
                if (val == "yellow") col = StripeColor::Yellow;
                else if (val != "white") c.fail("expected yellow or white");
                (key == "left_color" ? s.left_color : s.right_color) = col;
            } else if (key == "dashed_right") s.dashed_right = c.boolean();
            else if (key == "dash_length_px") s.dash_length_px = c.number();
            else if (key == "dash_gap_px") s.dash_gap_px = c.number();
            else if (key == "speed_px") s.speed_px = c.number();
            else if (key == "drift_px") s.drift_px = c.number();
            else if (key == "drift_period") s.drift_period = c.integer();
            else if (key == "night_gain") s.night_gain = c.number();
            else if (key == "worn_alpha") s.worn_alpha = c.number();
            else if (key == "sealed_cracks") s.sealed_cracks = c.boolean();
            else if (key == "seed") s.seed = static_cast<std::uint64_t>(c.integer());
            else if (key == "calibration_views") s.calibration_views = c.integer();
            else if (key == "corner_noise_px") s.corner_noise_px = c.number();
            else if (key == "write_masks") s.write_masks = c.boolean();
            else if (key == "scale.xm_per_pix") s.scale.xm_per_pix = c.number();
            else if (key == "scale.ym_per_pix") s.scale.ym_per_pix = c.number();
            else if (key == "camera.fx") s.camera.fx = c.number();
            else if (key == "camera.fy") s.camera.fy = c.number();
            else if (key == "camera.cx") s.camera.cx = c.number();
            else if (key == "camera.cy") s.camera.cy = c.number();
            else if (key == "camera.k1") s.camera.k1 = c.number();
            else if (key == "camera.k2") s.camera.k2 = c.number();
            else if (key == "camera.k3") s.camera.k3 = c.number();
            else if (key == "camera.p1") s.camera.p1 = c.number();
            else if (key == "camera.p2") s.camera.p2 = c.number();
            else c.fail("unknown key");
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::SpecError) throw;
            throw Error(ErrorKind::SpecError, e.what());
        }
    }
    s.camera.image_width = s.width;
    s.camera.image_height = s.height;
    s.validate();
    return s;
}

inline ScenarioSpec parse_scenario(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileError, "cannot open scenario " + path.string());
    return parse_scenario(in);
}

// ---------------------------------------------------------------------------
// Ground truth file: "name la lb lc ra rb rc condition" per line.

inline void save_truth(const std::vector<GroundTruthFrame>& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::FileError, "cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& t : truth) {
        out << t.name << ' ' << t.left.a << ' ' << t.left.b << ' ' << t.left.c << ' ' << t.right.a << ' ' << t.right.b
            << ' ' << t.right.c << ' ' << to_string(t.condition) << '\n';
    }
}

inline std::vector<GroundTruthFrame> parse_truth(std::istream& in) {
    std::vector<GroundTruthFrame> truth;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        GroundTruthFrame t;
        std::string cond, extra;
        if (!(ls >> t.name >> t.left.a >> t.left.b >> t.left.c >> t.right.a >> t.right.b >> t.right.c >> cond) ||
            (ls >> extra)) {
            throw Error(ErrorKind::ParseError, "truth line " + std::to_string(line_no) + ": expected 'name la lb lc ra rb rc condition'");
        }
        try {
            t.condition = parse_condition(cond);
        } catch (const Error&) {
            throw Error(ErrorKind::ParseError, "truth line " + std::to_string(line_no) + ": unknown condition '" + cond + "'");
        }
        truth.push_back(std::move(t));
    }
    return truth;
}

inline std::vector<GroundTruthFrame> load_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileError, "cannot open truth file " + path.string());
    return parse_truth(in);
}

// ---------------------------------------------------------------------------
// Scene model.

inline std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d.png", index);
    return buf;
}

/// Lane polynomials of frame i. The centre line has its vertex at the bottom
/// row, so the bottom-row radius equals the profile radius exactly.
inline GroundTruthFrame truth_for_frame(const ScenarioSpec& s, int i) {
    double kappa = 0.0;  // signed curvature, 1/m
    switch (s.profile) {
        case CurvatureProfile::Straight: break;
        case CurvatureProfile::Constant: kappa = 1.0 / s.curvature_radius_m; break;
        case CurvatureProfile::Sine:
            kappa = std::sin(2.0 * std::numbers::pi * i / s.curvature_period) / s.curvature_radius_m;
            break;
    }
    const double a_m = 0.5 * kappa;
    const double a = a_m * s.scale.ym_per_pix * s.scale.ym_per_pix / s.scale.xm_per_pix;
    const double y0 = s.height - 1.0;
    const double drift = s.drift_px * std::sin(2.0 * std::numbers::pi * i / s.drift_period);
    const double centre = 0.5 * s.width + drift;

    GroundTruthFrame t;
    t.name = frame_name(i);
    t.condition = s.condition;
    t.left.a = t.right.a = a;
    t.left.b = t.right.b = -2.0 * a * y0;
    t.left.c = a * y0 * y0 + centre - 0.5 * s.lane_width_px;
    t.right.c = a * y0 * y0 + centre + 0.5 * s.lane_width_px;
    return t;
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Smooth value noise in [-1, 1] with the given cell size.
inline double value_noise(double x, double y, double cell, std::uint64_t seed) {
    const double fx = x / cell, fy = y / cell;
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const double tx = fx - x0, ty = fy - y0;
    auto lattice = [&](double ix, double iy) {
        const auto h = mix64(seed ^ mix64(static_cast<std::uint64_t>(static_cast<std::int64_t>(ix)) * 73856093ULL ^
                                          static_cast<std::uint64_t>(static_cast<std::int64_t>(iy)) * 19349663ULL));
        return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    };
    const double sx = tx * tx * (3.0 - 2.0 * tx), sy = ty * ty * (3.0 - 2.0 * ty);
    const double top = lattice(x0, y0) + sx * (lattice(x0 + 1, y0) - lattice(x0, y0));
    const double bot = lattice(x0, y0 + 1) + sx * (lattice(x0 + 1, y0 + 1) - lattice(x0, y0 + 1));
    return top + sy * (bot - top);
}

struct Color3 {
    double r, g, b;
};

inline Color3 stripe_rgb(StripeColor c) {
    return c == StripeColor::Yellow ? Color3{225.0, 185.0, 30.0} : Color3{235.0, 235.0, 235.0};
}

inline constexpr double kShoulderPx = 220.0;

/// Lateral distance of the sealant seam from the lane line, per side.
inline double seam_offset(const ScenarioSpec& s, Side side) {
    const std::uint64_t h = mix64(s.seed * 31 + (side == Side::Left ? 1 : 2));
    const double u = static_cast<double>(h >> 11) / 9007199254740992.0;
    return s.lane_width_px * (0.15 + 0.2 * u);
}

/// True on a crack-sealant seam: a 4 px meandering line inside each half of
/// the lane, present on about 70% of its length.
inline bool on_seam(const ScenarioSpec& s, const GroundTruthFrame& t, double bx, double by, double travelled) {
    const double ty = by - travelled;
    for (const Side side : {Side::Left, Side::Right}) {
        const std::uint64_t sseed = s.seed + (side == Side::Left ? 101 : 202);
        const double meander = 12.0 * value_noise(0.0, ty, 180.0, sseed);
        const double x = side == Side::Left ? t.left.x_at(by) + seam_offset(s, side) + meander
                                            : t.right.x_at(by) - seam_offset(s, side) + meander;
        if (std::fabs(bx - x) <= 2.0 && value_noise(0.0, ty, 120.0, sseed + 1) > -0.4) return true;
    }
    return false;
}

/// Marking coverage of the two stripes at a bird's-eye point (0 or 1).
inline std::pair<bool, bool> stripe_hit(const ScenarioSpec& s, const GroundTruthFrame& t, double bx, double by,
                                        double travelled) {
    const double half = 0.5 * s.stripe_px;
    const bool left = std::fabs(bx - t.left.x_at(by)) <= half;
    bool right = std::fabs(bx - t.right.x_at(by)) <= half;
    if (right && s.dashed_right) {
        const double period = s.dash_length_px + s.dash_gap_px;
        double phase = std::fmod(by - travelled, period);
        if (phase < 0) phase += period;
        right = phase < s.dash_length_px;
    }
    return {left, right};
}

/// Colour of the ideal (undistorted, noise-free) camera view at a bird's-eye point.
inline Color3 road_color(const ScenarioSpec& s, const GroundTruthFrame& t, double bx, double by, double travelled) {
    const double ty = by - travelled;
    const double tex = 8.0 * value_noise(bx, ty, 6.0, s.seed) + 4.0 * value_noise(bx, ty, 23.0, s.seed + 7);
    Color3 base{90.0 + tex, 90.0 + tex, 92.0 + tex};
    if (bx < t.left.x_at(by) - kShoulderPx || bx > t.right.x_at(by) + kShoulderPx) {
        base = {70.0 + tex, 92.0 + tex, 52.0 + 0.5 * tex};
    } else if (s.sealed_cracks && on_seam(s, t, bx, by, travelled)) {
        base = {42.0 + 0.5 * tex, 42.0 + 0.5 * tex, 44.0 + 0.5 * tex};
    }
    const auto [hl, hr] = stripe_hit(s, t, bx, by, travelled);
    if (!hl && !hr) return base;
    const Color3 paint = stripe_rgb(hl ? s.left_color : s.right_color);
    const double alpha = s.condition == Condition::Worn ? s.worn_alpha : 1.0;
    return {alpha * paint.r + (1 - alpha) * base.r, alpha * paint.g + (1 - alpha) * base.g,
            alpha * paint.b + (1 - alpha) * base.b};
}

inline constexpr Color3 kSky{150.0, 170.0, 195.0};

}  // namespace detail

/// Precomputed per-pixel geometry shared by all frames of a scenario: for
/// every distorted camera pixel, the ideal pinhole location.
class SceneRenderer {
public:
    explicit SceneRenderer(const ScenarioSpec& spec)
        : spec_(spec),
          to_bird_(birdseye_homography(spec.quad, {spec.width, spec.height})),
          ideal_x_(static_cast<std::size_t>(spec.width) * spec.height),
          ideal_y_(ideal_x_.size()) {
        spec_.validate();
        parallel_rows(spec.height, [&](int y0, int y1) {
            for (int v = y0; v < y1; ++v) {
                for (int u = 0; u < spec_.width; ++u) {
                    const Point2 p = spec_.camera.has_distortion()
                                         ? undistort_point(spec_.camera, {static_cast<double>(u), static_cast<double>(v)})
                                         : Point2{static_cast<double>(u), static_cast<double>(v)};
                    const std::size_t i = static_cast<std::size_t>(v) * spec_.width + u;
                    ideal_x_[i] = p.x;
                    ideal_y_[i] = p.y;
                }
            }
        });
    }

    const ScenarioSpec& spec() const { return spec_; }

    /// Camera frame i: scene sampled 2x2 per pixel through the lens model, then
    /// night gain, then Gaussian sensor noise.
    ImageBuffer render(int i) const {
        const GroundTruthFrame t = truth_for_frame(spec_, i);
        const double travelled = spec_.speed_px * i;
        const auto& m = to_bird_.matrix();
        const double gain = spec_.condition == Condition::Night ? spec_.night_gain : 1.0;
        // Pixels on the bottom row's side of the horizon see the road.
        const double front = homogeneous_w(to_bird_, {0.5 * spec_.width, spec_.height - 1.0}) > 0 ? 1.0 : -1.0;
        std::vector<float> rgb(static_cast<std::size_t>(spec_.width) * spec_.height * 3);
        parallel_rows(spec_.height, [&](int y0, int y1) {
            for (int v = y0; v < y1; ++v) {
                for (int u = 0; u < spec_.width; ++u) {
                    const std::size_t idx = static_cast<std::size_t>(v) * spec_.width + u;
                    detail::Color3 acc{0, 0, 0};
                    for (int sy = 0; sy < 2; ++sy) {
                        for (int sx = 0; sx < 2; ++sx) {
                            const double x = ideal_x_[idx] + (sx - 0.5) * 0.5;
                            const double y = ideal_y_[idx] + (sy - 0.5) * 0.5;
                            const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
                            detail::Color3 c = detail::kSky;
                            if (w * front > 1e-9) {
                                const double bx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w;
                                const double by = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w;
                                if (by > -8.0 * spec_.height) c = detail::road_color(spec_, t, bx, by, travelled);
                            }
                            acc.r += c.r;
                            acc.g += c.g;
                            acc.b += c.b;
                        }
                    }
                    rgb[3 * idx] = static_cast<float>(0.25 * acc.r * gain);
                    rgb[3 * idx + 1] = static_cast<float>(0.25 * acc.g * gain);
                    rgb[3 * idx + 2] = static_cast<float>(0.25 * acc.b * gain);
                }
            }
        });
        ImageBuffer img(spec_.width, spec_.height, 3);
        auto out = img.samples();
        std::mt19937_64 rng(detail::mix64(spec_.seed * 1000003ULL + static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> noise(0.0, spec_.noise_sigma > 0 ? spec_.noise_sigma : 1.0);
        for (std::size_t k = 0; k < rgb.size(); ++k) {
            double v = rgb[k];
            if (spec_.noise_sigma > 0.0) v += noise(rng);
            out[k] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
        return img;
    }

    /// Perfect bird's-eye lane mask for frame i (what an ideal segmenter would emit).
    BinaryMask truth_mask(int i) const {
        const GroundTruthFrame t = truth_for_frame(spec_, i);
        const double travelled = spec_.speed_px * i;
        BinaryMask mask(spec_.width, spec_.height);
        for (int y = 0; y < spec_.height; ++y) {
            for (int x = 0; x < spec_.width; ++x) {
                const auto [l, r] = detail::stripe_hit(spec_, t, x, y, travelled);
                if (l || r) mask.set(x, y, true);
            }
        }
        return mask;
    }

private:
    ScenarioSpec spec_;
    Homography to_bird_;
    std::vector<double> ideal_x_;
    std::vector<double> ideal_y_;
};

inline ImageBuffer mask_to_image(const BinaryMask& mask) {
    ImageBuffer img(mask.width(), mask.height(), 1);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) img.at(x, y) = mask.get(x, y) ? 255 : 0;
    return img;
}

inline BinaryMask image_to_mask(const ImageBuffer& img) {
    BinaryMask mask(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            int v = 0;
            for (int k = 0; k < img.channels(); ++k) v = std::max<int>(v, img.at(x, y, k));
            if (v > 127) mask.set(x, y, true);
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Chessboard views of a known camera.

/// n views of a planar board in random poses, fully inside the image, with
/// Gaussian corner noise of the given sigma (pixels).
inline std::vector<ChessboardObservation> synth_chessboard_views(const CameraModel& cam, const BoardSpec& board, int n,
                                                                 double noise_px, std::uint64_t seed,
                                                                 std::vector<ViewExtrinsics>* poses = nullptr) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tilt(-0.6, 0.6), roll(-0.3, 0.3), dist(0.35, 0.6), shift(-0.06, 0.06);
    std::normal_distribution<double> noise(0.0, noise_px > 0 ? noise_px : 1.0);
    const auto object = board_object_points(board);
    const Eigen::Vector3d centre(0.5 * (board.cols - 1) * board.square_size_m, 0.5 * (board.rows - 1) * board.square_size_m,
                                 0.0);
    std::vector<ChessboardObservation> views;
    int attempts = 0;
    while (static_cast<int>(views.size()) < n) {
        if (++attempts > 1000 * (n + 1)) throw Error(ErrorKind::SpecError, "cannot place chessboard views inside the image");
        const Eigen::Matrix3d r = (Eigen::AngleAxisd(tilt(rng), Eigen::Vector3d::UnitX()) *
                                   Eigen::AngleAxisd(tilt(rng), Eigen::Vector3d::UnitY()) *
                                   Eigen::AngleAxisd(roll(rng), Eigen::Vector3d::UnitZ()))
                                      .toRotationMatrix();
        ViewExtrinsics ext;
        ext.rotation = r;
        ext.translation = Eigen::Vector3d(shift(rng), shift(rng), dist(rng)) - r * centre;
        ChessboardObservation obs;
        obs.object_points = object;
        bool inside = true;
        for (const auto& p : object) {
            const Eigen::Vector3d pc = r * Eigen::Vector3d(p.x, p.y, 0.0) + ext.translation;
            if (pc.z() <= 0.05) {
                inside = false;
                break;
            }
            Point2 uv = project_point(cam, ext, p);
            if (noise_px > 0.0) uv = {uv.x + noise(rng), uv.y + noise(rng)};
            if (uv.x < 0 || uv.y < 0 || uv.x > cam.image_width - 1 || uv.y > cam.image_height - 1) {
                inside = false;
                break;
            }
            obs.image_points.push_back(uv);
        }
        if (!inside) continue;
        views.push_back(std::move(obs));
        if (poses) poses->push_back(ext);
    }
    return views;
}

// ---------------------------------------------------------------------------

struct SynthOutput {
    std::filesystem::path frames_dir;
    std::filesystem::path masks_dir;
    std::filesystem::path truth_file;
    std::filesystem::path camera_file;
    std::filesystem::path config_file;
    std::filesystem::path corners_file;
    std::vector<GroundTruthFrame> truth;
};

/// Writes frames/, masks/ (optional), truth.txt, camera.json, config.txt (a
/// pipeline config pointing at camera.json) and corners.txt (when views are
/// requested) under out_dir.
inline SynthOutput run_synth(const ScenarioSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    SynthOutput out;
    out.frames_dir = out_dir / "frames";
    out.masks_dir = out_dir / "masks";
    out.truth_file = out_dir / "truth.txt";
    out.camera_file = out_dir / "camera.json";
    out.config_file = out_dir / "config.txt";
    std::error_code ec;
    std::filesystem::create_directories(out.frames_dir, ec);
    if (spec.write_masks) std::filesystem::create_directories(out.masks_dir, ec);
    if (ec) throw Error(ErrorKind::FileError, "cannot create " + out_dir.string() + ": " + ec.message());

    const SceneRenderer renderer(spec);
    for (int i = 0; i < spec.frames; ++i) {
        out.truth.push_back(truth_for_frame(spec, i));
        write_png(renderer.render(i), out.frames_dir / out.truth.back().name);
        if (spec.write_masks) write_png(mask_to_image(renderer.truth_mask(i)), out.masks_dir / out.truth.back().name);
    }
    save_truth(out.truth, out.truth_file);
    save_model(spec.camera, out.camera_file);
    {
        std::ofstream cfg(out.config_file);
        if (!cfg) throw Error(ErrorKind::FileError, "cannot write " + out.config_file.string());
        cfg << std::setprecision(17) << "calibration.file = camera.json\n"
            << "scale.xm_per_pix = " << spec.scale.xm_per_pix << '\n'
            << "scale.ym_per_pix = " << spec.scale.ym_per_pix << '\n';
    }
    if (spec.calibration_views > 0) {
        out.corners_file = out_dir / "corners.txt";
        const BoardSpec board;
        save_corners(synth_chessboard_views(spec.camera, board, spec.calibration_views, spec.corner_noise_px, spec.seed + 99),
                     board, out.corners_file);
    }
    return out;
}

}  // namespace lanekit
