#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "lanekit/calibration.hpp"
#include "lanekit/calibration_io.hpp"
#include "lanekit/config.hpp"
#include "lanekit/error.hpp"
#include "lanekit/geometry.hpp"
#include "lanekit/io.hpp"
#include "lanekit/lane_detect.hpp"
#include "lanekit/overlay.hpp"
#include "lanekit/parallel.hpp"
#include "lanekit/perspective.hpp"
#include "lanekit/segmentation.hpp"
#include "lanekit/synth.hpp"

namespace lanekit {

enum class FrameStatus { Accepted, Miss, Error };

inline std::string_view to_string(FrameStatus s) {
    switch (s) {
        case FrameStatus::Accepted: return "accepted";
        case FrameStatus::Miss: return "miss";
        case FrameStatus::Error: return "error";
    }
    return "error";
}

/// Outcome of one frame. A miss after an earlier detection carries the
/// re-emitted smoothed pair; a miss before any detection carries none.
struct FrameRecord {
    int index = 0;
    std::string name;
    FrameStatus status = FrameStatus::Error;
    std::optional<FrameMode> mode;
    std::optional<LanePair> pair;
    std::optional<FrameMetrics> metrics;
    std::vector<WindowRect> trace;
    double frame_time_ms = 0.0;
    std::string error;
};

/// Stateless per-frame stages ahead of tracking.
struct PreparedFrame {
    ImageBuffer rectified;
    BinaryMask mask;
};

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

class Pipeline {
public:
    Pipeline(PipelineConfig cfg, Size frame_size, std::optional<CameraModel> camera = std::nullopt)
        : cfg_(std::move(cfg)), size_(frame_size), camera_(std::move(camera)) {
        cfg_.validate();
        if (camera_) {
            if (camera_->image_width != size_.width || camera_->image_height != size_.height) {
                throw Error(ErrorKind::DimensionMismatch,
                            "calibration is for " + std::to_string(camera_->image_width) + "x" +
                                std::to_string(camera_->image_height) + " frames, input is " +
                                std::to_string(size_.width) + "x" + std::to_string(size_.height));
            }
            undistort_ = make_undistort_table(*camera_, size_);
        }
        to_bird_ = birdseye_homography(cfg_.quad, size_);
        to_camera_ = invert(to_bird_);
        warp_ = make_warp_table(to_bird_, size_);
        // Bird's-eye pixels whose source lies fully inside the camera frame.
        ImageBuffer lit(size_.width, size_.height, 1, 255);
        if (undistort_) lit = remap(lit, *undistort_);
        lit = remap(lit, warp_);
        view_region_ = BinaryMask(size_.width, size_.height);
        for (int y = 0; y < size_.height; ++y)
            for (int x = 0; x < size_.width; ++x)
                if (lit.at(x, y) == 255) view_region_.set(x, y, true);
    }

    /// Loads the calibration file named by the config, if any.
    static Pipeline from_config(const PipelineConfig& cfg, Size frame_size) {
        std::optional<CameraModel> cam;
        if (cfg.calibration_file) cam = load_model(*cfg.calibration_file);
        return Pipeline(cfg, frame_size, cam);
    }

    const PipelineConfig& config() const { return cfg_; }
    Size frame_size() const { return size_; }
    const Homography& birdseye() const { return to_bird_; }
    const BinaryMask& view_region() const { return view_region_; }
    const TrackerState& state() const { return state_; }
    void reset() { state_ = {}; }

    ImageBuffer rectify(const ImageBuffer& frame) const {
        check_frame(frame);
        return undistort_ ? remap(frame, *undistort_) : frame;
    }

    ImageBuffer to_birdseye(const ImageBuffer& rectified) const { return remap(rectified, warp_); }

    PreparedFrame prepare(const ImageBuffer& frame) const {
        PreparedFrame p;
        p.rectified = rectify(frame);
        p.mask = segment_frame(to_birdseye(p.rectified), cfg_.thresholds, &view_region_);
        return p;
    }

    /// Advances the tracker with one bird's-eye mask.
    FrameRecord track(const BinaryMask& mask, int index = 0, std::string name = {}) {
        FrameRecord rec;
        rec.index = index;
        rec.name = std::move(name);
        try {
            const TrackResult r = track_frame(state_, mask, cfg_.tracker());
            state_ = r.state;
            rec.mode = r.mode;
            rec.pair = r.pair;
            rec.trace = r.trace;
            rec.status = r.pair.accepted ? FrameStatus::Accepted : FrameStatus::Miss;
            rec.metrics = compute_metrics(r.pair, mask.width(), mask.height(), cfg_.scale);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoPriorAndNoDetection) throw;
            rec.status = FrameStatus::Miss;
            rec.mode = FrameMode::SlidingWindow;
            rec.error = e.what();
        }
        return rec;
    }

    /// Lane region, metrics text and (in debug mode) nothing else; the overlay
    /// is drawn on the undistorted frame.
    ImageBuffer render(const ImageBuffer& rectified, const FrameRecord& rec) const {
        if (!rec.pair || !rec.metrics) return rectified;
        return annotate_metrics(render_lane_region(rectified, *rec.pair, to_camera_, cfg_.overlay), *rec.metrics,
                                cfg_.overlay);
    }

    /// Bird's-eye mask with the search windows and fitted curves, for debugging.
    ImageBuffer debug_view(const BinaryMask& mask, const FrameRecord& rec) const {
        ImageBuffer img(mask.width(), mask.height(), 3);
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                if (mask.get(x, y)) img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = 255;
        img = draw_window_trace(img, rec.trace, cfg_.overlay);
        if (rec.pair) {
            for (int y = 0; y < img.height(); ++y) {
                for (const LaneFit* f : {&rec.pair->left, &rec.pair->right}) {
                    const long long x = std::llround(f->x_at(y));
                    if (x >= 0 && x < img.width()) {
                        img.at(static_cast<int>(x), y, 0) = 255;
                        img.at(static_cast<int>(x), y, 1) = 255;
                        img.at(static_cast<int>(x), y, 2) = 0;
                    }
                }
            }
        }
        return img;
    }

    /// Full per-frame path; the rendered frame is stored in *annotated when given.
    FrameRecord process(const ImageBuffer& frame, int index = 0, std::string name = {}, ImageBuffer* annotated = nullptr,
                        BinaryMask* mask_out = nullptr) {
        const auto t0 = Clock::now();
        PreparedFrame p = prepare(frame);
        FrameRecord rec = track(p.mask, index, std::move(name));
        ImageBuffer out = render(p.rectified, rec);
        rec.frame_time_ms = cfg_.record_timing ? elapsed_ms(t0) : 0.0;
        if (annotated) *annotated = std::move(out);
        if (mask_out) *mask_out = std::move(p.mask);
        return rec;
    }

private:
    void check_frame(const ImageBuffer& frame) const {
        if (frame.channels() != 3) throw Error(ErrorKind::ChannelMismatch, "frames must be 8-bit RGB");
        if (frame.width() != size_.width || frame.height() != size_.height) {
            throw Error(ErrorKind::DimensionMismatch, "frame size " + std::to_string(frame.width()) + "x" +
                                                          std::to_string(frame.height()) + " differs from the sequence");
        }
    }

    PipelineConfig cfg_;
    Size size_;
    std::optional<CameraModel> camera_;
    std::optional<RemapTable> undistort_;
    Homography to_bird_;
    Homography to_camera_;
    RemapTable warp_;
    BinaryMask view_region_;
    TrackerState state_;
};

// ---------------------------------------------------------------------------
// Metrics CSV.

inline constexpr const char* kCsvHeader =
    "frame,name,status,mode,left_a,left_b,left_c,right_a,right_b,right_c,radius_m,offset_m,frame_time_ms";

/// Coefficients are written whenever a pair exists; radius and offset only for
/// accepted frames. A straight road has radius "inf".
inline std::string csv_row(const FrameRecord& r) {
    std::string row = std::to_string(r.index) + "," + r.name + "," + std::string(to_string(r.status)) + ",";
    if (r.mode) row += to_string(*r.mode);
    char buf[64];
    auto num = [&](const char* fmt, double v) {
        std::snprintf(buf, sizeof buf, fmt, v);
        row += ',';
        row += buf;
    };
    if (r.pair) {
        for (double v : {r.pair->left.a, r.pair->left.b, r.pair->left.c, r.pair->right.a, r.pair->right.b, r.pair->right.c})
            num("%.9g", v);
    } else {
        row += ",,,,,,";
    }
    if (r.status == FrameStatus::Accepted && r.metrics) {
        if (r.metrics->mean_radius_m) num("%.3f", *r.metrics->mean_radius_m);
        else row += ",inf";
        num("%.4f", r.metrics->offset_m);
    } else {
        row += ",,";
    }
    num("%.3f", r.frame_time_ms);
    return row;
}

// ---------------------------------------------------------------------------

struct ProcessSummary {
    int frames = 0;
    int accepted = 0;
    int misses = 0;
    int errors = 0;
    std::filesystem::path csv;
};

/// Processes every frame of input_dir in name order through one tracker,
/// writing <stem>.png overlays and metrics.csv to out_dir. Per-frame failures
/// become "error" rows.
inline ProcessSummary run_process(const std::filesystem::path& input_dir, const PipelineConfig& cfg,
                                  const std::filesystem::path& out_dir, bool debug = false) {
    const auto frames = list_frames(input_dir);
    if (frames.empty()) throw Error(ErrorKind::EmptyInput, "no PNG or PPM frames in " + input_dir.string());
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::FileError, "cannot create " + out_dir.string() + ": " + ec.message());
    debug = debug || cfg.debug;
    if (debug) std::filesystem::create_directories(out_dir / "debug", ec);

    ProcessSummary summary;
    summary.csv = out_dir / "metrics.csv";
    std::ofstream csv(summary.csv);
    if (!csv) throw Error(ErrorKind::FileError, "cannot write " + summary.csv.string());
    csv << kCsvHeader << '\n';

    std::optional<Pipeline> pipe;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string name = frames[i].filename().string();
        FrameRecord rec;
        rec.index = static_cast<int>(i);
        rec.name = name;
        try {
            const ImageBuffer frame = read_image(frames[i]);
            if (!pipe) pipe.emplace(Pipeline::from_config(cfg, {frame.width(), frame.height()}));
            ImageBuffer annotated;
            BinaryMask mask;
            rec = pipe->process(frame, rec.index, name, &annotated, &mask);
            const auto stem = frames[i].stem().string();
            write_png(annotated, out_dir / (stem + ".png"));
            if (debug) write_png(pipe->debug_view(mask, rec), out_dir / "debug" / (stem + ".png"));
        } catch (const Error& e) {
            // Without a pipeline the sequence cannot be processed at all.
            if (!pipe) throw;
            rec.status = FrameStatus::Error;
            rec.error = e.what();
        }
        switch (rec.status) {
            case FrameStatus::Accepted: ++summary.accepted; break;
            case FrameStatus::Miss: ++summary.misses; break;
            case FrameStatus::Error: ++summary.errors; break;
        }
        ++summary.frames;
        csv << csv_row(rec) << '\n';
    }
    if (!csv) throw Error(ErrorKind::FileError, "failed writing " + summary.csv.string());
    return summary;
}

// ---------------------------------------------------------------------------
// Evaluation against ground truth.

inline constexpr int kEvalRows = 10;
inline constexpr double kLateralGatePx = 20.0;

struct EvalReport {
    int frames_total = 0;
    int frames_detected = 0;
    double detection_rate = 0.0;
    double mean_lateral_error_px = 0.0;  // over detected frames; 0 when none
    double relative_error_rate = 0.0;    // mean of error / true bottom-row lane width
    double mean_fps = 0.0;
};

/// Mean |fit - truth| over both lanes at 10 evenly spaced rows.
inline double lateral_error_px(const LanePair& pair, const GroundTruthFrame& truth, int height) {
    double sum = 0.0;
    for (int k = 0; k < kEvalRows; ++k) {
        const double y = (height - 1.0) * k / (kEvalRows - 1);
        sum += std::fabs(pair.left.x_at(y) - truth.left.x_at(y));
        sum += std::fabs(pair.right.x_at(y) - truth.right.x_at(y));
    }
    return sum / (2.0 * kEvalRows);
}

struct EvalOptions {
    /// Treat the input frames as bird's-eye lane masks and skip rectification,
    /// warping and segmentation.
    bool masks = false;
};

inline std::string format_report(const EvalReport& r) {
    char buf[512];
    std::string out =
        "# detection_rate: share of frames whose tracked pair is accepted and lies within 20 px of the\n"
        "# ground truth (mean over 10 rows, both lanes); relative_error_rate: mean lateral error over the\n"
        "# true lane width. Synthetic-scene proxies; not comparable to results on recorded video.\n";
    std::snprintf(buf, sizeof buf,
                  "frames_total: %d\nframes_detected: %d\ndetection_rate: %.4f\nmean_lateral_error_px: %s\n"
                  "relative_error_rate: %s\nmean_fps: %.2f\n",
                  r.frames_total, r.frames_detected, r.detection_rate,
                  r.frames_detected ? std::to_string(r.mean_lateral_error_px).c_str() : "n/a",
                  r.frames_detected ? std::to_string(r.relative_error_rate).c_str() : "n/a", r.mean_fps);
    return out + buf;
}

inline EvalReport run_eval(const std::filesystem::path& input_dir, const std::vector<GroundTruthFrame>& truth,
                           const PipelineConfig& cfg, const EvalOptions& opts = {}) {
    const auto frames = list_frames(input_dir);
    if (frames.empty()) throw Error(ErrorKind::EmptyInput, "no PNG or PPM frames in " + input_dir.string());
    if (frames.size() != truth.size()) {
        throw Error(ErrorKind::TruthMismatch, std::to_string(frames.size()) + " frames but " + std::to_string(truth.size()) +
                                                  " ground-truth lines");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].filename().string() != truth[i].name) {
            throw Error(ErrorKind::TruthMismatch,
                        "frame " + frames[i].filename().string() + " has truth entry " + truth[i].name);
        }
    }

    EvalReport rep;
    std::optional<Pipeline> pipe;
    double total_ms = 0.0, err_sum = 0.0, rel_sum = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const ImageBuffer img = read_image(frames[i]);
        if (!pipe) pipe.emplace(opts.masks ? Pipeline(cfg, {img.width(), img.height()})
                                           : Pipeline::from_config(cfg, {img.width(), img.height()}));
        const auto t0 = Clock::now();
        const FrameRecord rec = opts.masks ? pipe->track(image_to_mask(img), static_cast<int>(i), truth[i].name)
                                           : pipe->process(img, static_cast<int>(i), truth[i].name);
        total_ms += elapsed_ms(t0);
        ++rep.frames_total;
        if (rec.status != FrameStatus::Accepted) continue;
        const double err = lateral_error_px(*rec.pair, truth[i], img.height());
        if (!(err < kLateralGatePx)) continue;
        ++rep.frames_detected;
        err_sum += err;
        const double y = img.height() - 1.0;
        rel_sum += err / (truth[i].right.x_at(y) - truth[i].left.x_at(y));
    }
    rep.detection_rate = static_cast<double>(rep.frames_detected) / rep.frames_total;
    if (rep.frames_detected > 0) {
        rep.mean_lateral_error_px = err_sum / rep.frames_detected;
        rep.relative_error_rate = rel_sum / rep.frames_detected;
    }
    rep.mean_fps = total_ms > 0.0 ? 1000.0 * rep.frames_total / total_ms : 0.0;
    return rep;
}

inline EvalReport run_eval(const std::filesystem::path& input_dir, const std::filesystem::path& truth_file,
                           const PipelineConfig& cfg, const EvalOptions& opts = {}) {
    return run_eval(input_dir, load_truth(truth_file), cfg, opts);
}

// ---------------------------------------------------------------------------
// Throughput.

inline constexpr int kBenchMinFrames = 10;
inline constexpr double kTargetFps = 24.0;

struct FpsStats {
    double mean_fps = 0.0;    // frames / total time
    double median_fps = 0.0;  // from the median frame time
    double p95_fps = 0.0;     // from the 95th-percentile (slow) frame time
};

/// Stats from per-frame times in milliseconds.
inline FpsStats fps_stats(std::vector<double> ms) {
    FpsStats s;
    if (ms.empty()) return s;
    double total = 0.0;
    for (double v : ms) total += v;
    std::sort(ms.begin(), ms.end());
    auto quantile = [&](double q) {
        const double pos = q * (ms.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, ms.size() - 1);
        return ms[lo] + (pos - lo) * (ms[hi] - ms[lo]);
    };
    s.mean_fps = 1000.0 * ms.size() / total;
    s.median_fps = 1000.0 / quantile(0.5);
    s.p95_fps = 1000.0 / quantile(0.95);
    return s;
}

struct BenchReport {
    int frames = 0;
    int repetitions = 0;
    int threads = 1;
    FpsStats single_thread;  // sequential, one worker
    FpsStats multi_thread;   // sequential stages, row-parallel kernels
    FpsStats pipelined;      // frame N+1 preparation overlapped with frame N tracking and rendering
    bool meets_target() const { return std::max({single_thread.mean_fps, multi_thread.mean_fps, pipelined.mean_fps}) >= kTargetFps; }
};

/// Times frames already in memory; each repetition starts a fresh tracker.
inline BenchReport run_bench(const std::vector<ImageBuffer>& frames, const PipelineConfig& cfg, int repetitions,
                             const std::optional<CameraModel>& camera) {
    if (static_cast<int>(frames.size()) < kBenchMinFrames) {
        throw Error(ErrorKind::EmptyInput, "benchmark needs at least " + std::to_string(kBenchMinFrames) + " frames");
    }
    if (repetitions < 1) throw Error(ErrorKind::ConfigError, "repetitions must be >= 1");
    PipelineConfig timed = cfg;
    timed.record_timing = true;
    const Size size{frames[0].width(), frames[0].height()};
    BenchReport rep;
    rep.frames = static_cast<int>(frames.size());
    rep.repetitions = repetitions;
    rep.threads = thread_budget();

    auto sequential = [&] {
        std::vector<double> ms;
        for (int r = 0; r < repetitions; ++r) {
            Pipeline pipe(timed, size, camera);
            for (std::size_t i = 0; i < frames.size(); ++i) {
                ImageBuffer out;
                ms.push_back(pipe.process(frames[i], static_cast<int>(i), {}, &out).frame_time_ms);
            }
        }
        return fps_stats(std::move(ms));
    };
    set_thread_budget(1);
    try {
        rep.single_thread = sequential();
    } catch (...) {
        set_thread_budget(0);
        throw;
    }
    set_thread_budget(0);
    rep.multi_thread = sequential();

    std::vector<double> intervals;
    for (int r = 0; r < repetitions; ++r) {
        Pipeline pipe(timed, size, camera);
        auto next = std::async(std::launch::async, [&] { return pipe.prepare(frames[0]); });
        auto last = Clock::now();
        for (std::size_t i = 0; i < frames.size(); ++i) {
            PreparedFrame cur = next.get();
            if (i + 1 < frames.size()) {
                next = std::async(std::launch::async, [&, i] { return pipe.prepare(frames[i + 1]); });
            }
            const FrameRecord rec = pipe.track(cur.mask, static_cast<int>(i));
            const ImageBuffer out = pipe.render(cur.rectified, rec);
            intervals.push_back(elapsed_ms(last));
            last = Clock::now();
        }
    }
    rep.pipelined = fps_stats(std::move(intervals));
    return rep;
}

inline BenchReport run_bench(const std::filesystem::path& input_dir, const PipelineConfig& cfg, int repetitions) {
    const auto paths = list_frames(input_dir);
    if (static_cast<int>(paths.size()) < kBenchMinFrames) {
        throw Error(ErrorKind::EmptyInput, "benchmark needs at least " + std::to_string(kBenchMinFrames) + " frames, found " +
                                               std::to_string(paths.size()));
    }
    std::vector<ImageBuffer> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) frames.push_back(read_image(p));
    std::optional<CameraModel> cam;
    if (cfg.calibration_file) cam = load_model(*cfg.calibration_file);
    return run_bench(frames, cfg, repetitions, cam);
}

inline std::string format_bench(const BenchReport& r) {
    char buf[768];
    auto line = [](const char* label, const FpsStats& s) {
        char b[160];
        std::snprintf(b, sizeof b, "%-14s mean %.2f fps  median %.2f fps  p95 %.2f fps\n", label, s.mean_fps,
                      s.median_fps, s.p95_fps);
        return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "frames: %d  repetitions: %d  threads: %d\n", r.frames, r.repetitions, r.threads);
    std::string out = buf;
    out += line("single-thread", r.single_thread);
    out += line("multi-thread", r.multi_thread);
    out += line("pipelined", r.pipelined);
    std::snprintf(buf, sizeof buf, "%s best mean %.2f fps against the %.0f fps target\n", r.meets_target() ? "OK" : "WARN",
                  std::max({r.single_thread.mean_fps, r.multi_thread.mean_fps, r.pipelined.mean_fps}), kTargetFps);
    return out + buf;
}

// ---------------------------------------------------------------------------

/// Zhang calibration plus refinement of a corners file; writes the model to out_path.
inline CalibrationResult run_calibrate(const std::filesystem::path& corners_file, Size image_size,
                                       const std::filesystem::path& out_path) {
    const auto views = load_corners(corners_file);
    const CalibrationResult initial = calibrate_zhang(views, image_size);
    CalibrationResult refined = refine_reprojection(initial, views);
    save_model(refined.model, out_path);
    return refined;
}

}  // namespace lanekit
