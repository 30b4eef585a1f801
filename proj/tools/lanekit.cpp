// lanekit command-line front end.
//
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "lanekit/lanekit.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

lanekit::Size parse_size(const std::string& text) {
    static const std::regex re(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw CLI::ValidationError("--size", "expected WxH, got '" + text + "'");
    const int w = std::stoi(m[1]), h = std::stoi(m[2]);
    if (w < 1 || h < 1) throw CLI::ValidationError("--size", "dimensions must be positive");
    return {w, h};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lanekit: classical lane detection pipeline"};
    app.require_subcommand(1);

    std::string corners, size_text, out_file;
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate a camera from chessboard corner coordinates");
    calibrate->add_option("--corners", corners, "Corners file")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--size", size_text, "Image size as WxH")->required();
    calibrate->add_option("--out", out_file, "Output calibration file (JSON)")->required();

    std::string in_dir, config_file, out_dir;
    bool debug = false, no_timing = false;
    auto* process = app.add_subcommand("process", "Run the pipeline over a directory of frames");
    process->add_option("--in", in_dir, "Input frame directory")->required()->check(CLI::ExistingDirectory);
    process->add_option("--config", config_file, "Pipeline config file")->required()->check(CLI::ExistingFile);
    process->add_option("--out", out_dir, "Output directory")->required();
    process->add_flag("--debug", debug, "Also write bird's-eye masks with search windows");
    process->add_flag("--no-timing", no_timing, "Write 0 in the frame_time_ms column");

    std::string spec_file;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic road scenario with ground truth");
    synth->add_option("--spec", spec_file, "Scenario file")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out_dir, "Output directory")->required();

    std::string truth_file;
    bool masks = false;
    auto* eval = app.add_subcommand("eval", "Score the pipeline against ground truth");
    eval->add_option("--in", in_dir, "Input frame directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--truth", truth_file, "Ground truth file")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", config_file, "Pipeline config file")->required()->check(CLI::ExistingFile);
    eval->add_flag("--masks", masks, "Inputs are bird's-eye lane masks; skip segmentation");

    int reps = 3;
    auto* bench = app.add_subcommand("bench", "Measure throughput on preloaded frames");
    bench->add_option("--in", in_dir, "Input frame directory")->required()->check(CLI::ExistingDirectory);
    bench->add_option("--config", config_file, "Pipeline config file")->required()->check(CLI::ExistingFile);
    bench->add_option("--reps", reps, "Repetitions")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*calibrate) {
            lanekit::Size size;
            try {
                size = parse_size(size_text);
            } catch (const CLI::ValidationError& e) {
                std::cerr << e.what() << '\n';
                return kUsageError;
            }
            const auto result = lanekit::run_calibrate(corners, size, out_file);
            const auto& m = result.model;
            std::printf("fx %.4f  fy %.4f  cx %.4f  cy %.4f  skew %.6f\n", m.fx, m.fy, m.cx, m.cy, m.skew);
            std::printf("k1 %.6f  k2 %.6f  k3 %.6f  p1 %.6f  p2 %.6f\n", m.k1, m.k2, m.k3, m.p1, m.p2);
            std::printf("rms reprojection error: %.4f px\n", result.rms_reprojection_error);
            std::printf("wrote %s\n", out_file.c_str());
        } else if (*process) {
            auto cfg = lanekit::load_config(config_file);
            if (no_timing) cfg.record_timing = false;
            const auto s = lanekit::run_process(in_dir, cfg, out_dir, debug);
            std::printf("frames %d  accepted %d  miss %d  error %d\nwrote %s\n", s.frames, s.accepted, s.misses, s.errors,
                        s.csv.string().c_str());
        } else if (*synth) {
            const auto spec = lanekit::load_scenario(spec_file);
            const auto out = lanekit::run_synth(spec, out_dir);
            std::printf("wrote %zu frames to %s\n", out.truth.size(), out.frames_dir.string().c_str());
        } else if (*eval) {
            const auto cfg = lanekit::load_config(config_file);
            const auto report = lanekit::run_eval(in_dir, truth_file, cfg, {masks});
            std::fputs(lanekit::format_report(report).c_str(), stdout);
        } else if (*bench) {
            const auto cfg = lanekit::load_config(config_file);
            std::fputs(lanekit::format_bench(lanekit::run_bench(in_dir, cfg, reps)).c_str(), stdout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return 0;
}
