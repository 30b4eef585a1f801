#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace lanekit;
using lanekit::test::kPropertyCases;

namespace {

CameraModel known_camera(double k1 = 0.0, double k2 = 0.0) {
    CameraModel m;
    m.fx = 1000.0;
    m.fy = 1000.0;
    m.cx = 640.0;
    m.cy = 360.0;
    m.k1 = k1;
    m.k2 = k2;
    m.image_width = 1280;
    m.image_height = 720;
    return m;
}

ViewExtrinsics pose(double rx, double ry, double rz, Eigen::Vector3d t) {
    ViewExtrinsics e;
    e.rotation = (Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()))
                     .toRotationMatrix();
    e.translation = t;
    return e;
}

// Projects a 9x6 board with 25 mm squares through each pose.
std::vector<ChessboardObservation> render_views(const CameraModel& cam, const std::vector<ViewExtrinsics>& poses) {
    std::vector<ChessboardObservation> views;
    for (const auto& e : poses) {
        ChessboardObservation v;
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 9; ++c) {
                const Point2 obj{c * 0.025, r * 0.025};
                v.object_points.push_back(obj);
                v.image_points.push_back(project_point(cam, e, obj));
            }
        views.push_back(std::move(v));
    }
    return views;
}

std::vector<ViewExtrinsics> three_poses() {
    return {pose(0.3, -0.2, 0.05, {-0.1, -0.06, 0.45}), pose(-0.25, 0.3, -0.1, {-0.08, -0.05, 0.5}),
            pose(0.1, 0.35, 0.2, {-0.12, -0.07, 0.55})};
}

double orthonormality_error(const Eigen::Matrix3d& r) {
    return std::max((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), std::fabs(r.determinant() - 1.0));
}

}  // namespace

TEST(ProjectPoint, OpticalAxisMapsToPrincipalPoint) {
    const CameraModel cam = known_camera(-0.2);
    const ViewExtrinsics e = pose(0, 0, 0, {0, 0, 2});
    const Point2 uv = project_point(cam, e, {0, 0});
    EXPECT_DOUBLE_EQ(uv.x, 640.0);
    EXPECT_DOUBLE_EQ(uv.y, 360.0);
}

TEST(ProjectPoint, ZeroDistortionIsPinhole) {
    const CameraModel cam = known_camera();
    const ViewExtrinsics e = pose(0, 0, 0, {0, 0, 2});
    const Point2 uv = project_point(cam, e, {0.3, -0.1});
    EXPECT_NEAR(uv.x, 1000.0 * 0.15 + 640.0, 1e-9);
    EXPECT_NEAR(uv.y, 1000.0 * -0.05 + 360.0, 1e-9);
}

TEST(ProjectPoint, RadialPullTowardCentre) {
    CameraModel cam = known_camera(-0.2);
    const Point2 d = distort_normalized(cam, {0.5, 0.0});
    EXPECT_NEAR(d.x, 0.5 * (1.0 - 0.05), 1e-12);
    EXPECT_NEAR(d.y, 0.0, 1e-12);
}

TEST(ProjectPoint, BehindCamera) {
    EXPECT_THROW(project_point(known_camera(), pose(0, 0, 0, {0, 0, -1}), {0, 0}), Error);
}

TEST(UndistortPoints, ZeroCoefficientsIdentity) {
    const CameraModel cam = known_camera();
    const std::vector<Point2> pts{{0, 0}, {640, 360}, {1279.5, 3.25}};
    const auto out = undistort_points(cam, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_NEAR(out[i].x, pts[i].x, 1e-9);
        EXPECT_NEAR(out[i].y, pts[i].y, 1e-9);
    }
}

TEST(UndistortPoints, RoundTripWithinTolerance) {
    const CameraModel cam = known_camera(-0.2);
    auto rng = test::rng_for(5);
    for (int i = 0; i < 100; ++i) {
        const Point2 n{test::uniform(rng, -0.6, 0.6), test::uniform(rng, -0.35, 0.35)};
        const Point2 distorted = normalized_to_pixel(cam, distort_normalized(cam, n));
        const Point2 back = pixel_to_normalized(cam, undistort_points(cam, std::vector<Point2>{distorted})[0]);
        EXPECT_NEAR(back.x, n.x, 1e-6);
        EXPECT_NEAR(back.y, n.y, 1e-6);
    }
}

TEST(UndistortPoints, PathologicalDistortionDoesNotConverge) {
    const CameraModel cam = known_camera(5.0);
    const Point2 corner{0.0, 0.0};
    try {
        undistort_point(cam, corner);
        FAIL() << "expected NonConvergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
    }
}

TEST(UndistortImage, ZeroCoefficientsIsByteIdentical) {
    auto rng = test::rng_for(6);
    CameraModel cam = known_camera();
    cam.cx = 20;
    cam.cy = 15;
    cam.fx = cam.fy = 50;
    const ImageBuffer img = test::random_image(rng, 40, 30);
    const ImageBuffer out = undistort_image(cam, img);
    EXPECT_EQ(out, img);
}

TEST(UndistortImage, StraightensCurvedLine) {
    CameraModel cam;
    cam.fx = cam.fy = 350;
    cam.cx = 160;
    cam.cy = 120;
    cam.k1 = -0.3;
    cam.image_width = 320;
    cam.image_height = 240;
    // Ideal line x = 25 + 0.05 y, drawn through the distortion.
    auto line_x = [](double y) { return 25.0 + 0.05 * y; };
    ImageBuffer img(320, 240, 3, 0);
    for (int v = 0; v < 240; ++v)
        for (int u = 0; u < 320; ++u) {
            const Point2 ideal = undistort_point(cam, {double(u), double(v)});
            const double d = std::fabs(ideal.x - line_x(ideal.y)) / std::hypot(1.0, 0.05);
            const auto val = static_cast<std::uint8_t>(std::clamp(255.0 * (2.0 - d), 0.0, 255.0));
            for (int c = 0; c < 3; ++c) img.at(u, v, c) = val;
        }

    auto max_deviation = [](const ImageBuffer& im) {
        std::vector<std::pair<double, double>> centres;
        for (int y = 20; y < 220; ++y) {
            double sw = 0, sx = 0;
            for (int x = 0; x < im.width(); ++x) {
                const double w = im.at(x, y, 0);
                sw += w;
                sx += w * x;
            }
            if (sw > 0) centres.emplace_back(y, sx / sw);
        }
        double my = 0, mx = 0;
        for (auto [y, x] : centres) {
            my += y;
            mx += x;
        }
        my /= centres.size();
        mx /= centres.size();
        double sxy = 0, syy = 0;
        for (auto [y, x] : centres) {
            sxy += (y - my) * (x - mx);
            syy += (y - my) * (y - my);
        }
        const double slope = sxy / syy;
        double worst = 0;
        for (auto [y, x] : centres) worst = std::max(worst, std::fabs(x - (mx + slope * (y - my))));
        return worst;
    };

    const ImageBuffer straight = undistort_image(cam, img);
    EXPECT_EQ(straight.width(), img.width());
    EXPECT_EQ(straight.height(), img.height());
    EXPECT_GT(max_deviation(img), 2.0);
    EXPECT_LT(max_deviation(straight), 1.0);
}

TEST(CalibrateZhang, NoiseFreeRecoversIntrinsics) {
    const CameraModel cam = known_camera();
    const auto views = render_views(cam, three_poses());
    const CalibrationResult r = calibrate_zhang(views, {1280, 720});
    EXPECT_NEAR(r.model.fx, 1000.0, 1e-3);
    EXPECT_NEAR(r.model.fy, 1000.0, 1e-3);
    EXPECT_NEAR(r.model.cx, 640.0, 1e-3);
    EXPECT_NEAR(r.model.cy, 360.0, 1e-3);
    EXPECT_LT(r.rms_reprojection_error, 1e-3);
}

TEST(CalibrateZhang, RecoversRadialDistortionAfterRefinement) {
    const CameraModel cam = known_camera(-0.2);
    const auto views = render_views(cam, three_poses());
    const CalibrationResult refined = refine_reprojection(calibrate_zhang(views, {1280, 720}), views);
    EXPECT_NEAR(refined.model.k1, -0.2, 5e-2);
}

TEST(CalibrateZhang, TwoViewsInsufficient) {
    const auto views = render_views(known_camera(), {three_poses()[0], three_poses()[1]});
    try {
        calibrate_zhang(views, {1280, 720});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientViews);
    }
}

TEST(CalibrateZhang, ParallelBoardsAreDegenerate) {
    std::vector<ViewExtrinsics> poses{pose(0, 0, 0, {-0.1, -0.06, 0.5}), pose(0, 0, 0, {-0.05, -0.06, 0.6}),
                                      pose(0, 0, 0, {-0.12, -0.02, 0.7})};
    const auto views = render_views(known_camera(), poses);
    try {
        calibrate_zhang(views, {1280, 720});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateViews);
    }
}

TEST(RefineReprojection, AlreadyOptimalIsUnchanged) {
    const auto views = render_views(known_camera(), three_poses());
    const CalibrationResult initial = calibrate_zhang(views, {1280, 720});
    const CalibrationResult refined = refine_reprojection(initial, views);
    EXPECT_NEAR(refined.rms_reprojection_error, initial.rms_reprojection_error, 1e-9);
}

TEST(RefineReprojection, NoisyTenViewsRecoverFocalLength) {
    const CameraModel cam = known_camera(-0.2, 0.05);
    const auto views = synth_chessboard_views(cam, BoardSpec{}, 10, 0.5, 77);
    const CalibrationResult initial = calibrate_zhang(views, {1280, 720});
    const CalibrationResult refined = refine_reprojection(initial, views);
    EXPECT_LE(refined.rms_reprojection_error, initial.rms_reprojection_error);
    EXPECT_NEAR(refined.model.fx, 1000.0, 10.0);
    EXPECT_NEAR(refined.model.fy, 1000.0, 10.0);
}

TEST(CalibrationFile, RoundTripIsBitIdentical) {
    test::TempDir dir("calib");
    CameraModel m = known_camera(-0.2123456789012345, 0.0512345);
    m.k3 = 1.0 / 3.0;
    m.p1 = -1e-4;
    m.p2 = 2.5e-5;
    m.skew = 0.1;
    m.cx = 640.123456789;
    save_model(m, dir / "cam.json");
    EXPECT_EQ(load_model(dir / "cam.json"), m);
}

TEST(CalibrationFile, MissingFieldNamesIt) {
    const std::string text = R"({"image_width": 10, "image_height": 10, "fy": 1, "cx": 0, "cy": 0,
                                 "k1": 0, "k2": 0, "p1": 0, "p2": 0})";
    try {
        parse_model(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("\"fx\""), std::string::npos);
    }
}

TEST(CalibrationFile, AbsentK3DefaultsToZero) {
    const std::string text = R"({"image_width": 10, "image_height": 10, "fx": 2, "fy": 1, "cx": 0, "cy": 0,
                                 "k1": 0.1, "k2": 0, "p1": 0, "p2": 0, "extra": "ignored"})";
    const CameraModel m = parse_model(text);
    EXPECT_EQ(m.k3, 0.0);
    EXPECT_EQ(m.fx, 2.0);
}

TEST(CalibrationFile, MissingFileIsFileError) {
    try {
        load_model("/nonexistent/cam.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FileError);
    }
}

TEST(CornersFile, ParsesViews) {
    std::istringstream in("# comment\nview 0 2 2 0.5\n1 2\n3 4\n\n5 6\n7 8\n");
    const auto views = parse_corners(in);
    ASSERT_EQ(views.size(), 1u);
    ASSERT_EQ(views[0].image_points.size(), 4u);
    EXPECT_EQ(views[0].object_points[3], (Point2{0.5, 0.5}));
    EXPECT_EQ(views[0].image_points[2], (Point2{5, 6}));
}

TEST(CornersFile, MalformedHeaderNamesLine) {
    std::istringstream in("\nvue 0 2 2 0.5\n");
    try {
        parse_corners(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(CalibrationProperty, UndistortRoundTrip) {
    auto rng = test::rng_for(21);
    for (int i = 0; i < 1000; ++i) {
        CameraModel cam = known_camera(test::uniform(rng, -0.3, 0.3));
        cam.fx = test::uniform(rng, 500, 1500);
        cam.fy = cam.fx * test::uniform(rng, 0.95, 1.05);
        const double r = test::uniform(rng, 0.0, 0.7), th = test::uniform(rng, 0, 2 * std::numbers::pi);
        const Point2 n{r * std::cos(th), r * std::sin(th)};
        const Point2 back = pixel_to_normalized(cam, undistort_point(cam, normalized_to_pixel(cam, distort_normalized(cam, n))));
        ASSERT_NEAR(back.x, n.x, 1e-6);
        ASSERT_NEAR(back.y, n.y, 1e-6);
    }
}

TEST(CalibrationProperty, NoiseFreeCalibrationIsExactAndRotationsOrthonormal) {
    auto rng = test::rng_for(22);
    for (int i = 0; i < 100; ++i) {
        CameraModel cam = known_camera();
        cam.fx = test::uniform(rng, 800, 1200);
        cam.fy = cam.fx * test::uniform(rng, 0.97, 1.03);
        cam.cx = test::uniform(rng, 600, 680);
        cam.cy = test::uniform(rng, 330, 390);
        const int n = test::uniform_int(rng, 3, 6);
        const auto views = synth_chessboard_views(cam, BoardSpec{}, n, 0.0, 1000 + i);
        const CalibrationResult r = calibrate_zhang(views, {1280, 720});
        ASSERT_LT(r.rms_reprojection_error, 1e-3);
        ASSERT_TRUE(std::isfinite(r.rms_reprojection_error));
        for (const auto& e : r.extrinsics) ASSERT_LT(orthonormality_error(e.rotation), 1e-6);
    }
}

TEST(CalibrationProperty, RefinementNeverIncreasesRms) {
    auto rng = test::rng_for(23);
    for (int i = 0; i < 100; ++i) {
        const CameraModel cam = known_camera(test::uniform(rng, -0.3, 0.1), test::uniform(rng, -0.05, 0.05));
        const auto views = synth_chessboard_views(cam, BoardSpec{}, test::uniform_int(rng, 6, 10), test::uniform(rng, 0.1, 0.8),
                                                  2000 + i);
        const CalibrationResult initial = calibrate_zhang(views, {1280, 720});
        const CalibrationResult refined = refine_reprojection(initial, views);
        ASSERT_LE(refined.rms_reprojection_error, initial.rms_reprojection_error);
        for (const auto& e : refined.extrinsics) ASSERT_LT(orthonormality_error(e.rotation), 1e-6);
    }
}

TEST(CalibrationProperty, ZeroCoefficientUndistortIsIdentity) {
    auto rng = test::rng_for(24);
    for (int i = 0; i < kPropertyCases; ++i) {
        const int w = test::uniform_int(rng, 4, 24), h = test::uniform_int(rng, 4, 24);
        CameraModel cam;
        cam.fx = test::uniform(rng, 10, 100);
        cam.fy = test::uniform(rng, 10, 100);
        cam.cx = test::uniform(rng, 0, w);
        cam.cy = test::uniform(rng, 0, h);
        const ImageBuffer img = test::random_image(rng, w, h);
        ASSERT_EQ(undistort_image(cam, img), img);
    }
}
