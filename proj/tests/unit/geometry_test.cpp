#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace lanekit;
using lanekit::test::kPropertyCases;
using lanekit::test::make_fit;

namespace {

LanePair accepted(LaneFit l, LaneFit r) { return {l, r, true, RejectReason::None}; }

}  // namespace

TEST(ToMeterSpace, IdentityScale) {
    const MeterFit m = to_meter_space(make_fit(1e-3, -0.5, 640), {1.0, 1.0});
    EXPECT_EQ(m.a_m, 1e-3);
    EXPECT_EQ(m.b_m, -0.5);
    EXPECT_EQ(m.c_m, 640);
}

TEST(ToMeterSpace, LaneWidthInMeters) {
    EXPECT_NEAR(to_meter_space(make_fit(0, 0, 700), ScaleConfig{}).c_m, 3.7, 1e-12);
}

TEST(ToMeterSpace, SubstitutionIdentity) {
    auto rng = test::rng_for(70);
    const ScaleConfig s;
    for (int i = 0; i < 100; ++i) {
        const LaneFit f = make_fit(test::uniform(rng, -1e-3, 1e-3), test::uniform(rng, -1, 1), test::uniform(rng, 0, 1280));
        const MeterFit m = to_meter_space(f, s);
        const double y = test::uniform(rng, 0, 720);
        const double ym = y * s.ym_per_pix;
        EXPECT_NEAR(m.a_m * ym * ym + m.b_m * ym + m.c_m, f.x_at(y) * s.xm_per_pix, 1e-9);
    }
}

TEST(CurvatureRadius, ZeroCurvatureIsStraight) {
    EXPECT_FALSE(curvature_radius(make_fit(0, 0.3, 500), 719, ScaleConfig{}).has_value());
}

TEST(CurvatureRadius, VertexFormula) {
    const auto r = curvature_radius(make_fit(1e-3, 0, 10), 0, {1.0, 1.0});
    ASSERT_TRUE(r);
    EXPECT_DOUBLE_EQ(*r, 500.0);
}

TEST(CurvatureRadius, SampledCircle) {
    const ScaleConfig s;
    const double radius = 500.0, y_vertex = 719 * s.ym_per_pix;
    std::vector<PixelPos> px;
    for (int y = 0; y < 720; ++y) {
        const double dy = y * s.ym_per_pix - y_vertex;
        const double xm = 3.0 + radius - std::sqrt(radius * radius - dy * dy);
        px.push_back({static_cast<int>(std::lround(xm / s.xm_per_pix)), y});
    }
    const auto r = curvature_radius(fit_polynomial(px), 719, s);
    ASSERT_TRUE(r);
    EXPECT_NEAR(*r, radius, 0.02 * radius);
}

TEST(VehicleOffset, Examples) {
    const ScaleConfig s;
    EXPECT_NEAR(vehicle_offset(accepted(make_fit(0, 0, 290), make_fit(0, 0, 990)), 1280, 720, s), 0.0, 1e-12);
    // Lane centre at 570, 70 px left of the image centre.
    EXPECT_NEAR(vehicle_offset(accepted(make_fit(0, 0, 220), make_fit(0, 0, 920)), 1280, 720, s), 0.37, 1e-12);
    LanePair rejected = accepted(make_fit(0, 0, 290), make_fit(0, 0, 990));
    rejected.accepted = false;
    try {
        vehicle_offset(rejected, 1280, 720, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RejectedPair);
    }
}

TEST(ComputeMetrics, MeanOfCurvedSides) {
    const FrameMetrics m = compute_metrics(accepted(make_fit(1e-3, 0, 290), make_fit(0, 0, 990)), 1280, 720, {1.0, 1.0});
    ASSERT_TRUE(m.left_radius_m);
    EXPECT_FALSE(m.right_radius_m);
    EXPECT_EQ(m.mean_radius_m, m.left_radius_m);
}

TEST(ScaleConfig, RejectsNonPositive) { EXPECT_THROW((ScaleConfig{0.0, 1.0}.validate()), Error); }

TEST(GeometryProperty, RadiusIgnoresHorizontalShift) {
    auto rng = test::rng_for(71);
    const ScaleConfig s;
    for (int i = 0; i < kPropertyCases; ++i) {
        const double a = test::uniform(rng, -1e-3, 1e-3), b = test::uniform(rng, -1, 1);
        const double y = test::uniform(rng, 0, 720);
        const auto r1 = curvature_radius(make_fit(a, b, test::uniform(rng, -1000, 2000)), y, s);
        const auto r2 = curvature_radius(make_fit(a, b, test::uniform(rng, -1000, 2000)), y, s);
        ASSERT_EQ(r1.has_value(), r2.has_value());
        if (r1) {
            ASSERT_EQ(*r1, *r2);
        }
    }
}

TEST(GeometryProperty, StraighterParabolaHasLargerRadius) {
    auto rng = test::rng_for(72);
    const ScaleConfig s;
    for (int i = 0; i < kPropertyCases; ++i) {
        const double b = test::uniform(rng, -0.5, 0.5), c = test::uniform(rng, 0, 1280), y = test::uniform(rng, 0, 720);
        const double sign = i % 2 ? 1.0 : -1.0;
        double prev = 0.0;
        for (double mag = 1e-3; mag > 1e-6; mag *= 0.7) {
            const auto r = curvature_radius(make_fit(sign * mag, b, c), y, s);
            ASSERT_TRUE(r);
            ASSERT_GT(*r, prev);
            prev = *r;
        }
    }
}

TEST(GeometryProperty, OffsetIsAntisymmetricUnderMirroring) {
    auto rng = test::rng_for(73);
    const ScaleConfig s;
    for (int i = 0; i < kPropertyCases; ++i) {
        const int w = 1280, h = 720;
        const LaneFit l = make_fit(test::uniform(rng, -1e-3, 1e-3), test::uniform(rng, -0.5, 0.5), test::uniform(rng, 100, 500));
        const LaneFit r = make_fit(test::uniform(rng, -1e-3, 1e-3), test::uniform(rng, -0.5, 0.5), test::uniform(rng, 800, 1200));
        const LaneFit ml = make_fit(-r.a, -r.b, w - r.c), mr = make_fit(-l.a, -l.b, w - l.c);
        const double o = vehicle_offset(accepted(l, r), w, h, s);
        const double mo = vehicle_offset(accepted(ml, mr), w, h, s);
        ASSERT_NEAR(mo, -o, 1e-9);
    }
}

TEST(GeometryProperty, IdentityScaleIsIdentity) {
    auto rng = test::rng_for(74);
    for (int i = 0; i < kPropertyCases; ++i) {
        const LaneFit f = make_fit(test::uniform(rng, -1, 1), test::uniform(rng, -10, 10), test::uniform(rng, -1e4, 1e4));
        const MeterFit m = to_meter_space(f, {1.0, 1.0});
        ASSERT_EQ(m.a_m, f.a);
        ASSERT_EQ(m.b_m, f.b);
        ASSERT_EQ(m.c_m, f.c);
    }
}
