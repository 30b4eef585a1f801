#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"

using namespace lanekit;
using lanekit::test::kPropertyCases;

namespace {

using Quad = std::array<Point2, 4>;

Quad random_quad(std::mt19937_64& rng, double span = 1000.0) {
    for (;;) {
        Quad q;
        for (auto& p : q) p = {test::uniform(rng, 0, span), test::uniform(rng, 0, span)};
        bool ok = true;
        for (int i = 0; i < 4 && ok; ++i)
            for (int j = i + 1; j < 4 && ok; ++j)
                for (int k = j + 1; k < 4 && ok; ++k) {
                    const Point2 a = q[j] - q[i], b = q[k] - q[i];
                    ok = std::fabs(a.x * b.y - a.y * b.x) > 0.05 * span * span;
                }
        if (ok) return q;
    }
}

// Mildly projective, well-conditioned homography on a ~[0, 1000] frame.
Homography random_homography(std::mt19937_64& rng) {
    Eigen::Matrix3d m;
    m << test::uniform(rng, 0.8, 1.2), test::uniform(rng, -0.2, 0.2), test::uniform(rng, -50, 50),
        test::uniform(rng, -0.2, 0.2), test::uniform(rng, 0.8, 1.2), test::uniform(rng, -50, 50),
        test::uniform(rng, -2e-4, 2e-4), test::uniform(rng, -2e-4, 2e-4), 1.0;
    return Homography::from_matrix(m);
}

Homography near_identity(std::mt19937_64& rng, double shift) {
    Eigen::Matrix3d m;
    m << test::uniform(rng, 0.95, 1.05), test::uniform(rng, -0.03, 0.03), test::uniform(rng, -shift, shift),
        test::uniform(rng, -0.03, 0.03), test::uniform(rng, 0.95, 1.05), test::uniform(rng, -shift, shift),
        test::uniform(rng, -1e-4, 1e-4), test::uniform(rng, -1e-4, 1e-4), 1.0;
    return Homography::from_matrix(m);
}

double max_abs_diff(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Largest per-sample difference over pixels at least `border` px from the edge.
double worst_interior_diff(const ImageBuffer& a, const ImageBuffer& b, int border) {
    double worst = 0.0;
    for (int y = border; y < a.height() - border; ++y)
        for (int x = border; x < a.width() - border; ++x)
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::fabs(double(a.at(x, y, c)) - b.at(x, y, c)));
    return worst;
}

}  // namespace

TEST(HomographyFromQuad, IdentityOnUnitSquare) {
    const Quad sq{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    const Homography h = homography_from_quad(sq, sq);
    EXPECT_LT(max_abs_diff(h.matrix(), Eigen::Matrix3d::Identity()), 1e-12);
}

TEST(HomographyFromQuad, Translation) {
    const Quad src{{{0, 0}, {100, 0}, {100, 50}, {0, 50}}};
    Quad dst = src;
    for (auto& p : dst) p = p + Point2{10, 20};
    const Homography h = homography_from_quad(src, dst);
    EXPECT_LT(max_abs_diff(h.matrix(), Homography::translation(10, 20).matrix()), 1e-9);
}

TEST(HomographyFromQuad, CollinearSourceIsDegenerate) {
    const Quad src{{{0, 0}, {1, 1}, {2, 2}, {0, 5}}};
    const Quad dst{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    try {
        homography_from_quad(src, dst);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateQuad);
    }
}

TEST(EstimateDlt, FourPairsMatchDirectSolve) {
    auto rng = test::rng_for(31);
    const Quad src = random_quad(rng), dst = random_quad(rng);
    const Homography a = homography_from_quad(src, dst);
    const Homography b = estimate_homography_dlt(std::span<const Point2>(src), std::span<const Point2>(dst));
    for (const auto& p : src) {
        const Point2 pa = apply_homography(a, p), pb = apply_homography(b, p);
        EXPECT_NEAR(pa.x, pb.x, 1e-6);
        EXPECT_NEAR(pa.y, pb.y, 1e-6);
    }
}

TEST(EstimateDlt, RecoversKnownHomography) {
    auto rng = test::rng_for(32);
    const Homography h = random_homography(rng);
    std::vector<Point2> src, dst;
    for (int i = 0; i < 20; ++i) {
        src.push_back({test::uniform(rng, 0, 1000), test::uniform(rng, 0, 1000)});
        dst.push_back(apply_homography(h, src.back()));
    }
    const Homography est = estimate_homography_dlt(src, dst);
    EXPECT_LT(max_abs_diff(est.matrix(), h.matrix()), 1e-6);
}

TEST(EstimateDlt, NoisyPairsHaveSmallTransferError) {
    auto rng = test::rng_for(33);
    std::normal_distribution<double> noise(0.0, 0.5);
    const Homography h = random_homography(rng);
    std::vector<Point2> src, dst;
    for (int i = 0; i < 20; ++i) {
        src.push_back({test::uniform(rng, 0, 1000), test::uniform(rng, 0, 1000)});
        const Point2 q = apply_homography(h, src.back());
        dst.push_back({q.x + noise(rng), q.y + noise(rng)});
    }
    const Homography est = estimate_homography_dlt(src, dst);
    double err = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) err += distance(apply_homography(est, src[i]), apply_homography(h, src[i]));
    EXPECT_LT(err / src.size(), 1.0);
}

TEST(EstimateDlt, DegenerateConfiguration) {
    const std::vector<Point2> src{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
    const std::vector<Point2> dst{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {2, 2}};
    try {
        estimate_homography_dlt(src, dst);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateConfiguration);
    }
}

TEST(ApplyHomography, IdentityAndTranslation) {
    const Point2 p{3.5, -2.25};
    EXPECT_EQ(apply_homography(Homography{}, p), p);
    const Point2 q = apply_homography(Homography::translation(4, 5), p);
    EXPECT_DOUBLE_EQ(q.x, 7.5);
    EXPECT_DOUBLE_EQ(q.y, 2.75);
}

TEST(ApplyHomography, PointAtInfinity) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(2, 0) = 0.01;  // w = 0.01 x + 1 vanishes at x = -100
    try {
        apply_homography(Homography::from_matrix(m), {-100.0, 7.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PointAtInfinity);
    }
}

TEST(Invert, IdentityAndTranslation) {
    EXPECT_LT(max_abs_diff(invert(Homography{}).matrix(), Eigen::Matrix3d::Identity()), 1e-15);
    EXPECT_LT(max_abs_diff(invert(Homography::translation(3, -4)).matrix(), Homography::translation(-3, 4).matrix()), 1e-15);
}

TEST(Invert, SingularMatrix) {
    Eigen::Matrix3d m;
    m << 1, 2, 3, 2, 4, 6, 0, 0, 1;
    EXPECT_THROW(Homography::from_matrix(m), Error);
}

TEST(WarpImage, IdentityIsExact) {
    auto rng = test::rng_for(34);
    const ImageBuffer img = test::random_image(rng, 30, 20);
    EXPECT_EQ(warp_image(img, Homography{}, {30, 20}), img);
}

TEST(WarpImage, TranslationShiftsColumns) {
    auto rng = test::rng_for(35);
    const ImageBuffer img = test::random_image(rng, 40, 12);
    const ImageBuffer out = warp_image(img, Homography::translation(10, 0), {40, 12});
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 40; ++x)
            for (int c = 0; c < 3; ++c) {
                if (x < 10) {
                    ASSERT_EQ(out.at(x, y, c), 0);
                } else {
                    ASSERT_EQ(out.at(x, y, c), img.at(x - 10, y, c));
                }
            }
}

TEST(WarpImage, RoundTripOnSmoothImage) {
    const ImageBuffer img = test::smooth_image(200, 150);
    Eigen::Matrix3d m;
    m << 1.05, 0.03, -4, -0.02, 0.97, 3, 1e-5, -2e-5, 1;
    const Homography h = Homography::from_matrix(m);
    const ImageBuffer back = warp_image(warp_image(img, h, {200, 150}), invert(h), {200, 150});
    EXPECT_LE(worst_interior_diff(back, img, 10), 3.0);
}

TEST(BirdseyeHomography, DefaultQuadMapsCorners) {
    const QuadFractions quad;
    const Homography h = birdseye_homography(quad, {1280, 720});
    for (int i = 0; i < 4; ++i) {
        const Point2 s{quad.src[i].x * 1280, quad.src[i].y * 720};
        const Point2 d = apply_homography(h, s);
        EXPECT_NEAR(d.x, quad.dst[i].x * 1280, 1e-6);
        EXPECT_NEAR(d.y, quad.dst[i].y * 720, 1e-6);
    }
}

TEST(PerspectiveProperty, QuadCornersMapExactly) {
    auto rng = test::rng_for(41);
    for (int i = 0; i < 1000; ++i) {
        const Quad src = random_quad(rng), dst = random_quad(rng);
        const Homography h = homography_from_quad(src, dst);
        for (int k = 0; k < 4; ++k) {
            const Point2 p = apply_homography(h, src[k]);
            ASSERT_LE(distance(p, dst[k]), 1e-6);
        }
    }
}

TEST(PerspectiveProperty, InverseComposesToIdentity) {
    auto rng = test::rng_for(42);
    for (int i = 0; i < kPropertyCases; ++i) {
        const Homography h = random_homography(rng);
        const Homography inv = invert(h);
        ASSERT_LT(max_abs_diff(h.matrix() * inv.matrix() / (h.matrix() * inv.matrix())(2, 2), Eigen::Matrix3d::Identity()), 1e-9);
        const Point2 p{test::uniform(rng, 0, 1000), test::uniform(rng, 0, 1000)};
        const Point2 back = apply_homography(inv, apply_homography(h, p));
        ASSERT_LE(distance(back, p), 1e-6);
    }
}

TEST(PerspectiveProperty, DltInvariantToCorrespondenceOrder) {
    auto rng = test::rng_for(43);
    for (int i = 0; i < kPropertyCases; ++i) {
        const Homography h = random_homography(rng);
        std::normal_distribution<double> noise(0.0, 0.3);
        std::vector<std::pair<Point2, Point2>> pairs;
        const int n = test::uniform_int(rng, 6, 20);
        for (int k = 0; k < n; ++k) {
            const Point2 s{test::uniform(rng, 0, 1000), test::uniform(rng, 0, 1000)};
            const Point2 d = apply_homography(h, s);
            pairs.push_back({s, {d.x + noise(rng), d.y + noise(rng)}});
        }
        auto estimate = [](const std::vector<std::pair<Point2, Point2>>& ps) {
            std::vector<Point2> s, d;
            for (const auto& [a, b] : ps) {
                s.push_back(a);
                d.push_back(b);
            }
            return estimate_homography_dlt(s, d);
        };
        const Homography a = estimate(pairs);
        std::shuffle(pairs.begin(), pairs.end(), rng);
        const Homography b = estimate(pairs);
        for (const auto& [s, d] : pairs) ASSERT_LE(distance(apply_homography(a, s), apply_homography(b, s)), 1e-6);
    }
}

TEST(PerspectiveProperty, WarpPreservesValueRange) {
    auto rng = test::rng_for(44);
    for (int i = 0; i < kPropertyCases; ++i) {
        const ImageBuffer img = test::random_image(rng, 16, 12);
        Eigen::Matrix3d m;
        m << test::uniform(rng, 0.5, 1.5), test::uniform(rng, -0.3, 0.3), test::uniform(rng, -4, 4),
            test::uniform(rng, -0.3, 0.3), test::uniform(rng, 0.5, 1.5), test::uniform(rng, -4, 4),
            test::uniform(rng, -0.01, 0.01), test::uniform(rng, -0.01, 0.01), 1.0;
        const Homography h = Homography::from_matrix(m);
        // Each output is a convex combination of its four source neighbours.
        const ImageBuffer out = warp_image(img, h, {16, 12});
        const Homography inv = invert(h);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x) {
                Point2 s;
                try {
                    s = apply_homography(inv, {double(x), double(y)});
                } catch (const Error&) {
                    continue;
                }
                if (!(s.x >= 0 && s.y >= 0 && s.x <= 15 && s.y <= 11)) continue;
                const int x0 = int(s.x), y0 = int(s.y), x1 = std::min(x0 + 1, 15), y1 = std::min(y0 + 1, 11);
                for (int c = 0; c < 3; ++c) {
                    const auto [lo, hi] = std::minmax({img.at(x0, y0, c), img.at(x1, y0, c), img.at(x0, y1, c), img.at(x1, y1, c)});
                    ASSERT_GE(out.at(x, y, c), lo);
                    ASSERT_LE(out.at(x, y, c), hi);
                }
            }
    }
}

TEST(PerspectiveProperty, WarpComposition) {
    auto rng = test::rng_for(45);
    const ImageBuffer img = test::smooth_image(120, 90);
    for (int i = 0; i < 100; ++i) {
        const Homography h1 = near_identity(rng, 3), h2 = near_identity(rng, 3);
        const ImageBuffer two_step = warp_image(warp_image(img, h1, {120, 90}), h2, {120, 90});
        const ImageBuffer one_step = warp_image(img, h2 * h1, {120, 90});
        ASSERT_LE(worst_interior_diff(two_step, one_step, 15), 3.0);
    }
}

TEST(PerspectiveProperty, WarpIndependentOfThreadCount) {
    auto rng = test::rng_for(46);
    for (int i = 0; i < 100; ++i) {
        const ImageBuffer img = test::random_image(rng, 24, 40);
        const Homography h = near_identity(rng, 2);
        set_thread_budget(1);
        const ImageBuffer a = warp_image(img, h, {24, 40});
        set_thread_budget(4);
        const ImageBuffer b = warp_image(img, h, {24, 40});
        set_thread_budget(0);
        ASSERT_EQ(a, b);
    }
}
