#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "test_support.hpp"

using namespace lanekit;
using lanekit::test::kPropertyCases;

namespace {

ImageBuffer pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) { return ImageBuffer(1, 1, 3, {r, g, b}); }

// Reference HLS -> RGB, used only to check the forward conversion.
std::array<double, 3> hls_to_rgb(double h, double l, double s) {
    if (s == 0.0) return {l, l, l};
    const double m2 = l <= 0.5 ? l * (1.0 + s) : l + s - l * s;
    const double m1 = 2.0 * l - m2;
    auto v = [&](double hue) {
        hue = std::fmod(hue + 360.0, 360.0);
        if (hue < 60.0) return m1 + (m2 - m1) * hue / 60.0;
        if (hue < 180.0) return m2;
        if (hue < 240.0) return m1 + (m2 - m1) * (240.0 - hue) / 60.0;
        return m1;
    };
    return {v(h + 120.0), v(h), v(h - 120.0)};
}

// Independent sRGB -> CIELAB (D65) written from the published formulas.
std::array<double, 3> reference_lab(int r8, int g8, int b8) {
    auto lin = [](int c) {
        const double v = c / 255.0;
        return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
    };
    const double r = lin(r8), g = lin(g8), b = lin(b8);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    auto f = [](double t) {
        const double d = 6.0 / 29.0;
        return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
    };
    const double fx = f(x / 0.95047), fy = f(y / 1.0), fz = f(z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

PlaneF32 transpose(const PlaneF32& p) {
    PlaneF32 t(p.height(), p.width());
    for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x) t.at(y, x) = p.at(x, y);
    return t;
}

}  // namespace

TEST(ImageBuffer, RejectsMismatchedSampleCount) {
    EXPECT_THROW(ImageBuffer(2, 2, 3, std::vector<std::uint8_t>(11)), Error);
    EXPECT_THROW(ImageBuffer(0, 2, 3), Error);
}

TEST(Grayscale, Rec601Weights) {
    EXPECT_FLOAT_EQ(to_grayscale(pixel(255, 255, 255)).at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(to_grayscale(pixel(0, 0, 0)).at(0, 0), 0.0f);
    EXPECT_NEAR(to_grayscale(pixel(255, 0, 0)).at(0, 0), 0.299f, 1e-6);
}

TEST(Grayscale, RequiresThreeChannels) {
    EXPECT_THROW(to_grayscale(ImageBuffer(2, 2, 1)), Error);
}

TEST(Hls, Examples) {
    const Hls white = hls_pixel(255, 255, 255);
    EXPECT_FLOAT_EQ(white.h, 0.0f);
    EXPECT_FLOAT_EQ(white.l, 1.0f);
    EXPECT_FLOAT_EQ(white.s, 0.0f);
    const Hls red = hls_pixel(255, 0, 0);
    EXPECT_FLOAT_EQ(red.h, 0.0f);
    EXPECT_FLOAT_EQ(red.l, 0.5f);
    EXPECT_FLOAT_EQ(red.s, 1.0f);
    const Hls gray = hls_pixel(128, 128, 128);
    EXPECT_FLOAT_EQ(gray.s, 0.0f);
    EXPECT_NEAR(gray.l, 128.0 / 255.0, 1e-6);
}

TEST(Hsv, Examples) {
    const Hsv white = hsv_pixel(255, 255, 255);
    EXPECT_FLOAT_EQ(white.v, 1.0f);
    EXPECT_FLOAT_EQ(white.s, 0.0f);
    const Hsv green = hsv_pixel(0, 255, 0);
    EXPECT_FLOAT_EQ(green.h, 120.0f);
    EXPECT_FLOAT_EQ(green.s, 1.0f);
    EXPECT_FLOAT_EQ(green.v, 1.0f);
    const Hsv black = hsv_pixel(0, 0, 0);
    EXPECT_FLOAT_EQ(black.v, 0.0f);
    EXPECT_FLOAT_EQ(black.s, 0.0f);
}

TEST(Lab, ReferenceWhiteAndBlack) {
    const Lab w = lab_pixel(255, 255, 255);
    EXPECT_NEAR(w.l, 100.0, 0.1);
    EXPECT_NEAR(w.a, 0.0, 0.1);
    EXPECT_NEAR(w.b, 0.0, 0.1);
    const Lab k = lab_pixel(0, 0, 0);
    EXPECT_NEAR(k.l, 0.0, 0.1);
    EXPECT_NEAR(k.a, 0.0, 0.1);
    EXPECT_NEAR(k.b, 0.0, 0.1);
}

TEST(Lab, YellowMatchesReferenceConversion) {
    const Lab y = lab_pixel(255, 255, 0);
    const auto ref = reference_lab(255, 255, 0);
    EXPECT_GT(y.b, 90.0f);
    EXPECT_NEAR(y.l, ref[0], 1e-3);
    EXPECT_NEAR(y.a, ref[1], 1e-3);
    EXPECT_NEAR(y.b, ref[2], 1e-3);
}

TEST(ColorChannel, PlanesAgreeWithPixelConversions) {
    auto rng = test::rng_for(3);
    const ImageBuffer img = test::random_image(rng, 17, 9);
    const auto hls = rgb_to_hls(img);
    const auto lab = rgb_to_lab(img);
    const PlaneF32 b = color_channel(img, ColorChannel::LabB);
    const PlaneF32 mn = color_channel(img, ColorChannel::RgbMin);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const auto r = img.at(x, y, 0), g = img.at(x, y, 1), bl = img.at(x, y, 2);
            EXPECT_FLOAT_EQ(hls.c2.at(x, y), hls_pixel(r, g, bl).s);
            EXPECT_NEAR(lab.c2.at(x, y), b.at(x, y), 1e-4);
            EXPECT_FLOAT_EQ(mn.at(x, y), std::min({r, g, bl}) / 255.0f);
        }
}

TEST(Sobel, ConstantPlaneIsZero) {
    const PlaneF32 p(8, 6, 0.7f);
    for (auto axis : {Axis::X, Axis::Y}) {
        const PlaneF32 s = sobel(p, axis);
        for (float v : s.samples()) EXPECT_EQ(v, 0.0f);
    }
}

TEST(Sobel, HorizontalRampInterior) {
    const int w = 20, h = 10;
    PlaneF32 p(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) p.at(x, y) = static_cast<float>(x) / w;
    const PlaneF32 s = sobel(p, Axis::X);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) EXPECT_NEAR(s.at(x, y), 8.0 / w, 1e-6);
}

TEST(Sobel, AxisYIsTransposeOfAxisX) {
    PlaneF32 horiz(12, 9);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 12; ++x) horiz.at(x, y) = y >= 4 ? 1.0f : 0.0f;
    const PlaneF32 sy = sobel(horiz, Axis::Y);
    const PlaneF32 sx = sobel(transpose(horiz), Axis::X);
    EXPECT_EQ(transpose(sx).samples().size(), sy.samples().size());
    const PlaneF32 t = transpose(sx);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 12; ++x) EXPECT_FLOAT_EQ(sy.at(x, y), t.at(x, y));
}

TEST(Sobel, TooSmall) { EXPECT_THROW(sobel(PlaneF32(2, 5), Axis::X), Error); }

TEST(Gradient, MagnitudeAndDirection) {
    const PlaneF32 gx(4, 4, 3.0f), gy(4, 4, 4.0f);
    EXPECT_FLOAT_EQ(grad_magnitude(gx, gy).at(2, 2), 5.0f);
    const PlaneF32 one(4, 4, 1.0f), zero(4, 4, 0.0f);
    EXPECT_NEAR(grad_direction(one, one).at(1, 1), std::numbers::pi / 4, 1e-6);
    EXPECT_EQ(grad_direction(zero, zero).at(1, 1), 0.0f);
    EXPECT_THROW(grad_magnitude(PlaneF32(4, 4), PlaneF32(4, 5)), Error);
}

TEST(Bilinear, Examples) {
    ImageBuffer img(2, 1, 1, {0, 255});
    EXPECT_FLOAT_EQ(bilinear_sample(img, 1.0, 0.0)[0], 255.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 0.5, 0.0)[0], 127.5f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, -5.0, 0.0)[0], 0.0f);
    EXPECT_FLOAT_EQ(bilinear_sample(img, 0.0, 3.0)[0], 0.0f);
}

TEST(ImageProperty, HlsRoundTrip) {
    auto rng = test::rng_for(11);
    std::uniform_int_distribution<int> d(0, 255);
    for (int i = 0; i < 1000; ++i) {
        const int r = d(rng), g = d(rng), b = d(rng);
        const Hls hls = hls_pixel(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b));
        const auto back = hls_to_rgb(hls.h, hls.l, hls.s);
        EXPECT_NEAR(back[0] * 255.0, r, 1.0);
        EXPECT_NEAR(back[1] * 255.0, g, 1.0);
        EXPECT_NEAR(back[2] * 255.0, b, 1.0);
    }
}

TEST(ImageProperty, GrayscaleWithinChannelRange) {
    auto rng = test::rng_for(12);
    for (int i = 0; i < kPropertyCases; ++i) {
        const ImageBuffer img = test::random_image(rng, 8, 4);
        const PlaneF32 g = to_grayscale(img);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; ++x) {
                const auto [mn, mx] = std::minmax({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
                EXPECT_GE(g.at(x, y), mn / 255.0f - 1e-6f);
                EXPECT_LE(g.at(x, y), mx / 255.0f + 1e-6f);
            }
    }
}

TEST(ImageProperty, SobelIsLinear) {
    auto rng = test::rng_for(13);
    for (int i = 0; i < kPropertyCases; ++i) {
        const int w = test::uniform_int(rng, 3, 16), h = test::uniform_int(rng, 3, 12);
        const PlaneF32 p = test::random_plane(rng, w, h), q = test::random_plane(rng, w, h);
        const float a = static_cast<float>(test::uniform(rng, -2, 2)), b = static_cast<float>(test::uniform(rng, -2, 2));
        PlaneF32 mix(w, h);
        for (std::size_t k = 0; k < mix.size(); ++k) mix.samples()[k] = a * p.samples()[k] + b * q.samples()[k];
        for (auto axis : {Axis::X, Axis::Y}) {
            const PlaneF32 sm = sobel(mix, axis), sp = sobel(p, axis), sq = sobel(q, axis);
            for (std::size_t k = 0; k < sm.size(); ++k)
                ASSERT_NEAR(sm.samples()[k], a * sp.samples()[k] + b * sq.samples()[k], 1e-5);
        }
    }
}

TEST(ImageProperty, SobelOfConstantIsExactlyZero) {
    auto rng = test::rng_for(14);
    for (int i = 0; i < kPropertyCases; ++i) {
        const PlaneF32 p(test::uniform_int(rng, 3, 10), test::uniform_int(rng, 3, 10),
                         static_cast<float>(test::uniform(rng, -100, 100)));
        for (auto axis : {Axis::X, Axis::Y}) {
            const PlaneF32 g = sobel(p, axis);
            for (float v : g.samples()) ASSERT_EQ(v, 0.0f);
        }
    }
}

TEST(ImageProperty, MagnitudeDominatesComponents) {
    auto rng = test::rng_for(15);
    for (int i = 0; i < kPropertyCases; ++i) {
        const PlaneF32 gx = test::random_plane(rng, 6, 5, -50, 50), gy = test::random_plane(rng, 6, 5, -50, 50);
        const PlaneF32 m = grad_magnitude(gx, gy);
        for (std::size_t k = 0; k < m.size(); ++k) {
            ASSERT_GE(m.samples()[k], std::fabs(gx.samples()[k]));
            ASSERT_GE(m.samples()[k], std::fabs(gy.samples()[k]));
        }
    }
}

TEST(ImageProperty, BilinearIsContinuous) {
    auto rng = test::rng_for(16);
    const ImageBuffer img = test::random_image(rng, 32, 24);
    for (int i = 0; i < 1000; ++i) {
        const double eps = test::uniform(rng, 0.0, 0.999);
        const double x = test::uniform(rng, 0.0, 30.0 - eps), y = test::uniform(rng, 0.0, 23.0);
        const auto a = bilinear_sample(img, x, y), b = bilinear_sample(img, x + eps, y);
        for (int c = 0; c < 3; ++c) ASSERT_LE(std::fabs(a[c] - b[c]), 255.0 * eps + 1e-3);
    }
}

TEST(ImageProperty, BilinearAtIntegersIsExact) {
    auto rng = test::rng_for(17);
    const ImageBuffer img = test::random_image(rng, 20, 10);
    for (int i = 0; i < kPropertyCases; ++i) {
        const int x = test::uniform_int(rng, 0, 19), y = test::uniform_int(rng, 0, 9);
        const auto s = bilinear_sample(img, x, y);
        for (int c = 0; c < 3; ++c) ASSERT_EQ(s[c], static_cast<float>(img.at(x, y, c)));
    }
}
