#pragma once

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lanekit/error.hpp"
#include "lanekit/image.hpp"
#include "lanekit/point.hpp"

namespace lanekit {

/// 3x3 projective map, scaled so the bottom-right element is 1.
class Homography {
public:
    Homography() : m_(Eigen::Matrix3d::Identity()) {}

    /// Normalizes m by m(2,2). Throws SingularMatrix when that is impossible or
    /// the normalized determinant vanishes.
    static Homography from_matrix(const Eigen::Matrix3d& m) {
        if (!m.allFinite() || std::fabs(m(2, 2)) < 1e-300) {
            throw Error(ErrorKind::SingularMatrix, "homography has zero bottom-right element");
        }
        Homography h;
        h.m_ = m / m(2, 2);
        if (!(std::fabs(h.m_.determinant()) > 1e-12)) {
            throw Error(ErrorKind::SingularMatrix, "homography determinant vanishes");
        }
        return h;
    }

    static Homography translation(double tx, double ty) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 2) = tx;
        m(1, 2) = ty;
        return from_matrix(m);
    }

    const Eigen::Matrix3d& matrix() const noexcept { return m_; }
    double operator()(int r, int c) const { return m_(r, c); }

    /// Composition: (a * b) applies b first.
    friend Homography operator*(const Homography& a, const Homography& b) { return from_matrix(a.m_ * b.m_); }

private:
    Eigen::Matrix3d m_;
};

inline Point2 apply_homography(const Homography& h, Point2 p) {
    const auto& m = h.matrix();
    const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
    if (std::fabs(w) <= 1e-12) throw Error(ErrorKind::PointAtInfinity, "point maps to infinity");
    return {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w, (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

/// Homogeneous scale of p under h. Points on the same side of the line that h
/// sends to infinity share its sign.
inline double homogeneous_w(const Homography& h, Point2 p) {
    const auto& m = h.matrix();
    return m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
}

inline Homography invert(const Homography& h) {
    if (!(std::fabs(h.matrix().determinant()) > 1e-12)) {
        throw Error(ErrorKind::SingularMatrix, "cannot invert a singular homography");
    }
    return Homography::from_matrix(h.matrix().inverse());
}

namespace detail {

// Similarity moving the centroid to the origin with RMS distance sqrt(2).
inline Eigen::Matrix3d normalizing_transform(std::span<const Point2> pts) {
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double ms = 0.0;
    for (const auto& p : pts) ms += (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
    const double rms = std::sqrt(ms / static_cast<double>(pts.size()));
    const double s = rms > 0.0 ? std::sqrt(2.0) / rms : 1.0;
    Eigen::Matrix3d t;
    t << s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0;
    return t;
}

inline Point2 transform(const Eigen::Matrix3d& t, Point2 p) {
    const double w = t(2, 0) * p.x + t(2, 1) * p.y + t(2, 2);
    return {(t(0, 0) * p.x + t(0, 1) * p.y + t(0, 2)) / w, (t(1, 0) * p.x + t(1, 1) * p.y + t(1, 2)) / w};
}

inline bool has_collinear_triple(std::span<const Point2, 4> q) {
    double extent = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) extent = std::max(extent, distance(q[i], q[j]));
    if (extent == 0.0) return true;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            for (int k = j + 1; k < 4; ++k) {
                const Point2 a = q[j] - q[i];
                const Point2 b = q[k] - q[i];
                if (std::fabs(a.x * b.y - a.y * b.x) < 1e-10 * extent * extent) return true;
            }
        }
    }
    return false;
}

}  // namespace detail

/// Exact four-point homography mapping src[i] onto dst[i].
inline Homography homography_from_quad(std::span<const Point2, 4> src, std::span<const Point2, 4> dst) {
    if (detail::has_collinear_triple(src) || detail::has_collinear_triple(dst)) {
        throw Error(ErrorKind::DegenerateQuad, "three of the four quad points are collinear");
    }
    const Eigen::Matrix3d ts = detail::normalizing_transform(src);
    const Eigen::Matrix3d td = detail::normalizing_transform(dst);

    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const Point2 p = detail::transform(ts, src[i]);
        const Point2 q = detail::transform(td, dst[i]);
        double* r0 = a[2 * i];
        double* r1 = a[2 * i + 1];
        r0[0] = p.x; r0[1] = p.y; r0[2] = 1.0;
        r0[6] = -p.x * q.x; r0[7] = -p.y * q.x; r0[8] = q.x;
        r1[3] = p.x; r1[4] = p.y; r1[5] = 1.0;
        r1[6] = -p.x * q.y; r1[7] = -p.y * q.y; r1[8] = q.y;
    }
    // Gaussian elimination with partial pivoting on the augmented 8x9 system.
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-10) {
            throw Error(ErrorKind::DegenerateQuad, "singular quad system");
        }
        if (pivot != col) std::swap(a[pivot], a[col]);
        for (int r = col + 1; r < 8; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
        }
    }
    double h[8];
    for (int r = 7; r >= 0; --r) {
        double s = a[r][8];
        for (int c = r + 1; c < 8; ++c) s -= a[r][c] * h[c];
        h[r] = s / a[r][r];
    }
    Eigen::Matrix3d hn;
    hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
    return Homography::from_matrix(td.inverse() * hn * ts);
}

/// Hartley-normalized DLT over n >= 4 correspondences.
inline Homography estimate_homography_dlt(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size()) {
        throw Error(ErrorKind::DimensionMismatch, "correspondence lists differ in length");
    }
    if (src.size() < 4) throw Error(ErrorKind::DegenerateConfiguration, "at least 4 correspondences required");
    const Eigen::Matrix3d ts = detail::normalizing_transform(src);
    const Eigen::Matrix3d td = detail::normalizing_transform(dst);
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point2 p = detail::transform(ts, src[static_cast<std::size_t>(i)]);
        const Point2 q = detail::transform(td, dst[static_cast<std::size_t>(i)]);
        a.row(2 * i) << -p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x;
        a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(7) > 1e-8 * sv(0))) {
        throw Error(ErrorKind::DegenerateConfiguration, "correspondences do not determine a unique homography");
    }
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d full = td.inverse() * hn * ts;
    try {
        return Homography::from_matrix(full);
    } catch (const Error&) {
        throw Error(ErrorKind::DegenerateConfiguration, "estimated homography is singular");
    }
}

/// Table of source coordinates for warping into an image of out_size with h
/// mapping source pixels to destination pixels.
inline RemapTable make_warp_table(const Homography& h, Size out_size) {
    const Eigen::Matrix3d inv = invert(h).matrix();
    RemapTable table(out_size.width, out_size.height);
    parallel_rows(out_size.height, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < out_size.width; ++x) {
                const double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
                if (std::fabs(w) <= 1e-12) {
                    table.set(x, y, -1.0, -1.0);
                    continue;
                }
                table.set(x, y, (inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) / w,
                          (inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) / w);
            }
        }
    });
    return table;
}

/// Inverse-mapped bilinear warp; pixels whose source falls outside are black.
inline ImageBuffer warp_image(const ImageBuffer& img, const Homography& h, Size out_size) {
    return remap(img, make_warp_table(h, out_size));
}

/// Corner order is top-left, top-right, bottom-left, bottom-right, each as a
/// fraction of image width / height.
struct QuadFractions {
    std::array<Point2, 4> src{{{0.43, 0.65}, {0.57, 0.65}, {0.10, 1.0}, {0.95, 1.0}}};
    std::array<Point2, 4> dst{{{0.20, 0.0}, {0.80, 0.0}, {0.20, 1.0}, {0.80, 1.0}}};
};

/// Camera-to-bird's-eye homography for a frame of the given size.
inline Homography birdseye_homography(const QuadFractions& quad, Size size) {
    std::array<Point2, 4> s{}, d{};
    for (int i = 0; i < 4; ++i) {
        s[i] = {quad.src[i].x * size.width, quad.src[i].y * size.height};
        d[i] = {quad.dst[i].x * size.width, quad.dst[i].y * size.height};
    }
    return homography_from_quad(s, d);
}

}  // namespace lanekit
