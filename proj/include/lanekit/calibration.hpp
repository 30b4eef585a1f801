#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "lanekit/error.hpp"
#include "lanekit/image.hpp"
#include "lanekit/perspective.hpp"
#include "lanekit/point.hpp"

namespace lanekit {

/// Pinhole intrinsics plus the 5-coefficient Brown-Conrady lens model.
struct CameraModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double skew = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
    int image_width = 0;
    int image_height = 0;

    bool has_distortion() const noexcept { return k1 != 0.0 || k2 != 0.0 || k3 != 0.0 || p1 != 0.0 || p2 != 0.0; }

    Eigen::Matrix3d intrinsic_matrix() const {
        Eigen::Matrix3d k;
        k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Planar target points (Z = 0, meters) with their measured pixel positions.
struct ChessboardObservation {
    std::vector<Point2> object_points;
    std::vector<Point2> image_points;
};

struct ViewExtrinsics {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct CalibrationResult {
    CameraModel model;
    std::vector<ViewExtrinsics> extrinsics;
    double rms_reprojection_error = 0.0;
};

/// Applies radial (k1..k3) and tangential (p1, p2) distortion to normalized coordinates.
inline Point2 distort_normalized(const CameraModel& m, Point2 p) {
    const double x = p.x, y = p.y;
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (m.k1 + r2 * (m.k2 + r2 * m.k3));
    return {x * radial + 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x),
            y * radial + m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y};
}

inline Point2 normalized_to_pixel(const CameraModel& m, Point2 p) {
    return {m.fx * p.x + m.skew * p.y + m.cx, m.fy * p.y + m.cy};
}

/// Inverse of the pinhole part only; distortion is not removed.
inline Point2 pixel_to_normalized(const CameraModel& m, Point2 uv) {
    const double y = (uv.y - m.cy) / m.fy;
    return {(uv.x - m.cx - m.skew * y) / m.fx, y};
}

inline Point2 project_point(const CameraModel& m, const ViewExtrinsics& ext, Point2 object_point) {
    const Eigen::Vector3d pc = ext.rotation * Eigen::Vector3d(object_point.x, object_point.y, 0.0) + ext.translation;
    if (!(pc.z() > 0.0)) throw Error(ErrorKind::BehindCamera, "object point is not in front of the camera");
    return normalized_to_pixel(m, distort_normalized(m, {pc.x() / pc.z(), pc.y() / pc.z()}));
}

/// Removes lens distortion from one pixel by fixed-point iteration on the
/// normalized coordinates (at most 20 iterations, 1e-8 tolerance).
inline Point2 undistort_point(const CameraModel& m, Point2 uv) {
    const Point2 d = pixel_to_normalized(m, uv);
    double x = d.x, y = d.y;
    for (int iter = 0; iter < 20; ++iter) {
        const double r2 = x * x + y * y;
        const double radial = 1.0 + r2 * (m.k1 + r2 * (m.k2 + r2 * m.k3));
        const double tx = 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x);
        const double ty = m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y;
        const double nx = (d.x - tx) / radial;
        const double ny = (d.y - ty) / radial;
        if (!std::isfinite(nx) || !std::isfinite(ny)) break;
        const double step = std::max(std::fabs(nx - x), std::fabs(ny - y));
        x = nx;
        y = ny;
        if (step < 1e-8) return normalized_to_pixel(m, {x, y});
    }
    throw Error(ErrorKind::NonConvergence, "distortion inversion did not converge");
}

inline std::vector<Point2> undistort_points(const CameraModel& m, std::span<const Point2> points) {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(undistort_point(m, p));
    return out;
}

/// For each undistorted output pixel, the distorted source location.
inline RemapTable make_undistort_table(const CameraModel& m, Size size) {
    RemapTable table(size.width, size.height);
    parallel_rows(size.height, [&](int y0, int y1) {
        for (int v = y0; v < y1; ++v) {
            for (int u = 0; u < size.width; ++u) {
                const Point2 src = normalized_to_pixel(
                    m, distort_normalized(m, pixel_to_normalized(m, {static_cast<double>(u), static_cast<double>(v)})));
                table.set(u, v, src.x, src.y);
            }
        }
    });
    return table;
}

inline ImageBuffer undistort_image(const CameraModel& m, const ImageBuffer& img) {
    return remap(img, make_undistort_table(m, {img.width(), img.height()}));
}

inline Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d& r) {
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

inline Eigen::Matrix3d axis_angle_to_rotation(const Eigen::Vector3d& v) {
    const double angle = v.norm();
    if (angle < 1e-15) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

inline double reprojection_rms(const CameraModel& m, std::span<const ViewExtrinsics> extrinsics,
                               std::span<const ChessboardObservation> views) {
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        for (std::size_t i = 0; i < views[v].object_points.size(); ++i) {
            const Point2 p = project_point(m, extrinsics[v], views[v].object_points[i]);
            const Point2 d = p - views[v].image_points[i];
            sse += d.x * d.x + d.y * d.y;
            ++n;
        }
    }
    return n > 0 ? std::sqrt(sse / static_cast<double>(n)) : 0.0;
}

namespace detail {

inline void validate_views(std::span<const ChessboardObservation> views) {
    if (views.size() < 3) {
        throw Error(ErrorKind::InsufficientViews, "at least 3 views are required, got " + std::to_string(views.size()));
    }
    const auto& grid = views.front().object_points;
    for (const auto& v : views) {
        if (v.object_points.size() != v.image_points.size()) {
            throw Error(ErrorKind::DimensionMismatch, "object and image point counts differ");
        }
        if (v.object_points.size() < 4) throw Error(ErrorKind::DegenerateConfiguration, "view has fewer than 4 points");
        if (v.object_points != grid) {
            throw Error(ErrorKind::DegenerateConfiguration, "views must share the same object point grid");
        }
    }
}

// Row of the B-matrix constraint system for columns i, j of a homography.
inline Eigen::Matrix<double, 1, 6> zhang_row(const Eigen::Matrix3d& h, int i, int j) {
    Eigen::Matrix<double, 1, 6> v;
    v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j), h(1, i) * h(1, j),
        h(2, i) * h(0, j) + h(0, i) * h(2, j), h(2, i) * h(1, j) + h(1, i) * h(2, j), h(2, i) * h(2, j);
    return v;
}

inline ViewExtrinsics extrinsics_from_homography(const Eigen::Matrix3d& k_inv, const Eigen::Matrix3d& h) {
    const Eigen::Matrix3d a = k_inv * h;
    double scale = 1.0 / a.col(0).norm();
    if (scale * a(2, 2) < 0.0) scale = -scale;  // board must lie in front of the camera
    const Eigen::Vector3d r1 = scale * a.col(0);
    const Eigen::Vector3d r2 = scale * a.col(1);
    Eigen::Matrix3d q;
    q.col(0) = r1;
    q.col(1) = r2;
    q.col(2) = r1.cross(r2);
    // Nearest rotation in the Frobenius sense.
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) = -u.col(2);
        r = u * svd.matrixV().transpose();
    }
    return {r, scale * a.col(2)};
}

// Linear least squares for (k1, k2, k3, p1, p2) given fixed intrinsics and poses.
inline void estimate_distortion_linear(CameraModel& m, std::span<const ViewExtrinsics> extrinsics,
                                       std::span<const ChessboardObservation> views) {
    std::size_t n = 0;
    for (const auto& v : views) n += v.object_points.size();
    Eigen::MatrixXd a(2 * n, 5);
    Eigen::VectorXd rhs(2 * n);
    std::size_t row = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        for (std::size_t i = 0; i < views[v].object_points.size(); ++i) {
            const Point2 op = views[v].object_points[i];
            const Eigen::Vector3d pc =
                extrinsics[v].rotation * Eigen::Vector3d(op.x, op.y, 0.0) + extrinsics[v].translation;
            const double x = pc.x() / pc.z(), y = pc.y() / pc.z();
            const double r2 = x * x + y * y;
            const Point2 ideal = normalized_to_pixel(m, {x, y});
            const Point2 obs = views[v].image_points[i];
            // d(normalized x), d(normalized y) per coefficient.
            const double dx[5] = {x * r2, x * r2 * r2, x * r2 * r2 * r2, 2.0 * x * y, r2 + 2.0 * x * x};
            const double dy[5] = {y * r2, y * r2 * r2, y * r2 * r2 * r2, r2 + 2.0 * y * y, 2.0 * x * y};
            for (int c = 0; c < 5; ++c) {
                a(static_cast<Eigen::Index>(2 * row), c) = m.fx * dx[c] + m.skew * dy[c];
                a(static_cast<Eigen::Index>(2 * row + 1), c) = m.fy * dy[c];
            }
            rhs(static_cast<Eigen::Index>(2 * row)) = obs.x - ideal.x;
            rhs(static_cast<Eigen::Index>(2 * row + 1)) = obs.y - ideal.y;
            ++row;
        }
    }
    const Eigen::VectorXd d = a.colPivHouseholderQr().solve(rhs);
    if (!d.allFinite()) throw Error(ErrorKind::NumericalFailure, "distortion least squares failed");
    m.k1 = d(0);
    m.k2 = d(1);
    m.k3 = d(2);
    m.p1 = d(3);
    m.p2 = d(4);
}

}  // namespace detail

/// Closed-form planar calibration: per-view DLT homographies, intrinsics from
/// the B-matrix null vector, poses from K^-1 H, then linear distortion. The
/// result is not yet refined; see refine_reprojection.
inline CalibrationResult calibrate_zhang(std::span<const ChessboardObservation> views, Size image_size) {
    detail::validate_views(views);

    // Conditioning: work in image coordinates centred and scaled to ~[-1, 1].
    const double s = 0.5 * std::max(image_size.width, image_size.height);
    Eigen::Matrix3d norm;
    norm << 1.0 / s, 0.0, -0.5 * image_size.width / s, 0.0, 1.0 / s, -0.5 * image_size.height / s, 0.0, 0.0, 1.0;

    std::vector<Eigen::Matrix3d> homographies;
    homographies.reserve(views.size());
    Eigen::MatrixXd v(2 * static_cast<Eigen::Index>(views.size()), 6);
    for (std::size_t i = 0; i < views.size(); ++i) {
        const Homography h = estimate_homography_dlt(views[i].object_points, views[i].image_points);
        homographies.push_back(h.matrix());
        Eigen::Matrix3d hn = norm * h.matrix();
        hn /= hn.norm();
        const auto r = static_cast<Eigen::Index>(2 * i);
        v.row(r) = detail::zhang_row(hn, 0, 1);
        v.row(r + 1) = detail::zhang_row(hn, 0, 0) - detail::zhang_row(hn, 1, 1);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(4) / sv(0) < 1e-8) {
        throw Error(ErrorKind::DegenerateViews, "views do not constrain the intrinsics (parallel boards?)");
    }
    const Eigen::VectorXd b = svd.matrixV().col(5);
    const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4), b33 = b(5);

    const double den = b11 * b22 - b12 * b12;
    if (std::fabs(den) < 1e-300 || std::fabs(b11) < 1e-300) {
        throw Error(ErrorKind::NumericalFailure, "B matrix is not positive definite");
    }
    const double v0 = (b12 * b13 - b11 * b23) / den;
    const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    const double alpha2 = lambda / b11;
    const double beta2 = lambda * b11 / den;
    if (!(alpha2 > 0.0) || !(beta2 > 0.0)) {
        throw Error(ErrorKind::NumericalFailure, "closed-form intrinsics are not real");
    }
    const double alpha = std::sqrt(alpha2);
    const double beta = std::sqrt(beta2);
    const double gamma = -b12 * alpha2 * beta / lambda;
    const double u0 = gamma * v0 / beta - b13 * alpha2 / lambda;

    Eigen::Matrix3d kn;
    kn << alpha, gamma, u0, 0.0, beta, v0, 0.0, 0.0, 1.0;
    Eigen::Matrix3d k = norm.inverse() * kn;
    k /= k(2, 2);

    CalibrationResult result;
    CameraModel& m = result.model;
    m.fx = k(0, 0);
    m.fy = k(1, 1);
    m.cx = k(0, 2);
    m.cy = k(1, 2);
    m.skew = std::fabs(k(0, 1)) / m.fx < 1e-4 ? 0.0 : k(0, 1);
    m.image_width = image_size.width;
    m.image_height = image_size.height;
    if (!(m.fx > 0.0) || !(m.fy > 0.0) || !std::isfinite(m.cx) || !std::isfinite(m.cy)) {
        throw Error(ErrorKind::NumericalFailure, "recovered focal lengths are not positive");
    }

    const Eigen::Matrix3d k_inv = m.intrinsic_matrix().inverse();
    result.extrinsics.reserve(views.size());
    for (const auto& h : homographies) result.extrinsics.push_back(detail::extrinsics_from_homography(k_inv, h));

    detail::estimate_distortion_linear(m, result.extrinsics, views);
    result.rms_reprojection_error = reprojection_rms(m, result.extrinsics, views);
    if (!std::isfinite(result.rms_reprojection_error)) {
        throw Error(ErrorKind::NumericalFailure, "reprojection error is not finite");
    }
    return result;
}

namespace detail {

// Parameter layout: [fx fy cx cy k1 k2 k3 p1 p2 (skew)] then 6 per view (axis-angle, t).
struct LmLayout {
    bool with_skew = false;
    int intrinsic_count() const { return with_skew ? 10 : 9; }
};

inline Eigen::VectorXd pack(const CalibrationResult& r, const LmLayout& layout) {
    const int ni = layout.intrinsic_count();
    Eigen::VectorXd p(ni + 6 * static_cast<int>(r.extrinsics.size()));
    const CameraModel& m = r.model;
    p.head(9) << m.fx, m.fy, m.cx, m.cy, m.k1, m.k2, m.k3, m.p1, m.p2;
    if (layout.with_skew) p(9) = m.skew;
    for (std::size_t v = 0; v < r.extrinsics.size(); ++v) {
        const int o = ni + 6 * static_cast<int>(v);
        p.segment<3>(o) = rotation_to_axis_angle(r.extrinsics[v].rotation);
        p.segment<3>(o + 3) = r.extrinsics[v].translation;
    }
    return p;
}

inline CameraModel unpack_model(const Eigen::VectorXd& p, const LmLayout& layout, const CameraModel& base) {
    CameraModel m = base;
    m.fx = p(0);
    m.fy = p(1);
    m.cx = p(2);
    m.cy = p(3);
    m.k1 = p(4);
    m.k2 = p(5);
    m.k3 = p(6);
    m.p1 = p(7);
    m.p2 = p(8);
    m.skew = layout.with_skew ? p(9) : 0.0;
    return m;
}

inline ViewExtrinsics unpack_view(const Eigen::VectorXd& p, int offset) {
    return {axis_angle_to_rotation(p.segment<3>(offset)), p.segment<3>(offset + 3)};
}

// Residuals of one view written to out (2 per point). Points behind the
// camera produce a large finite penalty so LM rejects the step.
inline void view_residuals(const CameraModel& m, const ViewExtrinsics& ext, const ChessboardObservation& view,
                           double* out) {
    for (std::size_t i = 0; i < view.object_points.size(); ++i) {
        const Point2 op = view.object_points[i];
        const Eigen::Vector3d pc = ext.rotation * Eigen::Vector3d(op.x, op.y, 0.0) + ext.translation;
        if (!(pc.z() > 1e-9)) {
            out[2 * i] = 1e12;
            out[2 * i + 1] = 1e12;
            continue;
        }
        const Point2 uv = normalized_to_pixel(m, distort_normalized(m, {pc.x() / pc.z(), pc.y() / pc.z()}));
        out[2 * i] = uv.x - view.image_points[i].x;
        out[2 * i + 1] = uv.y - view.image_points[i].y;
    }
}

struct LmProblem {
    std::span<const ChessboardObservation> views;
    LmLayout layout;
    CameraModel base;
    std::vector<Eigen::Index> view_row;  // first residual row of each view
    Eigen::Index rows = 0;

    LmProblem(std::span<const ChessboardObservation> v, LmLayout l, const CameraModel& b)
        : views(v), layout(l), base(b) {
        for (const auto& view : views) {
            view_row.push_back(rows);
            rows += 2 * static_cast<Eigen::Index>(view.object_points.size());
        }
    }

    Eigen::VectorXd residuals(const Eigen::VectorXd& p) const {
        Eigen::VectorXd r(rows);
        const CameraModel m = unpack_model(p, layout, base);
        for (std::size_t v = 0; v < views.size(); ++v) {
            view_residuals(m, unpack_view(p, layout.intrinsic_count() + 6 * static_cast<int>(v)), views[v],
                           r.data() + view_row[v]);
        }
        return r;
    }

    // Central differences; pose columns only touch their own view's rows.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
        const int ni = layout.intrinsic_count();
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(rows, p.size());
        for (int c = 0; c < ni; ++c) {
            const double h = 1e-6 * std::max(1.0, std::fabs(p(c)));
            Eigen::VectorXd hi = p, lo = p;
            hi(c) += h;
            lo(c) -= h;
            j.col(c) = (residuals(hi) - residuals(lo)) / (2.0 * h);
        }
        const CameraModel m = unpack_model(p, layout, base);
        for (std::size_t v = 0; v < views.size(); ++v) {
            const int o = ni + 6 * static_cast<int>(v);
            const auto n = 2 * static_cast<Eigen::Index>(views[v].object_points.size());
            Eigen::VectorXd rh(n), rl(n);
            for (int k = 0; k < 6; ++k) {
                const double h = 1e-7 * std::max(1.0, std::fabs(p(o + k)));
                Eigen::VectorXd hi = p, lo = p;
                hi(o + k) += h;
                lo(o + k) -= h;
                view_residuals(m, unpack_view(hi, o), views[v], rh.data());
                view_residuals(m, unpack_view(lo, o), views[v], rl.data());
                j.block(view_row[v], o + k, n, 1) = (rh - rl) / (2.0 * h);
            }
        }
        return j;
    }
};

}  // namespace detail

/// Levenberg-Marquardt over intrinsics, distortion and per-view poses
/// (axis-angle rotations). Damping starts at 1e-3 and moves by x10 / /10 on
/// rejected / accepted steps; stops after 50 iterations or when the relative
/// cost decrease drops below 1e-10. Only cost-decreasing steps are accepted,
/// so the returned rms never exceeds the input rms.
inline CalibrationResult refine_reprojection(const CalibrationResult& initial,
                                             std::span<const ChessboardObservation> views) {
    detail::validate_views(views);
    if (initial.extrinsics.size() != views.size()) {
        throw Error(ErrorKind::DimensionMismatch, "extrinsics count does not match view count");
    }
    // A skew the linear stage already zeroed stays fixed at zero.
    const detail::LmLayout layout{initial.model.skew != 0.0};
    const detail::LmProblem problem(views, layout, initial.model);

    Eigen::VectorXd params = detail::pack(initial, layout);
    Eigen::VectorXd r = problem.residuals(params);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw Error(ErrorKind::NumericalFailure, "initial reprojection cost is not finite");

    double lambda = 1e-3;
    bool need_jacobian = true;
    bool any_solved = false;
    Eigen::MatrixXd jtj;
    Eigen::VectorXd jtr;
    for (int iter = 0; iter < 50; ++iter) {
        if (need_jacobian) {
            const Eigen::MatrixXd j = problem.jacobian(params);
            jtj = j.transpose() * j;
            jtr = j.transpose() * r;
            need_jacobian = false;
        }
        Eigen::MatrixXd damped = jtj;
        for (Eigen::Index d = 0; d < damped.rows(); ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
        const Eigen::VectorXd step = ldlt.solve(-jtr);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        any_solved = true;
        const Eigen::VectorXd candidate = params + step;
        const Eigen::VectorXd rc = problem.residuals(candidate);
        const double new_cost = rc.squaredNorm();
        if (std::isfinite(new_cost) && new_cost < cost) {
            const double rel = (cost - new_cost) / cost;
            params = candidate;
            r = rc;
            cost = new_cost;
            lambda /= 10.0;
            need_jacobian = true;
            if (rel < 1e-10) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
    }
    if (!any_solved && cost > 0.0) {
        throw Error(ErrorKind::NumericalFailure, "normal equations could not be solved at any damping");
    }

    CalibrationResult out;
    out.model = detail::unpack_model(params, layout, initial.model);
    const int ni = layout.intrinsic_count();
    for (std::size_t v = 0; v < views.size(); ++v) out.extrinsics.push_back(detail::unpack_view(params, ni + 6 * static_cast<int>(v)));
    out.rms_reprojection_error = reprojection_rms(out.model, out.extrinsics, views);
    // Repacking rotations can perturb the last bits; never report a worse fit.
    if (out.rms_reprojection_error > initial.rms_reprojection_error) return initial;
    return out;
}

}  // namespace lanekit
