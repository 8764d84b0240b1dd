#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nocs/category.hpp"
#include "nocs/error.hpp"
#include "nocs/image.hpp"

namespace nocs::geom {

/// Pinhole camera, no distortion. Pixel (u,v) with u along +x.
struct Intrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;

    Eigen::Vector2d project(const Eigen::Vector3d& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }
    Eigen::Vector3d unproject(double u, double v, double z) const {
        return {(u - cx) / fx * z, (v - cy) / fy * z, z};
    }
    Intrinsics scaled(int new_width, int new_height) const;
};

/// Uniform-scale rigid transform p -> s * R * p + t.
struct SimilarityTransform {
    double s = 1.0;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return s * (R * p) + t; }

    SimilarityTransform inverse() const {
        SimilarityTransform out;
        out.s = 1.0 / s;
        out.R = R.transpose();
        out.t = -(out.s) * (out.R * t);
        return out;
    }

    /// this after other: (*this) * other maps p -> this(other(p)).
    SimilarityTransform operator*(const SimilarityTransform& other) const {
        SimilarityTransform out;
        out.s = s * other.s;
        out.R = R * other.R;
        out.t = s * (R * other.t) + t;
        return out;
    }

    bool is_valid(double tol = 1e-9) const {
        return s > 0.0 &&
               (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
               std::abs(R.determinant() - 1.0) <= tol;
    }
    void validate(double tol = 1e-9) const;
};

/// Box with full side lengths `extents` along its local axes.
struct OrientedBox3 {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d extents = Eigen::Vector3d::Ones();

    double volume() const { return extents.prod(); }
    std::array<Eigen::Vector3d, 8> corners() const;
    void validate() const;
};

/// 3D points, optionally tagged with the source pixel (y * width + x)
/// so depth and NOCS samples of the same pixel can be paired.
struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    std::vector<int> pixel_indices;  // empty, or same length as points

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Lift masked depth pixels to camera-space meters.
/// instance_id selects one mask id; nullopt selects every nonzero pixel.
PointCloud backproject(const DepthMap& depth, const InstanceMask& mask,
                       const Intrinsics& intr,
                       std::optional<uint8_t> instance_id = {});

/// Geodesic angle between rotations, degrees.
double rotation_error_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb);

/// Symmetry-aware rotation error: for symmetric instances rotation about
/// the category axis carries no penalty (angle between mapped axes).
double rotation_error_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb,
                          const CategorySpec& spec,
                          std::optional<bool> handle_visible = {});

double translation_error_cm(const Eigen::Vector3d& ta, const Eigen::Vector3d& tb);

/// Mean 2D distance in pixels between the projections of model_pts under
/// two poses. Throws BehindCameraError if any point lands at z <= 0.
double projection_error_2d_px(const SimilarityTransform& pose_a,
                              const SimilarityTransform& pose_b,
                              const PointCloud& model_pts,
                              const Intrinsics& intr);

/// Exact intersection-over-union of two oriented boxes (half-space
/// clipping of one box's polytope against the other's faces).
double box_iou(const OrientedBox3& a, const OrientedBox3& b);

/// Symmetry-aware IoU: for symmetric instances, the maximum over
/// rotations of `a` about its own symmetry axis, swept at angular_step.
double box_iou(const OrientedBox3& a, const OrientedBox3& b,
               const CategorySpec& spec,
               std::optional<bool> handle_visible = {},
               double angular_step_deg = 1.0);

namespace detail {
/// Exact volume of box `a` clipped to box `b` (exposed for tests).
double box_intersection_volume(const OrientedBox3& a, const OrientedBox3& b);
}  // namespace detail

}  // namespace nocs::geom
