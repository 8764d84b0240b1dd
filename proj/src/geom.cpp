#include "nocs/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nocs::geom {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kRadPerDeg = std::numbers::pi / 180.0;

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw InvalidInputError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw InvalidInputError("intrinsics: image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
        throw InvalidInputError("intrinsics: principal point outside the image");
}

Intrinsics Intrinsics::scaled(int new_width, int new_height) const {
    const double rx = static_cast<double>(new_width) / width;
    const double ry = static_cast<double>(new_height) / height;
    Intrinsics out = *this;
    out.fx = fx * rx;
    out.fy = fy * ry;
    out.cx = cx * rx;
    out.cy = cy * ry;
    out.width = new_width;
    out.height = new_height;
    out.validate();
    return out;
}

void SimilarityTransform::validate(double tol) const {
    if (!(s > 0.0)) throw InvalidInputError("similarity transform: scale must be positive");
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
        throw InvalidInputError("similarity transform: R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > tol)
        throw InvalidInputError("similarity transform: det(R) != +1");
}

std::array<Eigen::Vector3d, 8> OrientedBox3::corners() const {
    std::array<Eigen::Vector3d, 8> out;
    const Eigen::Vector3d h = 0.5 * extents;
    int k = 0;
    for (int ix : {-1, 1})
        for (int iy : {-1, 1})
            for (int iz : {-1, 1})
                out[k++] = center + R * Eigen::Vector3d(ix * h.x(), iy * h.y(), iz * h.z());
    return out;
}

void OrientedBox3::validate() const {
    if (!(extents.minCoeff() > 0.0))
        throw InvalidInputError("oriented box: extents must be positive");
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidInputError("oriented box: R is not orthonormal");
}

PointCloud backproject(const DepthMap& depth, const InstanceMask& mask,
                       const Intrinsics& intr, std::optional<uint8_t> instance_id) {
    intr.validate();
    if (!depth.same_size(intr.width, intr.height) || !mask.same_size(intr.width, intr.height))
        throw InvalidInputError("backproject: depth/mask dimensions do not match intrinsics");
    if (depth.channels != 1 || mask.channels != 1)
        throw InvalidInputError("backproject: depth and mask must be single-channel");

    PointCloud cloud;
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const uint8_t m = mask.at(x, y);
            if (instance_id ? (m != *instance_id) : (m == 0)) continue;
            const uint16_t d_mm = depth.at(x, y);
            if (d_mm == 0) continue;
            const double z = d_mm * 1e-3;
            cloud.points.push_back(intr.unproject(x, y, z));
            cloud.pixel_indices.push_back(y * depth.width + x);
        }
    }
    if (cloud.empty()) throw EmptyCloudError("backproject: no valid pixels selected");
    return cloud;
}

double rotation_error_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb) {
    const double c = clamp_unit(0.5 * ((ra.transpose() * rb).trace() - 1.0));
    return std::acos(c) * kDegPerRad;
}

double rotation_error_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb,
                          const CategorySpec& spec, std::optional<bool> handle_visible) {
    if (!spec.symmetric_for(handle_visible)) return rotation_error_deg(ra, rb);
    const Eigen::Vector3d axis = spec.symmetry_axis.normalized();
    const double c = clamp_unit((ra * axis).dot(rb * axis));
    return std::acos(c) * kDegPerRad;
}

double translation_error_cm(const Eigen::Vector3d& ta, const Eigen::Vector3d& tb) {
    return (ta - tb).norm() * 100.0;
}

double projection_error_2d_px(const SimilarityTransform& pose_a,
                              const SimilarityTransform& pose_b,
                              const PointCloud& model_pts, const Intrinsics& intr) {
    if (model_pts.empty())
        throw InvalidInputError("projection_error_2d: empty model point set");
    double sum = 0.0;
    for (const auto& p : model_pts.points) {
        const Eigen::Vector3d qa = pose_a.apply(p);
        const Eigen::Vector3d qb = pose_b.apply(p);
        if (qa.z() <= 0.0 || qb.z() <= 0.0)
            throw BehindCameraError("projection_error_2d: point behind camera");
        sum += (intr.project(qa) - intr.project(qb)).norm();
    }
    return sum / static_cast<double>(model_pts.size());
}

// ---------------------------------------------------------------------------
// Exact oriented-box intersection by clipping one box's polytope against
// the other's six face half-spaces.
// ---------------------------------------------------------------------------

namespace {

using Polygon = std::vector<Eigen::Vector3d>;

std::vector<Polygon> box_face_polygons(const OrientedBox3& b) {
    const Eigen::Vector3d h = 0.5 * b.extents;
    // Local-frame corners indexed by sign bits (x, y, z).
    auto corner = [&](int sx, int sy, int sz) -> Eigen::Vector3d {
        return b.center + b.R * Eigen::Vector3d(sx * h.x(), sy * h.y(), sz * h.z());
    };
    std::vector<Polygon> faces;
    faces.reserve(6);
    // Each face wound CCW viewed from outside.
    faces.push_back({corner(1, -1, -1), corner(1, 1, -1), corner(1, 1, 1), corner(1, -1, 1)});      // +x
    faces.push_back({corner(-1, -1, -1), corner(-1, -1, 1), corner(-1, 1, 1), corner(-1, 1, -1)});  // -x
    faces.push_back({corner(-1, 1, -1), corner(-1, 1, 1), corner(1, 1, 1), corner(1, 1, -1)});      // +y
    faces.push_back({corner(-1, -1, -1), corner(1, -1, -1), corner(1, -1, 1), corner(-1, -1, 1)});  // -y
    faces.push_back({corner(-1, -1, 1), corner(1, -1, 1), corner(1, 1, 1), corner(-1, 1, 1)});      // +z
    faces.push_back({corner(-1, -1, -1), corner(-1, 1, -1), corner(1, 1, -1), corner(1, -1, -1)});  // -z
    return faces;
}

/// Clip a convex polyhedron (as outward-wound faces) by n . x <= d,
/// sealing the cut with a cap polygon on the plane.
std::vector<Polygon> clip_polyhedron(const std::vector<Polygon>& faces,
                                     const Eigen::Vector3d& n, double d, double eps) {
    std::vector<Polygon> out;
    out.reserve(faces.size() + 1);
    std::vector<Eigen::Vector3d> cap_points;
    bool any_clipped = false;

    for (const auto& poly : faces) {
        Polygon kept;
        kept.reserve(poly.size() + 2);
        const size_t m = poly.size();
        for (size_t i = 0; i < m; ++i) {
            const Eigen::Vector3d& a = poly[i];
            const Eigen::Vector3d& b = poly[(i + 1) % m];
            const double da = n.dot(a) - d;
            const double db = n.dot(b) - d;
            const bool ina = da <= eps;
            const bool inb = db <= eps;
            if (ina) kept.push_back(a);
            if (ina != inb) {
                const double t = da / (da - db);
                const Eigen::Vector3d x = a + t * (b - a);
                kept.push_back(x);
                cap_points.push_back(x);
                any_clipped = true;
            }
        }
        if (!any_clipped && kept.size() != m) any_clipped = true;
        if (kept.size() >= 3) out.push_back(std::move(kept));
    }

    if (any_clipped && cap_points.size() >= 3) {
        // Deduplicate and order the cut points around their centroid.
        Eigen::Vector3d u = n.unitOrthogonal();
        Eigen::Vector3d v = n.cross(u);
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        for (const auto& p : cap_points) c += p;
        c /= static_cast<double>(cap_points.size());

        std::vector<std::pair<double, Eigen::Vector3d>> ordered;
        ordered.reserve(cap_points.size());
        for (const auto& p : cap_points)
            ordered.emplace_back(std::atan2(v.dot(p - c), u.dot(p - c)), p);
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        Polygon cap;
        for (const auto& [ang, p] : ordered) {
            if (cap.empty() || (p - cap.back()).norm() > eps) cap.push_back(p);
        }
        if (cap.size() >= 2 && (cap.front() - cap.back()).norm() <= eps) cap.pop_back();
        // (u, v, n) is right-handed, so the ascending-angle walk already
        // winds CCW about +n, the cap's outward side.
        if (cap.size() >= 3) out.push_back(std::move(cap));
    }
    return out;
}

double polyhedron_volume(const std::vector<Polygon>& faces) {
    double six_v = 0.0;
    for (const auto& poly : faces) {
        for (size_t i = 1; i + 1 < poly.size(); ++i)
            six_v += poly[0].dot(poly[i].cross(poly[i + 1]));
    }
    return six_v / 6.0;
}

}  // namespace

namespace detail {

double box_intersection_volume(const OrientedBox3& a, const OrientedBox3& b) {
    const double scale = std::max(a.extents.maxCoeff(), b.extents.maxCoeff());
    const double eps = 1e-12 * std::max(scale, 1.0);
    std::vector<Polygon> poly = box_face_polygons(a);
    const Eigen::Vector3d hb = 0.5 * b.extents;
    for (int axis = 0; axis < 3 && !poly.empty(); ++axis) {
        const Eigen::Vector3d n = b.R.col(axis);
        poly = clip_polyhedron(poly, n, n.dot(b.center) + hb[axis], eps);
        if (poly.empty()) break;
        poly = clip_polyhedron(poly, -n, -n.dot(b.center) + hb[axis], eps);
    }
    if (poly.empty()) return 0.0;
    const double v = polyhedron_volume(poly);
    return std::clamp(v, 0.0, std::min(a.volume(), b.volume()));
}

}  // namespace detail

double box_iou(const OrientedBox3& a, const OrientedBox3& b) {
    a.validate();
    b.validate();
    // Cheap separation bound: beyond the sum of half-diagonals the boxes
    // cannot touch.
    const double r = 0.5 * (a.extents.norm() + b.extents.norm());
    if ((a.center - b.center).squaredNorm() > r * r) return 0.0;
    const double inter = detail::box_intersection_volume(a, b);
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double box_iou(const OrientedBox3& a, const OrientedBox3& b, const CategorySpec& spec,
               std::optional<bool> handle_visible, double angular_step_deg) {
    if (!spec.symmetric_for(handle_visible)) return box_iou(a, b);
    if (!(angular_step_deg > 0.0))
        throw InvalidInputError("box_iou: angular step must be positive");
    const Eigen::Vector3d axis = spec.symmetry_axis.normalized();
    double best = 0.0;
    for (double theta = 0.0; theta < 360.0 - 0.5 * angular_step_deg;
         theta += angular_step_deg) {
        OrientedBox3 rotated = a;
        rotated.R = a.R * Eigen::AngleAxisd(theta * kRadPerDeg, axis).toRotationMatrix();
        best = std::max(best, box_iou(rotated, b));
    }
    return best;
}

}  // namespace nocs::geom
