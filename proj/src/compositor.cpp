#include "nocs/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "nocs/random.hpp"

namespace nocs::compositor {

namespace {

constexpr double kRadPerDeg = std::numbers::pi / 180.0;

// --- 2D helpers (coordinates in a plane basis) ----------------------------

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
              const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Andrew monotone chain; returns the hull CCW.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) { return a == b; }),
              pts.end());
    const size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Eigen::Vector2d> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
    double twice = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % n];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::abs(twice);
}

bool point_in_convex(const std::vector<Eigen::Vector2d>& poly,
                     const Eigen::Vector2d& p, double eps) {
    const size_t n = poly.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        if (cross2(poly[i], poly[(i + 1) % n], p) < -eps) return false;
    }
    return true;
}

/// Clip subject polygon (convex, CCW) by convex CCW clip polygon.
std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
    std::vector<Eigen::Vector2d> out = subject;
    const size_t n = clip.size();
    for (size_t i = 0; i < n && !out.empty(); ++i) {
        const Eigen::Vector2d a = clip[i];
        const Eigen::Vector2d b = clip[(i + 1) % n];
        std::vector<Eigen::Vector2d> kept;
        kept.reserve(out.size() + 2);
        const size_t m = out.size();
        for (size_t k = 0; k < m; ++k) {
            const Eigen::Vector2d& p = out[k];
            const Eigen::Vector2d& q = out[(k + 1) % m];
            const double dp = cross2(a, b, p);
            const double dq = cross2(a, b, q);
            if (dp >= 0.0) kept.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                const double t = dp / (dp - dq);
                kept.push_back(p + t * (q - p));
            }
        }
        out = std::move(kept);
    }
    return out;
}

/// Uniform sample inside a convex CCW polygon via its triangle fan.
Eigen::Vector2d sample_in_polygon(const std::vector<Eigen::Vector2d>& poly, Rng& rng) {
    std::vector<double> cum;
    cum.reserve(poly.size() - 2);
    double total = 0.0;
    for (size_t i = 1; i + 1 < poly.size(); ++i) {
        total += 0.5 * std::abs(cross2(poly[0], poly[i], poly[i + 1]));
        cum.push_back(total);
    }
    const double r = uniform01(rng) * total;
    size_t tri = std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
    tri = std::min(tri, cum.size() - 1);
    const Eigen::Vector2d& a = poly[0];
    const Eigen::Vector2d& b = poly[tri + 1];
    const Eigen::Vector2d& c = poly[tri + 2];
    const double su = std::sqrt(uniform01(rng));
    const double v = uniform01(rng);
    return (1.0 - su) * a + su * (1.0 - v) * b + su * v * c;
}

struct PlaneFit {
    Eigen::Vector3d normal;
    double d = 0.0;
};

PlaneFit refine_plane(std::span<const Eigen::Vector3d> pts, std::span<const int> subset) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i : subset) centroid += pts[i];
    centroid /= static_cast<double>(subset.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (int i : subset) {
        const Eigen::Vector3d q = pts[i] - centroid;
        scatter += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    PlaneFit fit;
    fit.normal = eig.eigenvectors().col(0).normalized();  // smallest eigenvalue
    fit.d = fit.normal.dot(centroid);
    return fit;
}

}  // namespace

std::vector<PlaneModel> detect_planes(const DepthMap& depth, const geom::Intrinsics& intr,
                                      const PlaneDetectConfig& cfg) {
    intr.validate();
    if (!depth.same_size(intr.width, intr.height))
        throw InvalidInputError("detect_planes: depth does not match intrinsics");
    if (cfg.subsample_stride < 1 || cfg.min_support < 3)
        throw InvalidInputError("detect_planes: bad configuration");

    std::vector<Eigen::Vector3d> pts;
    std::vector<int> pixels;
    for (int y = 0; y < depth.height; y += cfg.subsample_stride) {
        for (int x = 0; x < depth.width; x += cfg.subsample_stride) {
            const uint16_t d_mm = depth.at(x, y);
            if (d_mm == 0) continue;
            pts.push_back(intr.unproject(x, y, d_mm * 1e-3));
            pixels.push_back(y * depth.width + x);
        }
    }

    Rng rng(cfg.rng_seed);
    std::vector<int> remaining(pts.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<PlaneModel> planes;
    const Eigen::Vector3d up = cfg.up_axis.normalized();
    const double min_up_dot = std::cos(cfg.max_tilt_deg * kRadPerDeg);

    while (static_cast<int>(planes.size()) < cfg.max_planes &&
           static_cast<int>(remaining.size()) >= cfg.min_support) {
        int best_count = 0;
        PlaneFit best{};
        for (int iter = 0; iter < cfg.ransac_iterations; ++iter) {
            const Eigen::Vector3d& a = pts[remaining[uniform_index(rng, remaining.size())]];
            const Eigen::Vector3d& b = pts[remaining[uniform_index(rng, remaining.size())]];
            const Eigen::Vector3d& c = pts[remaining[uniform_index(rng, remaining.size())]];
            Eigen::Vector3d n = (b - a).cross(c - a);
            const double len = n.norm();
            if (len < 1e-12) continue;
            n /= len;
            const double d = n.dot(a);
            int count = 0;
            for (int i : remaining)
                if (std::abs(n.dot(pts[i]) - d) < cfg.distance_threshold_m) ++count;
            if (count > best_count) {
                best_count = count;
                best = {n, d};
            }
        }
        if (best_count < cfg.min_support) break;

        // Refit on the consensus set, then recollect.
        std::vector<int> inliers;
        for (int i : remaining)
            if (std::abs(best.normal.dot(pts[i]) - best.d) < cfg.distance_threshold_m)
                inliers.push_back(i);
        const PlaneFit refined = refine_plane(pts, inliers);
        inliers.clear();
        for (int i : remaining)
            if (std::abs(refined.normal.dot(pts[i]) - refined.d) < cfg.distance_threshold_m)
                inliers.push_back(i);
        if (static_cast<int>(inliers.size()) < cfg.min_support) break;

        // Remove the surface from further rounds whether or not it is kept.
        std::vector<char> is_inlier(pts.size(), 0);
        for (int i : inliers) is_inlier[i] = 1;
        std::erase_if(remaining, [&](int i) { return is_inlier[i] != 0; });

        PlaneModel plane;
        plane.normal = refined.normal;
        plane.d = refined.d;
        if (plane.d > 0.0) {  // orient toward the camera at the origin
            plane.normal = -plane.normal;
            plane.d = -plane.d;
        }
        // Supporting surfaces only: normals within 30 degrees of horizontal
        // (relative to the configured up axis) are walls or grazing planes.
        if (std::abs(plane.normal.dot(up)) < min_up_dot) continue;
        if (plane.normal.dot(up) < 0.0) {
            // keep the normal on the up side so placements rise off the plane
            plane.normal = -plane.normal;
            plane.d = -plane.d;
        }

        plane.basis_u = plane.normal.unitOrthogonal();
        plane.basis_v = plane.normal.cross(plane.basis_u);
        std::vector<Eigen::Vector2d> proj;
        proj.reserve(inliers.size());
        for (int i : inliers) {
            plane.inlier_pixels.push_back(pixels[i]);
            proj.push_back(plane.to_plane(pts[i]));
        }
        const auto hull2 = convex_hull(std::move(proj));
        if (hull2.size() < 3) continue;
        plane.area = polygon_area(hull2);
        for (const auto& h : hull2)
            plane.hull.push_back(h.x() * plane.basis_u + h.y() * plane.basis_v +
                                 plane.d * plane.normal);
        planes.push_back(std::move(plane));
    }

    if (planes.empty()) throw NoPlaneFoundError("detect_planes: no plane reached min support");
    std::stable_sort(planes.begin(), planes.end(), [](const auto& a, const auto& b) {
        return a.inlier_pixels.size() > b.inlier_pixels.size();
    });
    return planes;
}

PlacementResult sample_placements(
    const std::vector<PlaneModel>& planes,
    const std::vector<std::shared_ptr<const canonical::CanonicalMesh>>& meshes,
    const PlacementConfig& cfg) {
    if (planes.empty()) throw InvalidInputError("sample_placements: no planes given");
    if (meshes.empty()) throw InvalidInputError("sample_placements: no meshes given");
    for (const auto& p : planes)
        if (p.hull.size() < 3 || !(p.area > 0.0))
            throw InvalidInputError("sample_placements: plane without a support polygon");
    if (!cfg.per_mesh_scale_range.empty() &&
        cfg.per_mesh_scale_range.size() != meshes.size())
        throw InvalidInputError("sample_placements: per-mesh scale range size mismatch");

    Rng rng(cfg.rng_seed);
    std::vector<double> area_cum;
    double total_area = 0.0;
    for (const auto& p : planes) {
        total_area += p.area;
        area_cum.push_back(total_area);
    }

    // Precompute each plane's hull in its own 2D basis.
    std::vector<std::vector<Eigen::Vector2d>> hulls2(planes.size());
    for (size_t i = 0; i < planes.size(); ++i)
        for (const auto& h : planes[i].hull) hulls2[i].push_back(planes[i].to_plane(h));

    PlacementResult result;
    std::vector<std::vector<Eigen::Vector2d>> accepted_footprints;
    std::vector<double> accepted_areas;

    for (int k = 0; k < cfg.count; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
            const double r = uniform01(rng) * total_area;
            size_t pi = std::lower_bound(area_cum.begin(), area_cum.end(), r) - area_cum.begin();
            pi = std::min(pi, planes.size() - 1);
            const PlaneModel& plane = planes[pi];

            const size_t mi = uniform_index(rng, meshes.size());
            const canonical::CanonicalMesh& mesh = *meshes[mi];
            const auto range = cfg.per_mesh_scale_range.empty() ? cfg.scale_range_m
                                                                : cfg.per_mesh_scale_range[mi];
            const double scale = uniform(rng, range[0], range[1]);
            const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);

            const Eigen::Vector2d spot2 = sample_in_polygon(hulls2[pi], rng);
            const Eigen::Vector3d spot = spot2.x() * plane.basis_u +
                                         spot2.y() * plane.basis_v +
                                         plane.d * plane.normal;

            geom::SimilarityTransform pose;
            pose.s = scale;
            const Eigen::Quaterniond align =
                Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitY(), plane.normal);
            pose.R = (Eigen::AngleAxisd(yaw, plane.normal) * align).toRotationMatrix();
            pose.t = spot - pose.s * (pose.R * Eigen::Vector3d::Constant(0.5));

            // Drop the object onto the plane: lowest vertex at the plane level.
            double lowest = std::numeric_limits<double>::infinity();
            for (const auto& v : mesh.mesh.vertices)
                lowest = std::min(lowest, plane.normal.dot(pose.apply(v)));
            pose.t += (plane.d - lowest) * plane.normal;

            // Footprint: projected corners of the canonical bounding box.
            geom::OrientedBox3 box;
            box.center = pose.apply(Eigen::Vector3d::Constant(0.5));
            box.R = pose.R;
            box.extents = pose.s * mesh.nocs_extents;
            std::vector<Eigen::Vector2d> corners2;
            for (const auto& c : box.corners()) corners2.push_back(plane.to_plane(c));
            const auto footprint = convex_hull(std::move(corners2));
            if (footprint.size() < 3) continue;

            bool inside = true;
            for (const auto& c : footprint)
                inside = inside && point_in_convex(hulls2[pi], c, 1e-9);
            if (!inside) continue;

            const double fp_area = polygon_area(footprint);
            bool overlaps = false;
            for (size_t f = 0; f < accepted_footprints.size() && !overlaps; ++f) {
                const auto inter = clip_convex(footprint, accepted_footprints[f]);
                if (inter.size() >= 3) {
                    const double ratio = polygon_area(inter) /
                                         std::min(fp_area, accepted_areas[f]);
                    overlaps = ratio > cfg.max_footprint_overlap;
                }
            }
            if (overlaps) continue;

            Placement placement;
            placement.mesh_index = static_cast<int>(mi);
            placement.plane_index = static_cast<int>(pi);
            placement.pose = pose;
            result.placements.push_back(placement);
            accepted_footprints.push_back(footprint);
            accepted_areas.push_back(fp_area);
            placed = true;
        }
        if (!placed) result.complete = false;
    }
    return result;
}

CompositeResult composite(const Background& background,
                          std::span<const render::SceneInstance> instances,
                          const geom::Intrinsics& intr,
                          const render::RenderOptions& options) {
    intr.validate();
    if (!background.depth.same_size(intr.width, intr.height) ||
        !background.rgb.same_size(intr.width, intr.height) || background.rgb.channels != 3)
        throw InvalidInputError("composite: background does not match intrinsics");

    render::RenderOutput rend = render::render_scene(instances, intr, options);

    CompositeResult out;
    out.rgb = background.rgb;
    out.depth = background.depth;
    out.nocs = NocsMap(intr.width, intr.height);
    out.mask = InstanceMask(intr.width, intr.height, 1, 0);

    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const uint8_t id = rend.mask.at(x, y);
            if (id == 0) continue;
            const uint16_t rd = rend.depth.at(x, y);
            const uint16_t bd = background.depth.at(x, y);
            if (bd != 0 && rd >= bd) continue;  // occluded by the real surface
            out.mask.at(x, y) = id;
            out.depth.at(x, y) = rd;
            out.nocs.set_value(x, y, rend.nocs.value(x, y));
            out.nocs.set_valid(x, y, true);
            for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = rend.rgb.at(x, y, c);
        }
    }

    for (const auto& inst : instances) {
        io::SceneMetadata::Instance meta;
        meta.class_id = inst.class_id;
        meta.instance_id = inst.instance_id;
        meta.mesh_path = inst.mesh_path;
        meta.pose = inst.pose;
        meta.nocs_extents = inst.mesh->nocs_extents;
        meta.dimensions = inst.pose.s * inst.mesh->nocs_extents;
        meta.handle_visible = inst.handle_visible;
        if (!inst.mesh->mesh.handle_triangles.empty())
            meta.handle_visible = render::handle_visibility(inst, out.mask, intr);
        out.meta.instances.push_back(std::move(meta));
    }
    out.meta.intrinsics = intr;
    return out;
}

}  // namespace nocs::compositor
