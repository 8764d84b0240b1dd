#include "nocs/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace nocs::render {

namespace {

constexpr double kZNear = 1e-6;

struct ScreenVertex {
    Eigen::Vector2d px;   // pixel coordinates
    double z = 0.0;       // camera-space depth
    Eigen::Vector3d attr; // NOCS coordinate
};

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                const Eigen::Vector2d& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Top-left fill rule for the positive-area orientation used below
// (y grows downward): a boundary pixel belongs to the triangle whose
// edge is horizontal-going-left or pointing downward.
bool is_top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const double dx = b.x() - a.x();
    const double dy = b.y() - a.y();
    return (dy == 0.0 && dx < 0.0) || dy > 0.0;
}

struct ShadePalette {
    // Albedo keyed by class id; wraps around for ids beyond the table.
    static Eigen::Vector3d albedo(int class_id) {
        static const Eigen::Vector3d table[] = {
            {0.85, 0.35, 0.30}, {0.30, 0.65, 0.85}, {0.40, 0.80, 0.40},
            {0.85, 0.70, 0.25}, {0.60, 0.45, 0.80}, {0.85, 0.50, 0.65},
            {0.50, 0.70, 0.70}, {0.70, 0.70, 0.45},
        };
        const int n = static_cast<int>(std::size(table));
        int k = class_id % n;
        if (k < 0) k += n;
        return table[k];
    }
};

struct RasterTarget {
    std::vector<double>* zbuf = nullptr;
    NocsMap* nocs = nullptr;
    InstanceMask* mask = nullptr;
    Image<uint8_t>* rgb = nullptr;
    uint8_t instance_id = 0;
    Eigen::Vector3d albedo = Eigen::Vector3d::Ones();
    Eigen::Vector3d light = Eigen::Vector3d(0, 0, 1);
    double ambient = 0.35;
};

void rasterize_triangle(const ScreenVertex& v0, const ScreenVertex& v1,
                        const ScreenVertex& v2, const Eigen::Vector3d& face_normal,
                        int width, int height, const RasterTarget& tgt) {
    ScreenVertex a = v0, b = v1, c = v2;
    double area = orient2d(a.px, b.px, c.px);
    if (area == 0.0) return;  // projects to a line
    if (area < 0.0) {
        std::swap(b, c);  // normalize winding; back faces are kept
        area = -area;
    }

    const double min_x = std::min({a.px.x(), b.px.x(), c.px.x()});
    const double max_x = std::max({a.px.x(), b.px.x(), c.px.x()});
    const double min_y = std::min({a.px.y(), b.px.y(), c.px.y()});
    const double max_y = std::max({a.px.y(), b.px.y(), c.px.y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(max_x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(max_y - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    const bool tl0 = is_top_left(b.px, c.px);
    const bool tl1 = is_top_left(c.px, a.px);
    const bool tl2 = is_top_left(a.px, b.px);

    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Eigen::Vector2d p(x + 0.5, y + 0.5);
            const double w0 = orient2d(b.px, c.px, p);
            const double w1 = orient2d(c.px, a.px, p);
            const double w2 = orient2d(a.px, b.px, p);
            const bool inside = (w0 > 0.0 || (w0 == 0.0 && tl0)) &&
                                (w1 > 0.0 || (w1 == 0.0 && tl1)) &&
                                (w2 > 0.0 || (w2 == 0.0 && tl2));
            if (!inside) continue;

            const double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
            // Perspective-correct interpolation via 1/z.
            const double inv_z = l0 / a.z + l1 / b.z + l2 / c.z;
            const double z = 1.0 / inv_z;
            double& zref = (*tgt.zbuf)[static_cast<size_t>(y) * width + x];
            if (z >= zref) continue;
            zref = z;

            if (tgt.nocs) {
                const Eigen::Vector3d attr =
                    (l0 * a.attr / a.z + l1 * b.attr / b.z + l2 * c.attr / c.z) * z;
                tgt.nocs->set_value(x, y, attr.cwiseMax(0.0).cwiseMin(1.0));
                tgt.nocs->set_valid(x, y, true);
            }
            if (tgt.mask) tgt.mask->at(x, y) = tgt.instance_id;
            if (tgt.rgb) {
                const double diffuse = std::max(0.0, face_normal.dot(-tgt.light));
                const double lum = tgt.ambient + (1.0 - tgt.ambient) * diffuse;
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = 255.0 * std::clamp(tgt.albedo[ch] * lum, 0.0, 1.0);
                    tgt.rgb->at(x, y, ch) = static_cast<uint8_t>(std::lround(v));
                }
            }
        }
    }
}

void rasterize_instance(const SceneInstance& inst, const geom::Intrinsics& intr,
                        std::span<const int> triangle_subset, RasterTarget tgt) {
    const canonical::Mesh& mesh = inst.mesh->mesh;
    std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
    std::vector<ScreenVertex> screen(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        cam[i] = inst.pose.apply(mesh.vertices[i]);
        if (cam[i].z() > kZNear) {
            screen[i].px = intr.project(cam[i]);
            screen[i].z = cam[i].z();
            screen[i].attr = mesh.vertices[i];
        }
    }

    auto raster_one = [&](int ti) {
        const auto& tri = mesh.triangles[ti];
        const Eigen::Vector3d& p0 = cam[tri[0]];
        const Eigen::Vector3d& p1 = cam[tri[1]];
        const Eigen::Vector3d& p2 = cam[tri[2]];
        if (p0.z() <= kZNear || p1.z() <= kZNear || p2.z() <= kZNear) return;
        Eigen::Vector3d n = (p1 - p0).cross(p2 - p0);
        const double len = n.norm();
        if (len <= 0.0) return;
        n /= len;
        if (n.dot(p0) > 0.0) n = -n;  // face the camera
        rasterize_triangle(screen[tri[0]], screen[tri[1]], screen[tri[2]], n,
                           intr.width, intr.height, tgt);
    };

    if (triangle_subset.empty()) {
        for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) raster_one(ti);
    } else {
        for (int ti : triangle_subset) raster_one(ti);
    }
}

}  // namespace

RenderOutput render_scene(std::span<const SceneInstance> instances,
                          const geom::Intrinsics& intr, const RenderOptions& options) {
    intr.validate();
    std::set<int> seen_ids;
    for (const auto& inst : instances) {
        if (!inst.mesh) throw InvalidInputError("render: instance without mesh");
        inst.pose.validate();
        if (inst.instance_id == 0)
            throw InvalidInputError("render: instance id must be positive");
        if (!seen_ids.insert(inst.instance_id).second)
            throw InvalidInputError("render: duplicate instance id in scene");
    }

    RenderOutput out;
    out.nocs = NocsMap(intr.width, intr.height);
    out.depth = DepthMap(intr.width, intr.height, 1, 0);
    out.mask = InstanceMask(intr.width, intr.height, 1, 0);
    out.rgb = Image<uint8_t>(intr.width, intr.height, 3, 0);

    std::vector<double> zbuf(out.nocs.pixel_count(),
                             std::numeric_limits<double>::infinity());
    const Eigen::Vector3d light = options.light_dir.normalized();

    for (const auto& inst : instances) {
        RasterTarget tgt;
        tgt.zbuf = &zbuf;
        tgt.nocs = &out.nocs;
        tgt.mask = &out.mask;
        tgt.rgb = &out.rgb;
        tgt.instance_id = inst.instance_id;
        tgt.albedo = ShadePalette::albedo(inst.class_id);
        tgt.light = light;
        tgt.ambient = options.ambient;
        rasterize_instance(inst, intr, {}, tgt);
    }

    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const double z = zbuf[static_cast<size_t>(y) * intr.width + x];
            if (!std::isfinite(z)) continue;
            const long mm = std::lround(z * 1000.0);
            out.depth.at(x, y) =
                static_cast<uint16_t>(std::clamp<long>(mm, 1, 65535));
        }
    }
    return out;
}

bool handle_visibility(const SceneInstance& instance, const InstanceMask& mask,
                       const geom::Intrinsics& intr,
                       std::span<const int> handle_triangles, int min_pixels) {
    if (!instance.mesh) throw InvalidInputError("handle_visibility: instance without mesh");
    std::span<const int> handle = handle_triangles;
    if (handle.empty()) handle = instance.mesh->mesh.handle_triangles;
    if (handle.empty())
        throw NotApplicableError("handle_visibility: mesh carries no handle tag");
    if (!mask.same_size(intr.width, intr.height))
        throw InvalidInputError("handle_visibility: mask does not match intrinsics");

    // Private z-buffer of the whole instance, then test where the handle
    // submesh is the front surface.
    std::vector<double> zbuf(static_cast<size_t>(intr.width) * intr.height,
                             std::numeric_limits<double>::infinity());
    RasterTarget whole;
    whole.zbuf = &zbuf;
    rasterize_instance(instance, intr, {}, whole);

    std::vector<double> zhandle(zbuf.size(), std::numeric_limits<double>::infinity());
    RasterTarget handle_only;
    handle_only.zbuf = &zhandle;
    rasterize_instance(instance, intr, handle, handle_only);

    int visible = 0;
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const size_t i = static_cast<size_t>(y) * intr.width + x;
            if (!std::isfinite(zhandle[i])) continue;
            if (mask.at(x, y) != instance.instance_id) continue;  // occluded by others
            if (zhandle[i] <= zbuf[i] + 1e-9) ++visible;          // front surface here
            if (visible >= min_pixels) return true;
        }
    }
    return visible >= min_pixels;
}

}  // namespace nocs::render
