#include <doctest.h>

#include <numbers>

#include "nocs/canonical.hpp"
#include "nocs/io.hpp"
#include "nocs/random.hpp"
#include "nocs/render.hpp"
#include "test_support.hpp"

using namespace nocs;
using render::RenderOutput;
using render::SceneInstance;

namespace {

geom::Intrinsics vga() {
    geom::Intrinsics intr;
    intr.fx = intr.fy = 577.5;
    intr.cx = 319.5;
    intr.cy = 239.5;
    intr.width = 640;
    intr.height = 480;
    return intr;
}

SceneInstance make_instance(const canonical::Mesh& mesh, const geom::SimilarityTransform& pose,
                            uint8_t id = 1, int class_id = 1) {
    SceneInstance inst;
    inst.mesh = std::make_shared<canonical::CanonicalMesh>(canonical::canonicalize(mesh));
    inst.pose = pose;
    inst.instance_id = id;
    inst.class_id = class_id;
    return inst;
}

geom::SimilarityTransform facing_pose(double s, double z,
                                      const Eigen::Matrix3d& r = Eigen::Matrix3d::Identity()) {
    geom::SimilarityTransform pose;
    pose.s = s;
    pose.R = r;
    // put the NOCS center on the optical axis at depth z
    pose.t = Eigen::Vector3d(0, 0, z) - pose.s * (pose.R * Eigen::Vector3d::Constant(0.5));
    return pose;
}

}  // namespace

TEST_CASE("empty scene renders all background") {
    const auto out = render::render_scene({}, vga());
    for (auto v : out.mask.data) CHECK(v == 0);
    for (auto v : out.depth.data) CHECK(v == 0);
    for (auto v : out.nocs.valid) CHECK(v == 0);
}

TEST_CASE("single triangle interpolates NOCS barycentrically") {
    // One triangle directly constructed in NOCS space, fronto-parallel at 1 m.
    canonical::Mesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.triangles = {{0, 1, 2}};

    SceneInstance inst;
    auto canon = std::make_shared<canonical::CanonicalMesh>();
    canon->mesh = tri;  // already inside the unit cube; no normalization here
    canon->nocs_extents = {1, 1, 0};
    canon->source_scale = 1;
    inst.mesh = canon;
    inst.instance_id = 1;
    inst.pose.s = 0.4;
    inst.pose.t = {-0.2, -0.2, 1.0};

    const geom::Intrinsics intr = vga();
    const auto out = render::render_scene({&inst, 1}, intr);

    long covered = 0;
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            if (out.mask.at(x, y) == 0) continue;
            ++covered;
            // Everything is at z = 1 m, so the projection is affine and the
            // NOCS value at a pixel equals the analytic barycentric blend.
            const Eigen::Vector3d p = intr.unproject(x + 0.5, y + 0.5, 1.0);
            const Eigen::Vector3d local = (p - inst.pose.t) / inst.pose.s;
            const Eigen::Vector3d value = out.nocs.value(x, y);
            CHECK(std::abs(value.x() - local.x()) < 1e-6);
            CHECK(std::abs(value.y() - local.y()) < 1e-6);
            CHECK(std::abs(value.z()) < 1e-9);
            CHECK(out.depth.at(x, y) == 1000);
        }
    }
    CHECK(covered > 5000);
}

TEST_CASE("z-buffer keeps the nearer surface") {
    canonical::Mesh quad;
    quad.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    quad.triangles = {{0, 1, 2}, {0, 2, 3}};
    auto canon = std::make_shared<canonical::CanonicalMesh>();
    canon->mesh = quad;
    canon->nocs_extents = {1, 1, 0};
    canon->source_scale = 1;

    SceneInstance near_inst, far_inst;
    near_inst.mesh = canon;
    near_inst.instance_id = 1;
    near_inst.pose.s = 0.2;
    near_inst.pose.t = {-0.1, -0.1, 0.5};
    far_inst.mesh = canon;
    far_inst.instance_id = 2;
    far_inst.pose.s = 0.2;
    far_inst.pose.t = {-0.1, -0.1, 1.0};

    const geom::Intrinsics intr = vga();
    const SceneInstance scene[] = {far_inst, near_inst};  // far first
    const auto out = render::render_scene(scene, intr);
    CHECK(out.mask.at(320, 240) == 1);
    CHECK(out.depth.at(320, 240) == 500);
}

TEST_CASE("mask, depth, and NOCS validity agree pixelwise") {
    Rng rng(4);
    const auto mesh = testutil::make_icosphere(2);
    const auto inst = make_instance(mesh, facing_pose(0.25, 1.2, random_rotation(rng)));
    const auto out = render::render_scene({&inst, 1}, vga());
    for (int y = 0; y < out.mask.height; ++y)
        for (int x = 0; x < out.mask.width; ++x) {
            const bool m = out.mask.at(x, y) != 0;
            const bool d = out.depth.at(x, y) != 0;
            const bool v = out.nocs.is_valid(x, y);
            CHECK(m == d);
            CHECK(m == v);
        }
}

TEST_CASE("rendering is deterministic") {
    Rng rng(12);
    const auto mesh = testutil::make_mug();
    const auto inst = make_instance(mesh, facing_pose(0.2, 0.9, random_rotation(rng)));
    const auto a = render::render_scene({&inst, 1}, vga());
    const auto b = render::render_scene({&inst, 1}, vga());
    CHECK(a.nocs.xyz == b.nocs.xyz);
    CHECK(a.nocs.valid == b.nocs.valid);
    CHECK(a.depth.data == b.depth.data);
    CHECK(a.mask.data == b.mask.data);
    CHECK(a.rgb.data == b.rgb.data);
}

TEST_CASE("NOCS values stay within the canonical bbox") {
    Rng rng(20);
    const auto mesh = testutil::make_cylinder();
    const auto inst = make_instance(mesh, facing_pose(0.3, 1.0, random_rotation(rng)));
    const auto out = render::render_scene({&inst, 1}, vga());
    const Eigen::Vector3d lo =
        Eigen::Vector3d::Constant(0.5) - 0.5 * inst.mesh->nocs_extents;
    const Eigen::Vector3d hi =
        Eigen::Vector3d::Constant(0.5) + 0.5 * inst.mesh->nocs_extents;
    for (int y = 0; y < out.nocs.height; ++y)
        for (int x = 0; x < out.nocs.width; ++x) {
            if (!out.nocs.is_valid(x, y)) continue;
            const Eigen::Vector3d v = out.nocs.value(x, y);
            for (int c = 0; c < 3; ++c) {
                CHECK(v[c] >= lo[c] - 1e-6);
                CHECK(v[c] <= hi[c] + 1e-6);
            }
        }
}

TEST_CASE("render round trip lands on the mesh surface") {
    Rng rng(33);
    const auto mesh = testutil::make_box(1.0, 0.7, 0.4);
    const auto inst = make_instance(mesh, facing_pose(0.3, 1.1, random_rotation(rng)));
    const geom::Intrinsics intr = vga();
    auto out = render::render_scene({&inst, 1}, intr);

    // Simulate the 16-bit file encoding of the NOCS map.
    out.nocs = io::decode_nocs16(io::encode_nocs16(out.nocs), out.mask);

    const auto inv = inst.pose.inverse();
    // Depth quantization (0.5 mm) maps into NOCS units via 1/s; NOCS
    // encoding adds 1/65535 per channel.
    const double tol = 2.0 * (1e-3 / inst.pose.s) + 2.0 * std::sqrt(3.0) / 65535.0;
    const auto cloud = geom::backproject(out.depth, out.mask, intr);
    size_t checked = 0;
    for (size_t i = 0; i < cloud.size(); i += 37) {  // sample pixels
        const Eigen::Vector3d nocs_pt = inv.apply(cloud.points[i]);
        CHECK(testutil::point_mesh_distance(nocs_pt, inst.mesh->mesh) < tol);
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("adjacent triangles cover shared edges exactly once") {
    // Two triangles forming a quad; with the top-left rule no pixel on the
    // shared diagonal may be claimed twice or dropped.
    canonical::Mesh t1, t2;
    t1.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    t1.triangles = {{0, 1, 2}};
    t2.vertices = {{1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    t2.triangles = {{0, 1, 2}};

    auto c1 = std::make_shared<canonical::CanonicalMesh>();
    c1->mesh = t1;
    c1->nocs_extents = {1, 1, 0};
    c1->source_scale = 1;
    auto c2 = std::make_shared<canonical::CanonicalMesh>();
    c2->mesh = t2;
    c2->nocs_extents = {1, 1, 0};
    c2->source_scale = 1;

    geom::SimilarityTransform pose;
    pose.s = 0.37;
    pose.t = {-0.19, -0.12, 0.8};

    SceneInstance a, b;
    a.mesh = c1;
    a.pose = pose;
    a.instance_id = 1;
    b.mesh = c2;
    b.pose = pose;
    b.instance_id = 2;

    const geom::Intrinsics intr = vga();
    const SceneInstance both[] = {a, b};
    const auto quad = render::render_scene(both, intr);
    const auto only_a = render::render_scene({&a, 1}, intr);
    const auto only_b = render::render_scene({&b, 1}, intr);

    long quad_count = 0, single_counts = 0, overlaps = 0;
    for (size_t i = 0; i < quad.mask.data.size(); ++i) {
        quad_count += quad.mask.data[i] != 0;
        single_counts += (only_a.mask.data[i] != 0) + (only_b.mask.data[i] != 0);
        overlaps += (only_a.mask.data[i] != 0) && (only_b.mask.data[i] != 0);
    }
    CHECK(overlaps == 0);            // no double claim along the diagonal
    CHECK(quad_count == single_counts);  // no dropped pixels either
    CHECK(quad_count > 10000);
}

TEST_CASE("handle visibility for a mug") {
    const auto mesh = testutil::make_mug();
    const geom::Intrinsics intr = vga();

    // Handle on +x of the body; rotate so it faces the camera (-z).
    const Eigen::Matrix3d facing =
        Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitY())
            .toRotationMatrix();
    auto inst = make_instance(mesh, facing_pose(0.18, 0.8, facing), 1, 6);
    auto out = render::render_scene({&inst, 1}, intr);
    CHECK(render::handle_visibility(inst, out.mask, intr) == true);

    // Rotated 180 degrees: the body occludes the handle.
    const Eigen::Matrix3d away =
        Eigen::AngleAxisd(-std::numbers::pi / 2, Eigen::Vector3d::UnitY())
            .toRotationMatrix();
    auto hidden = make_instance(mesh, facing_pose(0.18, 0.8, away), 1, 6);
    auto out2 = render::render_scene({&hidden, 1}, intr);
    CHECK(render::handle_visibility(hidden, out2.mask, intr) == false);

    // A bottle has no handle tag.
    auto bottle = make_instance(testutil::make_cylinder(), facing_pose(0.2, 1.0), 1, 1);
    auto out3 = render::render_scene({&bottle, 1}, intr);
    CHECK_THROWS_AS(render::handle_visibility(bottle, out3.mask, intr), NotApplicableError);
}

TEST_CASE("duplicate instance ids are rejected") {
    auto a = make_instance(testutil::make_box(), facing_pose(0.2, 1.0), 3);
    auto b = make_instance(testutil::make_box(), facing_pose(0.2, 1.5), 3);
    const SceneInstance scene[] = {a, b};
    CHECK_THROWS_AS(render::render_scene(scene, vga()), InvalidInputError);
}
