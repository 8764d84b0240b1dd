#include <doctest.h>

#include <numbers>

#include "nocs/geom.hpp"
#include "nocs/random.hpp"
#include "test_support.hpp"

using namespace nocs;
using geom::Intrinsics;
using geom::OrientedBox3;
using geom::SimilarityTransform;

namespace {

Intrinsics test_intrinsics() {
    Intrinsics intr;
    intr.fx = 500.0;
    intr.fy = 500.0;
    intr.cx = 320.0;
    intr.cy = 240.0;
    intr.width = 640;
    intr.height = 480;
    return intr;
}

Eigen::Matrix3d rot_axis_deg(const Eigen::Vector3d& axis, double deg) {
    return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized())
        .toRotationMatrix();
}

CategorySpec symmetric_spec() {
    CategorySpec spec;
    spec.class_id = 1;
    spec.theta_deg = {0, 30, 60, 90, 120, 150};
    return spec;
}

}  // namespace

TEST_CASE("backproject principal point and pinhole arithmetic") {
    const Intrinsics intr = test_intrinsics();
    DepthMap depth(intr.width, intr.height, 1, 0);
    InstanceMask mask(intr.width, intr.height, 1, 0);

    depth.at(320, 240) = 1000;  // 1 m on the principal ray
    mask.at(320, 240) = 1;
    auto cloud = geom::backproject(depth, mask, intr);
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0].isApprox(Eigen::Vector3d(0, 0, 1.0), 1e-12));
    CHECK(cloud.pixel_indices[0] == 240 * intr.width + 320);

    // (u - cx) * z / fx oracle: pixel (820,240) is 500 px right of center.
    // That pixel is outside 640x480, so use a wider sensor for this case.
    Intrinsics wide = intr;
    wide.width = 1000;
    DepthMap depth_w(wide.width, wide.height, 1, 0);
    InstanceMask mask_w(wide.width, wide.height, 1, 0);
    depth_w.at(820, 240) = 1000;
    mask_w.at(820, 240) = 7;
    auto cloud_w = geom::backproject(depth_w, mask_w, wide, uint8_t{7});
    REQUIRE(cloud_w.size() == 1);
    CHECK(cloud_w.points[0].isApprox(Eigen::Vector3d(1.0, 0.0, 1.0), 1e-12));
}

TEST_CASE("backproject error paths") {
    const Intrinsics intr = test_intrinsics();
    DepthMap depth(intr.width, intr.height, 1, 1000);
    InstanceMask mask(intr.width, intr.height, 1, 0);
    CHECK_THROWS_AS(geom::backproject(depth, mask, intr), EmptyCloudError);

    DepthMap bad(100, 100, 1, 1000);
    CHECK_THROWS_AS(geom::backproject(bad, mask, intr), InvalidInputError);
}

TEST_CASE("backproject then project reproduces pixel centers") {
    const Intrinsics intr = test_intrinsics();
    DepthMap depth(intr.width, intr.height, 1, 0);
    InstanceMask mask(intr.width, intr.height, 1, 0);
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const int x = static_cast<int>(uniform_index(rng, intr.width));
        const int y = static_cast<int>(uniform_index(rng, intr.height));
        depth.at(x, y) = static_cast<uint16_t>(200 + uniform_index(rng, 4000));
        mask.at(x, y) = 1;
    }
    const auto cloud = geom::backproject(depth, mask, intr);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const int px = cloud.pixel_indices[i] % intr.width;
        const int py = cloud.pixel_indices[i] / intr.width;
        const Eigen::Vector2d uv = intr.project(cloud.points[i]);
        CHECK(std::abs(uv.x() - px) < 1e-9);
        CHECK(std::abs(uv.y() - py) < 1e-9);
    }
}

TEST_CASE("rotation error basics") {
    Rng rng(5);
    const Eigen::Matrix3d ra = random_rotation(rng);
    CHECK(geom::rotation_error_deg(ra, ra) == doctest::Approx(0.0).epsilon(1e-9));

    const Eigen::Matrix3d rb = ra * rot_axis_deg({0.3, 1.0, -0.2}, 10.0);
    CHECK(geom::rotation_error_deg(ra, rb) == doctest::Approx(10.0).epsilon(1e-9));

    // Rotation about the symmetry axis carries no penalty.
    const CategorySpec spec = symmetric_spec();
    const Eigen::Matrix3d rc = ra * rot_axis_deg(spec.symmetry_axis, 73.0);
    CHECK(geom::rotation_error_deg(ra, rc, spec) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(geom::rotation_error_deg(ra, rc) == doctest::Approx(73.0).epsilon(1e-9));
}

TEST_CASE("rotation error symmetry and triangle inequality") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Matrix3d a = random_rotation(rng);
        const Eigen::Matrix3d b = random_rotation(rng);
        const Eigen::Matrix3d c = random_rotation(rng);
        const double ab = geom::rotation_error_deg(a, b);
        const double ba = geom::rotation_error_deg(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(geom::rotation_error_deg(a, c) <=
              ab + geom::rotation_error_deg(b, c) + 1e-6);
    }
}

TEST_CASE("translation error") {
    CHECK(geom::translation_error_cm({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
    CHECK(geom::translation_error_cm({0.03, 0.04, 0}, {0, 0, 0}) ==
          doctest::Approx(5.0).epsilon(1e-12));
    CHECK(geom::translation_error_cm({0.1, 0, 0}, {0, 0, 0}) ==
          doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("similarity transform inverse and composition round trip") {
    Rng rng(3);
    for (int i = 0; i < 25; ++i) {
        const SimilarityTransform t = testutil::random_transform(rng);
        const SimilarityTransform id = t.inverse() * t;
        CHECK(std::abs(id.s - 1.0) < 1e-9);
        CHECK((id.R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(id.t.cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("projection error") {
    const Intrinsics intr = test_intrinsics();
    geom::PointCloud model;
    Rng rng(23);
    for (int i = 0; i < 40; ++i)
        model.points.push_back(
            {uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)});

    SimilarityTransform pose;
    pose.t = {0, 0, 1.0};
    CHECK(geom::projection_error_2d_px(pose, pose, model, intr) == doctest::Approx(0.0));

    // Lateral shift of delta at depth z projects to fx * delta / z pixels.
    SimilarityTransform shifted = pose;
    shifted.t.x() += 0.01;
    const double px = geom::projection_error_2d_px(pose, shifted, model, intr);
    CHECK(px == doctest::Approx(5.0).epsilon(0.02));

    SimilarityTransform behind;
    behind.t = {0, 0, -0.1};
    CHECK_THROWS_AS(geom::projection_error_2d_px(pose, behind, model, intr),
                    BehindCameraError);
}

TEST_CASE("box iou on identical and offset cubes") {
    OrientedBox3 a;  // unit cube at origin
    CHECK(geom::box_iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    OrientedBox3 b = a;
    b.center.x() = 0.5;
    CHECK(geom::box_iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(geom::box_iou(b, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    OrientedBox3 far = a;
    far.center.x() = 10.0;
    CHECK(geom::box_iou(a, far) == 0.0);
}

TEST_CASE("box iou matches the Monte-Carlo oracle") {
    Rng rng(101);
    Rng mc_rng(707);
    for (int i = 0; i < 20; ++i) {
        OrientedBox3 a, b;
        a.center = {uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)};
        b.center = {uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)};
        a.R = random_rotation(rng);
        b.R = random_rotation(rng);
        a.extents = {uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2)};
        b.extents = {uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2)};

        const double exact = geom::detail::box_intersection_volume(a, b);
        const auto mc = testutil::mc_intersection_volume(a, b, 200000, mc_rng);
        CHECK(std::abs(exact - mc.volume) <= 3.0 * mc.stderr_ + 1e-12);

        const double iou = geom::box_iou(a, b);
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
    }
}

TEST_CASE("symmetric box iou is free about the symmetry axis") {
    const CategorySpec spec = symmetric_spec();
    OrientedBox3 a;
    a.extents = {0.4, 0.9, 0.4};
    OrientedBox3 b = a;
    b.R = a.R * rot_axis_deg(spec.symmetry_axis, 37.0);
    CHECK(geom::box_iou(a, b) < 1.0 - 1e-6);  // asymmetric comparison penalizes
    CHECK(geom::box_iou(a, b, spec) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("intrinsics and box validation") {
    Intrinsics intr = test_intrinsics();
    intr.fx = -1;
    CHECK_THROWS_AS(intr.validate(), InvalidInputError);

    OrientedBox3 box;
    box.extents = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(box.validate(), InvalidInputError);
}
