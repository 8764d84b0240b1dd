#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nocs/canonical.hpp"
#include "nocs/geom.hpp"
#include "nocs/image.hpp"
#include "nocs/io.hpp"
#include "nocs/render.hpp"

namespace nocs::compositor {

/// Supporting plane n . p = d with |n| = 1, n oriented toward the camera.
struct PlaneModel {
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    double d = 0.0;
    std::vector<int> inlier_pixels;          // y * width + x
    std::vector<Eigen::Vector3d> hull;       // support polygon, CCW about normal
    double area = 0.0;                       // hull area, m^2

    Eigen::Vector3d basis_u, basis_v;        // in-plane axes, u x v = normal
    Eigen::Vector2d to_plane(const Eigen::Vector3d& p) const {
        return {basis_u.dot(p), basis_v.dot(p)};
    }
};

struct PlaneDetectConfig {
    int ransac_iterations = 400;
    double distance_threshold_m = 0.01;
    int min_support = 500;       // inlier pixels (after subsampling)
    int max_planes = 4;
    /// Planes tilted more than this from the up axis are rejected as
    /// non-supporting (normal within 30 deg of horizontal).
    double max_tilt_deg = 60.0;
    /// Vertical reference in camera coordinates. The default points from
    /// the scene toward the camera, which keeps camera-facing surfaces
    /// and discards ones seen edge-on; pass (0,-1,0) when gravity is known.
    Eigen::Vector3d up_axis{0.0, 0.0, -1.0};
    int subsample_stride = 1;
    uint64_t rng_seed = 0;
};

/// Sequential RANSAC plane extraction, largest support first.
/// Throws NoPlaneFoundError when nothing reaches min_support.
std::vector<PlaneModel> detect_planes(const DepthMap& depth,
                                      const geom::Intrinsics& intr,
                                      const PlaneDetectConfig& cfg);

struct Placement {
    int mesh_index = -1;
    int plane_index = -1;
    geom::SimilarityTransform pose;  // NOCS -> camera, meters
};

struct PlacementConfig {
    int count = 3;
    std::array<double, 2> scale_range_m{0.10, 0.30};  // metric bbox diagonal
    /// Optional per-mesh override of scale_range_m (same length as meshes).
    std::vector<std::array<double, 2>> per_mesh_scale_range;
    int max_attempts = 100;           // per requested object
    double max_footprint_overlap = 0.30;
    uint64_t rng_seed = 0;
};

struct PlacementResult {
    std::vector<Placement> placements;
    bool complete = true;  // false when fewer than count could be placed
};

/// Sample poses on the detected planes: plane picked by area, position
/// uniform in the support polygon, yaw uniform, scale in range; the mesh
/// up axis is aligned to the plane normal and the lowest vertex touches
/// the plane. Footprints stay inside the polygon and overlap accepted
/// placements by at most max_footprint_overlap.
PlacementResult sample_placements(
    const std::vector<PlaneModel>& planes,
    const std::vector<std::shared_ptr<const canonical::CanonicalMesh>>& meshes,
    const PlacementConfig& cfg);

struct Background {
    Image<uint8_t> rgb;  // 3 channels
    DepthMap depth;      // millimeters
};

struct CompositeResult {
    Image<uint8_t> rgb;
    NocsMap nocs;
    DepthMap depth;      // min of background and rendered depth
    InstanceMask mask;   // synthetic pixels only
    io::SceneMetadata meta;
};

/// Render the instances, then composite them over the background with
/// occlusion from the real depth (rendered pixel wins where its depth is
/// nearer; output depth is the minimum of the two). Ground truth covers
/// only the synthetic pixels that survive occlusion. handle_visible is
/// filled for instances whose mesh carries a handle tag.
CompositeResult composite(const Background& background,
                          std::span<const render::SceneInstance> instances,
                          const geom::Intrinsics& intr,
                          const render::RenderOptions& options = {});

}  // namespace nocs::compositor
