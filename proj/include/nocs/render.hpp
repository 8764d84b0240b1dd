#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nocs/canonical.hpp"
#include "nocs/geom.hpp"
#include "nocs/image.hpp"

namespace nocs::render {

/// One posed object in a scene. The pose maps NOCS to camera space (meters).
struct SceneInstance {
    std::shared_ptr<const canonical::CanonicalMesh> mesh;
    geom::SimilarityTransform pose;
    int class_id = 0;
    uint8_t instance_id = 0;  // unique within the scene, > 0
    std::optional<bool> handle_visible;
    std::string mesh_path;  // carried into emitted metadata when known
};

struct RenderOptions {
    /// Direction light travels, camera frame; used only for the shaded image.
    Eigen::Vector3d light_dir{0.3, -0.5, 0.8};
    double ambient = 0.35;
};

struct RenderOutput {
    NocsMap nocs;
    DepthMap depth;       // camera-space z, millimeters, 0 = background
    InstanceMask mask;    // instance id, 0 = background
    Image<uint8_t> rgb;   // flat-Lambertian shading, 3 channels
};

/// Z-buffered rasterization at pixel centers (top-left fill rule, no
/// anti-aliasing, no back-face culling). NOCS values are interpolated
/// perspective-correct. Deterministic: identical inputs give identical
/// outputs. An empty scene yields all-background images.
RenderOutput render_scene(std::span<const SceneInstance> instances,
                          const geom::Intrinsics& intr,
                          const RenderOptions& options = {});

/// True iff at least min_pixels of the instance's mask are covered by a
/// front-facing handle triangle. `handle_triangles` overrides the mesh's
/// own tag; with neither present throws NotApplicableError.
bool handle_visibility(const SceneInstance& instance, const InstanceMask& mask,
                       const geom::Intrinsics& intr,
                       std::span<const int> handle_triangles = {},
                       int min_pixels = 10);

}  // namespace nocs::render
