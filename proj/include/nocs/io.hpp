#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nocs/canonical.hpp"
#include "nocs/category.hpp"
#include "nocs/geom.hpp"
#include "nocs/image.hpp"

namespace nocs::io {

// ---------------------------------------------------------------------------
// PNG. Depth: 16-bit gray, millimeters, 0 invalid. Mask: 8-bit gray.
// NOCS: 3-channel 16-bit, value = round(coord * 65535), background (0,0,0);
// validity comes from the mask file. RGB: 8-bit, 3 channels.
// ---------------------------------------------------------------------------

Image<uint16_t> read_png16(const std::string& path);  // 1 or 3 channels
Image<uint8_t> read_png8(const std::string& path);
void write_png16(const std::string& path, const Image<uint16_t>& img);
void write_png8(const std::string& path, const Image<uint8_t>& img);

DepthMap read_depth_png(const std::string& path);
void write_depth_png(const std::string& path, const DepthMap& depth);
InstanceMask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const InstanceMask& mask);

Image<uint16_t> encode_nocs16(const NocsMap& map);
NocsMap decode_nocs16(const Image<uint16_t>& img, const InstanceMask& validity);
NocsMap read_nocs_png(const std::string& path, const InstanceMask& validity);
void write_nocs_png(const std::string& path, const NocsMap& map);

// ---------------------------------------------------------------------------
// OBJ (ASCII subset: v / f records, triangulated; a `g handle` group tags
// the mug-handle triangles). Canonical meshes carry a JSON sidecar
// (<stem>.meta.json) with source_scale, nocs_extents and the handle tag.
// ---------------------------------------------------------------------------

canonical::Mesh load_obj(const std::string& path);
void save_obj(const std::string& path, const canonical::Mesh& mesh);

std::string sidecar_path(const std::string& obj_path);
void save_canonical_mesh(const std::string& obj_path, const canonical::CanonicalMesh& mesh);
canonical::CanonicalMesh load_canonical_mesh(const std::string& obj_path);

// ---------------------------------------------------------------------------
// JSON records.
// ---------------------------------------------------------------------------

geom::Intrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const std::string& path, const geom::Intrinsics& intr);

/// Scene description / ground truth: one record per image. The same pose
/// convention (s, row-major R, t) is used by prediction files so render
/// and compositor outputs feed eval directly.
struct SceneMetadata {
    struct Instance {
        int class_id = 0;
        uint8_t instance_id = 0;
        std::string mesh_path;  // may be empty in pure-GT records
        geom::SimilarityTransform pose;
        Eigen::Vector3d dimensions = Eigen::Vector3d::Zero();
        Eigen::Vector3d nocs_extents = Eigen::Vector3d::Zero();
        std::optional<bool> handle_visible;
    };
    std::string image_id;
    std::optional<geom::Intrinsics> intrinsics;
    std::vector<Instance> instances;
};

SceneMetadata load_scene(const std::string& path);
void save_scene(const std::string& path, const SceneMetadata& scene);

/// Per-image detections as written by `nocs fit`.
struct PredictionFile {
    struct Detection {
        int class_id = 0;
        double score = 1.0;
        geom::SimilarityTransform pose;
        Eigen::Vector3d dimensions = Eigen::Vector3d::Zero();
        int inlier_count = 0;
        double rmse = 0.0;
        std::optional<std::array<double, 4>> box2d;  // x0, y0, x1, y1
    };
    std::string image_id;
    std::vector<Detection> detections;
};

PredictionFile load_predictions(const std::string& path);
void save_predictions(const std::string& path, const PredictionFile& pred);

// ---------------------------------------------------------------------------
// Probability tensor: "NOCSPRB1" magic, u32 width/height/bins, then
// float32[h][w][3][bins], little-endian.
// ---------------------------------------------------------------------------

ProbabilityMap read_probability_tensor(const std::string& path);
void write_probability_tensor(const std::string& path, const ProbabilityMap& map);

// ---------------------------------------------------------------------------
// Atomic writes: every writer above goes through temp + rename.
// ---------------------------------------------------------------------------

void atomic_write(const std::string& path, const std::string& bytes);

}  // namespace nocs::io
