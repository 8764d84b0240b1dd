#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nocs/error.hpp"

namespace nocs::canonical {

/// Triangle mesh in its (category-consistently oriented) model frame.
struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    /// Indices into `triangles` marking the mug-handle submesh; empty
    /// when the mesh carries no handle tag.
    std::vector<int> handle_triangles;

    void validate() const;  // index bounds, >= 1 triangle, finite vertices
};

/// Mesh normalized into NOCS: vertices in [0,1]^3, tight-bbox diagonal 1,
/// bbox center at (0.5, 0.5, 0.5).
struct CanonicalMesh {
    Mesh mesh;
    Eigen::Vector3d nocs_extents = Eigen::Vector3d::Zero();  // bbox size, NOCS units
    double source_scale = 0.0;  // original bbox diagonal, meters
};

/// Normalize by the tight-bbox diagonal: v' = (v - center)/diag + 0.5.
/// Throws DegenerateMeshError on a (near) zero-diagonal mesh.
CanonicalMesh canonicalize(const Mesh& mesh);

/// Uniform discretization of [0,1] into B bins.
struct BinCodec {
    int bins = 32;
};

/// floor(v * B) clamped to the top bin. Throws OutOfRangeError outside [0,1].
int quantize(double v, const BinCodec& codec);

/// Bin-center value (bin + 0.5) / B. Throws OutOfRangeError outside [0, B).
double dequantize(int bin, const BinCodec& codec);

}  // namespace nocs::canonical
