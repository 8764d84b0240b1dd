#include "nocs/canonical.hpp"

#include <cmath>
#include <limits>

namespace nocs::canonical {

void Mesh::validate() const {
    if (triangles.empty()) throw InvalidInputError("mesh: no triangles");
    const int n = static_cast<int>(vertices.size());
    for (const auto& tri : triangles)
        for (int idx : tri)
            if (idx < 0 || idx >= n)
                throw InvalidInputError("mesh: triangle index out of range");
    for (const auto& v : vertices)
        if (!v.allFinite()) throw InvalidInputError("mesh: non-finite vertex");
    const int m = static_cast<int>(triangles.size());
    for (int idx : handle_triangles)
        if (idx < 0 || idx >= m)
            throw InvalidInputError("mesh: handle triangle index out of range");
}

CanonicalMesh canonicalize(const Mesh& mesh) {
    mesh.validate();
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Eigen::Vector3d size = hi - lo;
    const double diag = size.norm();
    if (!(diag > 1e-12)) throw DegenerateMeshError("canonicalize: zero bounding-box diagonal");

    const Eigen::Vector3d center = 0.5 * (lo + hi);
    CanonicalMesh out;
    out.mesh = mesh;
    for (auto& v : out.mesh.vertices)
        v = (v - center) / diag + Eigen::Vector3d::Constant(0.5);
    out.nocs_extents = size / diag;
    out.source_scale = diag;
    return out;
}

int quantize(double v, const BinCodec& codec) {
    if (codec.bins < 1) throw InvalidInputError("bin codec: B must be >= 1");
    if (!(v >= 0.0) || !(v <= 1.0))
        throw OutOfRangeError("quantize: value outside [0, 1]");
    const int idx = static_cast<int>(std::floor(v * codec.bins));
    return std::min(idx, codec.bins - 1);
}

double dequantize(int bin, const BinCodec& codec) {
    if (codec.bins < 1) throw InvalidInputError("bin codec: B must be >= 1");
    if (bin < 0 || bin >= codec.bins)
        throw OutOfRangeError("dequantize: bin index outside [0, B)");
    return (bin + 0.5) / codec.bins;
}

}  // namespace nocs::canonical
