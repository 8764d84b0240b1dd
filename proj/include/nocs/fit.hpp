#pragma once

#include <optional>

#include <Eigen/Core>

#include "nocs/geom.hpp"
#include "nocs/image.hpp"

namespace nocs::fit {

struct FitConfig {
    int ransac_iterations = 1000;
    double inlier_threshold_m = 0.010;
    int min_sample = 3;
    double confidence = 0.999;  // early-exit probability
    uint64_t rng_seed = 0;

    void validate() const;
};

struct PoseResult {
    geom::SimilarityTransform transform;
    Eigen::Vector3d dimensions = Eigen::Vector3d::Zero();  // meters
    int inlier_count = 0;
    double rmse = 0.0;  // meters, over the inlier set
};

/// Closed-form least-squares similarity fit (Umeyama): minimizes
/// sum ||s R p_src + t - p_dst||^2 with det(R) = +1 enforced through the
/// sign correction of the smallest singular vector.
geom::SimilarityTransform umeyama(const geom::PointCloud& src,
                                  const geom::PointCloud& dst);

/// Minimal-sample RANSAC around umeyama with a final refit on the
/// consensus set. Deterministic for a fixed rng_seed. Result dimensions
/// are s times the componentwise extent of the inlier source points.
PoseResult ransac_umeyama(const geom::PointCloud& src_nocs,
                          const geom::PointCloud& dst_metric,
                          const FitConfig& cfg);

/// Full map-to-pose pipeline: backproject masked depth, pair with the
/// same pixels' NOCS values, fit robustly. When nocs_extents is given
/// (shape prior), dimensions = s * nocs_extents; otherwise the extents
/// of the inlier NOCS points stand in (visible-part estimate).
PoseResult estimate_pose(const NocsMap& nocs, const DepthMap& depth,
                         const InstanceMask& mask, uint8_t instance_id,
                         const geom::Intrinsics& intr,
                         std::optional<Eigen::Vector3d> nocs_extents,
                         const FitConfig& cfg);

/// Point-to-point ICP with the scale held at init.s. Stops when the mean
/// residual changes by less than tol or after max_iters rounds.
geom::SimilarityTransform icp_align(const geom::PointCloud& source,
                                    const geom::PointCloud& target,
                                    const geom::SimilarityTransform& init,
                                    int max_iters = 50, double tol = 1e-6);

}  // namespace nocs::fit
