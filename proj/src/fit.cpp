#include "nocs/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "nocs/random.hpp"

namespace nocs::fit {

namespace {

struct Moments {
    Eigen::Vector3d mean_src, mean_dst;
    Eigen::Matrix3d cov;  // (1/n) sum (dst - mu_d)(src - mu_s)^T
    double var_src = 0.0;
};

Moments compute_moments(std::span<const Eigen::Vector3d> src,
                        std::span<const Eigen::Vector3d> dst) {
    const double n = static_cast<double>(src.size());
    Moments m;
    m.mean_src.setZero();
    m.mean_dst.setZero();
    for (size_t i = 0; i < src.size(); ++i) {
        m.mean_src += src[i];
        m.mean_dst += dst[i];
    }
    m.mean_src /= n;
    m.mean_dst /= n;
    m.cov.setZero();
    for (size_t i = 0; i < src.size(); ++i) {
        const Eigen::Vector3d ps = src[i] - m.mean_src;
        const Eigen::Vector3d pd = dst[i] - m.mean_dst;
        m.cov += pd * ps.transpose();
        m.var_src += ps.squaredNorm();
    }
    m.cov /= n;
    m.var_src /= n;
    return m;
}

geom::SimilarityTransform umeyama_span(std::span<const Eigen::Vector3d> src,
                                       std::span<const Eigen::Vector3d> dst,
                                       std::optional<double> fixed_scale = {}) {
    if (src.size() != dst.size())
        throw InvalidInputError("umeyama: point sets differ in size");
    if (src.size() < 3)
        throw InvalidInputError("umeyama: need at least 3 correspondences");

    const Moments m = compute_moments(src, dst);
    if (!(m.var_src > 0.0))
        throw DegenerateConfigurationError("umeyama: coincident source points");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m.cov,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d d = svd.singularValues();
    // Rank < 2 (collinear or coincident) leaves the rotation undetermined.
    if (!(d(1) > 1e-9 * std::max(d(0), 1e-300)) || d(0) <= 0.0)
        throw DegenerateConfigurationError("umeyama: rank-deficient configuration");

    Eigen::Vector3d sign_fix = Eigen::Vector3d::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
        sign_fix(2) = -1.0;

    geom::SimilarityTransform out;
    out.R = svd.matrixU() * sign_fix.asDiagonal() * svd.matrixV().transpose();
    out.s = fixed_scale ? *fixed_scale : d.dot(sign_fix) / m.var_src;
    if (!(out.s > 0.0))
        throw DegenerateConfigurationError("umeyama: non-positive scale");
    out.t = m.mean_dst - out.s * (out.R * m.mean_src);
    return out;
}

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const Eigen::Vector3d& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

Eigen::Vector3d extent_of(std::span<const Eigen::Vector3d> pts,
                          std::span<const int> subset) {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int i : subset) {
        lo = lo.cwiseMin(pts[i]);
        hi = hi.cwiseMax(pts[i]);
    }
    return hi - lo;
}

// Minimal kd-tree for nearest-neighbor queries in the ICP loop.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Eigen::Vector3d>& pts) : pts_(pts) {
        index_.resize(pts.size());
        std::iota(index_.begin(), index_.end(), 0);
        build(0, static_cast<int>(pts.size()), 0);
    }

    int nearest(const Eigen::Vector3d& q) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        search(0, static_cast<int>(pts_.size()), 0, q, best, best_d2);
        return best;
    }

private:
    void build(int lo, int hi, int depth) {
        if (hi - lo <= 1) return;
        const int axis = depth % 3;
        const int mid = (lo + hi) / 2;
        std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                         [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    void search(int lo, int hi, int depth, const Eigen::Vector3d& q, int& best,
                double& best_d2) const {
        if (lo >= hi) return;
        const int axis = depth % 3;
        const int mid = (lo + hi) / 2;
        const int idx = index_[mid];
        const double d2 = (pts_[idx] - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = idx;
        }
        const double delta = q[axis] - pts_[idx][axis];
        const int near_lo = delta < 0.0 ? lo : mid + 1;
        const int near_hi = delta < 0.0 ? mid : hi;
        const int far_lo = delta < 0.0 ? mid + 1 : lo;
        const int far_hi = delta < 0.0 ? hi : mid;
        search(near_lo, near_hi, depth + 1, q, best, best_d2);
        if (delta * delta < best_d2) search(far_lo, far_hi, depth + 1, q, best, best_d2);
    }

    const std::vector<Eigen::Vector3d>& pts_;
    std::vector<int> index_;
};

}  // namespace

void FitConfig::validate() const {
    if (ransac_iterations < 1) throw InvalidInputError("fit config: iterations must be >= 1");
    if (!(inlier_threshold_m > 0.0))
        throw InvalidInputError("fit config: inlier threshold must be positive");
    if (min_sample != 3) throw InvalidInputError("fit config: minimal sample size is 3");
    if (!(confidence > 0.0) || !(confidence < 1.0))
        throw InvalidInputError("fit config: confidence must lie in (0, 1)");
}

geom::SimilarityTransform umeyama(const geom::PointCloud& src, const geom::PointCloud& dst) {
    return umeyama_span(src.points, dst.points);
}

PoseResult ransac_umeyama(const geom::PointCloud& src_nocs,
                          const geom::PointCloud& dst_metric, const FitConfig& cfg) {
    cfg.validate();
    if (src_nocs.size() != dst_metric.size())
        throw InvalidInputError("ransac: point sets differ in size");
    const int n = static_cast<int>(src_nocs.size());
    if (n < cfg.min_sample)
        throw InsufficientDataError("ransac: fewer than 3 correspondences");

    const auto& src = src_nocs.points;
    const auto& dst = dst_metric.points;
    Rng rng(cfg.rng_seed);

    int best_count = -1;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::vector<int> best_inliers;

    std::vector<int> inliers;
    inliers.reserve(n);

    const double thr2 = cfg.inlier_threshold_m * cfg.inlier_threshold_m;
    long needed = cfg.ransac_iterations;

    for (long iter = 0; iter < needed && iter < cfg.ransac_iterations; ++iter) {
        // Draw a non-degenerate 3-point sample; near-collinear samples
        // (triangle area < 1e-10) are redrawn.
        int i0 = 0, i1 = 0, i2 = 0;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            i0 = static_cast<int>(uniform_index(rng, n));
            i1 = static_cast<int>(uniform_index(rng, n));
            i2 = static_cast<int>(uniform_index(rng, n));
            ok = i0 != i1 && i1 != i2 && i0 != i2 &&
                 triangle_area(src[i0], src[i1], src[i2]) >= 1e-10;
        }
        if (!ok) continue;

        geom::SimilarityTransform model;
        try {
            const std::array<Eigen::Vector3d, 3> ms{src[i0], src[i1], src[i2]};
            const std::array<Eigen::Vector3d, 3> md{dst[i0], dst[i1], dst[i2]};
            model = umeyama_span(ms, md);
        } catch (const DegenerateConfigurationError&) {
            continue;
        }

        inliers.clear();
        double sq_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r2 = (model.apply(src[i]) - dst[i]).squaredNorm();
            if (r2 < thr2) {
                inliers.push_back(i);
                sq_sum += r2;
            }
        }
        const int count = static_cast<int>(inliers.size());
        const double rmse = count > 0 ? std::sqrt(sq_sum / count) : 0.0;
        if (count > best_count || (count == best_count && rmse < best_rmse)) {
            best_count = count;
            best_rmse = rmse;
            best_inliers = inliers;
        }

        // Early exit once the best inlier ratio makes a better sample
        // unlikely at the configured confidence.
        const double w = static_cast<double>(best_count) / n;
        const double denom = 1.0 - w * w * w;
        if (denom <= 0.0) {
            needed = iter + 1;  // every point is an inlier
        } else if (denom < 1.0) {
            const double k = std::log(1.0 - cfg.confidence) / std::log(denom);
            needed = std::min<long>(cfg.ransac_iterations,
                                    static_cast<long>(std::ceil(k)));
        }  // denom == 1: no consensus yet, keep iterating
    }

    if (best_count < cfg.min_sample)
        throw FitFailedError("ransac: no model reached 3 inliers");

    std::vector<Eigen::Vector3d> in_src, in_dst;
    in_src.reserve(best_inliers.size());
    in_dst.reserve(best_inliers.size());
    for (int i : best_inliers) {
        in_src.push_back(src[i]);
        in_dst.push_back(dst[i]);
    }

    PoseResult out;
    out.transform = umeyama_span(in_src, in_dst);
    out.inlier_count = best_count;
    double sq_sum = 0.0;
    for (size_t i = 0; i < in_src.size(); ++i)
        sq_sum += (out.transform.apply(in_src[i]) - in_dst[i]).squaredNorm();
    out.rmse = std::sqrt(sq_sum / static_cast<double>(in_src.size()));
    out.dimensions = out.transform.s * extent_of(src, best_inliers);
    return out;
}

PoseResult estimate_pose(const NocsMap& nocs, const DepthMap& depth,
                         const InstanceMask& mask, uint8_t instance_id,
                         const geom::Intrinsics& intr,
                         std::optional<Eigen::Vector3d> nocs_extents,
                         const FitConfig& cfg) {
    if (nocs.width != depth.width || nocs.height != depth.height ||
        !mask.same_size(depth.width, depth.height))
        throw InvalidInputError("estimate_pose: image dimensions disagree");

    geom::PointCloud metric, nocs_pts;
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            if (mask.at(x, y) != instance_id) continue;
            const uint16_t d_mm = depth.at(x, y);
            if (d_mm == 0 || !nocs.is_valid(x, y)) continue;
            metric.points.push_back(intr.unproject(x, y, d_mm * 1e-3));
            metric.pixel_indices.push_back(y * depth.width + x);
            nocs_pts.points.push_back(nocs.value(x, y));
        }
    }
    if (metric.empty())
        throw EmptyCloudError("estimate_pose: instance has no usable pixels");

    PoseResult result = ransac_umeyama(nocs_pts, metric, cfg);
    if (nocs_extents) result.dimensions = result.transform.s * (*nocs_extents);
    return result;
}

geom::SimilarityTransform icp_align(const geom::PointCloud& source,
                                    const geom::PointCloud& target,
                                    const geom::SimilarityTransform& init,
                                    int max_iters, double tol) {
    if (source.empty() || target.empty())
        throw InvalidInputError("icp: point clouds must be nonempty");
    init.validate();

    const KdTree3 tree(target.points);
    geom::SimilarityTransform current = init;
    double prev_mean = std::numeric_limits<double>::infinity();

    std::vector<Eigen::Vector3d> matched(source.size());
    for (int iter = 0; iter < max_iters; ++iter) {
        double mean = 0.0;
        for (size_t i = 0; i < source.size(); ++i) {
            const Eigen::Vector3d p = current.apply(source.points[i]);
            matched[i] = target.points[tree.nearest(p)];
            mean += (matched[i] - p).norm();
        }
        mean /= static_cast<double>(source.size());

        try {
            current = umeyama_span(source.points, matched, init.s);
        } catch (const DegenerateConfigurationError&) {
            break;  // correspondences collapsed; keep the last estimate
        }
        if (std::abs(prev_mean - mean) < tol) break;
        prev_mean = mean;
    }
    return current;
}

}  // namespace nocs::fit
