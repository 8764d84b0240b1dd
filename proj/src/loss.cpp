#include "nocs/loss.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace nocs::loss {

namespace {

constexpr double kKnee = 0.1;
constexpr double kProbFloor = 1e-12;

double soft_l1_scalar(double d) {
    const double ad = std::abs(d);
    return ad <= kKnee ? 5.0 * d * d : ad - 0.05;
}

void check_same_size(const NocsMap& gt, const NocsMap& pred, const InstanceMask& roi) {
    if (gt.width != pred.width || gt.height != pred.height ||
        !roi.same_size(gt.width, gt.height))
        throw InvalidInputError("loss: map and mask dimensions disagree");
}

}  // namespace

double soft_l1(const NocsMap& gt, const NocsMap& pred, const InstanceMask& roi_mask) {
    check_same_size(gt, pred, roi_mask);
    long n = 0;
    double total = 0.0;
    for (int y = 0; y < gt.height; ++y) {
        for (int x = 0; x < gt.width; ++x) {
            if (roi_mask.at(x, y) == 0) continue;
            ++n;
            const size_t i = (static_cast<size_t>(y) * gt.width + x) * 3;
            double pixel = 0.0;
            for (int c = 0; c < 3; ++c)
                pixel += soft_l1_scalar(pred.xyz[i + c] - gt.xyz[i + c]);
            total += pixel / 3.0;
        }
    }
    if (n == 0) throw EmptyRoiError("soft_l1: ROI mask selects no pixels");
    return total / static_cast<double>(n);
}

NocsMap rotate_nocs(const NocsMap& gt, const CategorySpec& spec, double angle_deg) {
    const Eigen::Vector3d axis = spec.symmetry_axis.normalized();
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(angle_deg * std::numbers::pi / 180.0, axis).toRotationMatrix();
    const Eigen::Vector3d center = Eigen::Vector3d::Constant(0.5);

    NocsMap out = gt;
    for (int y = 0; y < gt.height; ++y) {
        for (int x = 0; x < gt.width; ++x) {
            if (!gt.is_valid(x, y)) continue;
            Eigen::Vector3d p = rot * (gt.value(x, y) - center) + center;
            if (p.minCoeff() < -1e-9 || p.maxCoeff() > 1.0 + 1e-9)
                throw InconsistentGeometryError(
                    "rotate_nocs: value left the unit cube; symmetry axis is not centered");
            out.set_value(x, y, p.cwiseMax(0.0).cwiseMin(1.0));
        }
    }
    return out;
}

double symmetric_loss(const NocsMap& gt, const NocsMap& pred,
                      const InstanceMask& roi_mask, const CategorySpec& spec,
                      std::optional<bool> handle_visible) {
    double best = std::numeric_limits<double>::infinity();
    for (double theta : spec.effective_theta(handle_visible))
        best = std::min(best, soft_l1(rotate_nocs(gt, spec, theta), pred, roi_mask));
    return best;
}

CrossEntropyStats bin_cross_entropy(const NocsMap& gt, const ProbabilityMap& pred_probs,
                                    const InstanceMask& roi_mask,
                                    const canonical::BinCodec& codec) {
    if (gt.width != pred_probs.width || gt.height != pred_probs.height ||
        !roi_mask.same_size(gt.width, gt.height))
        throw InvalidInputError("bin_cross_entropy: dimensions disagree");
    if (pred_probs.bins != codec.bins)
        throw InvalidInputError("bin_cross_entropy: probability map bin count differs from codec");

    CrossEntropyStats stats;
    long terms = 0;
    for (int y = 0; y < gt.height; ++y) {
        for (int x = 0; x < gt.width; ++x) {
            if (roi_mask.at(x, y) == 0) continue;
            for (int c = 0; c < 3; ++c) {
                const float* bins = pred_probs.bin_ptr(x, y, c);
                double sum = 0.0;
                for (int b = 0; b < codec.bins; ++b) {
                    if (bins[b] < 0.f)
                        throw InvalidInputError("bin_cross_entropy: negative probability");
                    sum += bins[b];
                }
                if (std::abs(sum - 1.0) > 1e-6)
                    throw InvalidInputError("bin_cross_entropy: probabilities do not sum to 1");

                const size_t i = (static_cast<size_t>(y) * gt.width + x) * 3 + c;
                const int target = canonical::quantize(gt.xyz[i], codec);
                double p = bins[target];
                if (p < kProbFloor) {
                    p = kProbFloor;
                    ++stats.clipped;
                }
                stats.value -= std::log(p);
                ++terms;
            }
        }
    }
    if (terms == 0) throw EmptyRoiError("bin_cross_entropy: ROI mask selects no pixels");
    stats.value /= static_cast<double>(terms);
    return stats;
}

}  // namespace nocs::loss
