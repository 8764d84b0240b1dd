#pragma once

#include <optional>

#include "nocs/canonical.hpp"
#include "nocs/category.hpp"
#include "nocs/image.hpp"

namespace nocs::loss {

/// Soft L1 over the ROI: per channel d = pred - gt, contribution
/// 5 d^2 for |d| <= 0.1 and |d| - 0.05 beyond; channel mean per pixel,
/// averaged over the n mask pixels. Throws EmptyRoiError when n = 0.
double soft_l1(const NocsMap& gt, const NocsMap& pred, const InstanceMask& roi_mask);

/// Rotate every valid pixel value about the symmetry axis through the
/// cube center (0.5, 0.5, 0.5). Values leaving [0,1]^3 by more than 1e-9
/// indicate a non-centered axis and raise InconsistentGeometryError.
NocsMap rotate_nocs(const NocsMap& gt, const CategorySpec& spec, double angle_deg);

/// min over the category's rotation set of soft_l1(rotated gt, pred).
double symmetric_loss(const NocsMap& gt, const NocsMap& pred,
                      const InstanceMask& roi_mask, const CategorySpec& spec,
                      std::optional<bool> handle_visible = {});

struct CrossEntropyStats {
    double value = 0.0;
    long clipped = 0;  // target bins whose probability was clipped at 1e-12
};

/// Mean over mask pixels and channels of -log p(target bin), where the
/// target is quantize(gt). Probabilities must be nonnegative and sum to 1
/// within 1e-6 per pixel channel (checked on ROI pixels).
CrossEntropyStats bin_cross_entropy(const NocsMap& gt, const ProbabilityMap& pred_probs,
                                    const InstanceMask& roi_mask,
                                    const canonical::BinCodec& codec);

}  // namespace nocs::loss
