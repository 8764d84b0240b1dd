#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nocs {

/// Per-category evaluation and loss settings: symmetry axis in the
/// canonical frame, the discrete rotation set for the symmetric loss,
/// and the conditional rule for mugs (symmetric only when the handle
/// is hidden).
struct CategorySpec {
    int class_id = 0;
    std::string name;
    Eigen::Vector3d symmetry_axis{0.0, 1.0, 0.0};
    std::vector<double> theta_deg{0.0};
    enum class ConditionalRule { None, MugHandle };
    ConditionalRule rule = ConditionalRule::None;
    std::array<double, 2> scale_range_m{0.10, 0.30};

    /// Free rotation about the axis applies to this instance?
    /// An unknown handle state on a conditional category is treated as
    /// visible (the stricter, non-symmetric reading).
    bool symmetric_for(std::optional<bool> handle_visible = {}) const {
        if (theta_deg.size() <= 1) return false;
        if (rule == ConditionalRule::None) return true;
        return handle_visible.has_value() && !*handle_visible;
    }

    /// Rotation set the symmetric loss minimizes over.
    std::vector<double> effective_theta(std::optional<bool> handle_visible = {}) const {
        if (rule == ConditionalRule::MugHandle && !symmetric_for(handle_visible))
            return {0.0};
        return theta_deg;
    }

    void validate() const;  // throws InvalidInputError
};

struct CategoryTable {
    std::vector<CategorySpec> specs;

    const CategorySpec* find(int class_id) const;
    const CategorySpec& at(int class_id) const;  // throws InvalidInputError

    /// The six categories used throughout, plus a distractor id.
    static CategoryTable defaults();
};

CategoryTable load_category_table(const std::string& path);
void save_category_table(const std::string& path, const CategoryTable& table);

}  // namespace nocs
