#include "nocs/category.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "nocs/error.hpp"
#include "nocs/io.hpp"

namespace nocs {

namespace {

using nlohmann::json;

std::vector<double> symmetric_theta_set() {
    return {0.0, 30.0, 60.0, 90.0, 120.0, 150.0};
}

CategorySpec make_spec(int id, std::string name, std::vector<double> theta,
                       CategorySpec::ConditionalRule rule,
                       std::array<double, 2> scale_range) {
    CategorySpec s;
    s.class_id = id;
    s.name = std::move(name);
    s.theta_deg = std::move(theta);
    s.rule = rule;
    s.scale_range_m = scale_range;
    return s;
}

}  // namespace

void CategorySpec::validate() const {
    if (theta_deg.empty()) throw InvalidInputError("category: theta set must not be empty");
    bool has_zero = false;
    for (double t : theta_deg) has_zero = has_zero || std::abs(t) < 1e-12;
    if (!has_zero) throw InvalidInputError("category: theta set must contain 0 degrees");
    if (std::abs(symmetry_axis.norm() - 1.0) > 1e-9)
        throw InvalidInputError("category: symmetry axis must be unit length");
    if (!(scale_range_m[0] > 0.0) || !(scale_range_m[1] >= scale_range_m[0]))
        throw InvalidInputError("category: bad scale range");
}

const CategorySpec* CategoryTable::find(int class_id) const {
    for (const auto& s : specs)
        if (s.class_id == class_id) return &s;
    return nullptr;
}

const CategorySpec& CategoryTable::at(int class_id) const {
    const CategorySpec* s = find(class_id);
    if (!s) throw InvalidInputError("category table: unknown class id " + std::to_string(class_id));
    return *s;
}

CategoryTable CategoryTable::defaults() {
    using Rule = CategorySpec::ConditionalRule;
    CategoryTable t;
    t.specs = {
        make_spec(1, "bottle", symmetric_theta_set(), Rule::None, {0.15, 0.35}),
        make_spec(2, "bowl", symmetric_theta_set(), Rule::None, {0.12, 0.25}),
        make_spec(3, "camera", {0.0}, Rule::None, {0.12, 0.22}),
        make_spec(4, "can", symmetric_theta_set(), Rule::None, {0.10, 0.20}),
        make_spec(5, "laptop", {0.0}, Rule::None, {0.25, 0.45}),
        make_spec(6, "mug", symmetric_theta_set(), Rule::MugHandle, {0.10, 0.18}),
        make_spec(99, "distractor", {0.0}, Rule::None, {0.10, 0.30}),
    };
    return t;
}

CategoryTable load_category_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("category table: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("category table: " + std::string(e.what()));
    }
    CategoryTable table;
    try {
        for (const auto& jc : j.at("categories")) {
            CategorySpec s;
            s.class_id = jc.at("class_id").get<int>();
            s.name = jc.at("name").get<std::string>();
            const auto axis = jc.at("symmetry_axis");
            s.symmetry_axis = {axis.at(0).get<double>(), axis.at(1).get<double>(),
                               axis.at(2).get<double>()};
            s.theta_deg = jc.at("theta_deg").get<std::vector<double>>();
            const std::string rule = jc.value("conditional_rule", "none");
            if (rule == "mug-handle")
                s.rule = CategorySpec::ConditionalRule::MugHandle;
            else if (rule != "none")
                throw ParseError("category table: unknown conditional_rule " + rule);
            if (jc.contains("scale_range_m")) {
                s.scale_range_m = {jc.at("scale_range_m").at(0).get<double>(),
                                   jc.at("scale_range_m").at(1).get<double>()};
            }
            s.validate();
            table.specs.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError("category table: " + std::string(e.what()));
    }
    if (table.specs.empty()) throw ParseError("category table: no categories");
    return table;
}

void save_category_table(const std::string& path, const CategoryTable& table) {
    json j;
    j["categories"] = json::array();
    for (const auto& s : table.specs) {
        json jc;
        jc["class_id"] = s.class_id;
        jc["name"] = s.name;
        jc["symmetry_axis"] = {s.symmetry_axis.x(), s.symmetry_axis.y(), s.symmetry_axis.z()};
        jc["theta_deg"] = s.theta_deg;
        jc["conditional_rule"] =
            s.rule == CategorySpec::ConditionalRule::MugHandle ? "mug-handle" : "none";
        jc["scale_range_m"] = {s.scale_range_m[0], s.scale_range_m[1]};
        j["categories"].push_back(std::move(jc));
    }
    io::atomic_write(path, j.dump(2) + "\n");
}

}  // namespace nocs
