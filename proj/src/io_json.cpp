#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nocs/io.hpp"

namespace nocs::io {

namespace {

using nlohmann::json;

json pose_to_json(const geom::SimilarityTransform& pose) {
    json j;
    j["s"] = pose.s;
    json r = json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(pose.R(i, k));  // row-major
    j["R"] = std::move(r);
    j["t"] = {pose.t.x(), pose.t.y(), pose.t.z()};
    return j;
}

geom::SimilarityTransform pose_from_json(const json& j) {
    geom::SimilarityTransform pose;
    pose.s = j.at("s").get<double>();
    const auto& r = j.at("R");
    if (r.size() != 9) throw ParseError("pose: R must hold 9 row-major entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) pose.R(i, k) = r.at(i * 3 + k).get<double>();
    const auto& t = j.at("t");
    pose.t = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    pose.validate(1e-6);  // serialized rotations carry print precision
    return pose;
}

Eigen::Vector3d vec3_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json vec3_to_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ParseError(std::string(what) + ": cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what() + " in " + path);
    }
}

}  // namespace

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ParseError("cannot create " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ParseError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

geom::Intrinsics load_intrinsics(const std::string& path) {
    const json j = load_json_file(path, "intrinsics");
    geom::Intrinsics intr;
    try {
        intr.fx = j.at("fx").get<double>();
        intr.fy = j.at("fy").get<double>();
        intr.cx = j.at("cx").get<double>();
        intr.cy = j.at("cy").get<double>();
        intr.width = j.at("width").get<int>();
        intr.height = j.at("height").get<int>();
    } catch (const json::exception& e) {
        throw ParseError("intrinsics: " + std::string(e.what()));
    }
    intr.validate();
    return intr;
}

void save_intrinsics(const std::string& path, const geom::Intrinsics& intr) {
    json j;
    j["fx"] = intr.fx;
    j["fy"] = intr.fy;
    j["cx"] = intr.cx;
    j["cy"] = intr.cy;
    j["width"] = intr.width;
    j["height"] = intr.height;
    atomic_write(path, j.dump(2) + "\n");
}

SceneMetadata load_scene(const std::string& path) {
    const json j = load_json_file(path, "scene");
    SceneMetadata scene;
    try {
        scene.image_id = j.at("image_id").get<std::string>();
        if (j.contains("intrinsics")) {
            const auto& ji = j.at("intrinsics");
            geom::Intrinsics intr;
            intr.fx = ji.at("fx").get<double>();
            intr.fy = ji.at("fy").get<double>();
            intr.cx = ji.at("cx").get<double>();
            intr.cy = ji.at("cy").get<double>();
            intr.width = ji.at("width").get<int>();
            intr.height = ji.at("height").get<int>();
            intr.validate();
            scene.intrinsics = intr;
        }
        for (const auto& ji : j.at("instances")) {
            SceneMetadata::Instance inst;
            inst.class_id = ji.at("class_id").get<int>();
            inst.instance_id = static_cast<uint8_t>(ji.at("instance_id").get<int>());
            inst.mesh_path = ji.value("mesh", "");
            inst.pose = pose_from_json(ji.at("pose"));
            if (ji.contains("dimensions")) inst.dimensions = vec3_from_json(ji.at("dimensions"));
            if (ji.contains("nocs_extents"))
                inst.nocs_extents = vec3_from_json(ji.at("nocs_extents"));
            if (ji.contains("handle_visible") && !ji.at("handle_visible").is_null())
                inst.handle_visible = ji.at("handle_visible").get<bool>();
            scene.instances.push_back(std::move(inst));
        }
    } catch (const json::exception& e) {
        throw ParseError("scene: " + std::string(e.what()) + " in " + path);
    }
    return scene;
}

void save_scene(const std::string& path, const SceneMetadata& scene) {
    json j;
    j["image_id"] = scene.image_id;
    if (scene.intrinsics) {
        json ji;
        ji["fx"] = scene.intrinsics->fx;
        ji["fy"] = scene.intrinsics->fy;
        ji["cx"] = scene.intrinsics->cx;
        ji["cy"] = scene.intrinsics->cy;
        ji["width"] = scene.intrinsics->width;
        ji["height"] = scene.intrinsics->height;
        j["intrinsics"] = std::move(ji);
    }
    j["instances"] = json::array();
    for (const auto& inst : scene.instances) {
        json ji;
        ji["class_id"] = inst.class_id;
        ji["instance_id"] = static_cast<int>(inst.instance_id);
        if (!inst.mesh_path.empty()) ji["mesh"] = inst.mesh_path;
        ji["pose"] = pose_to_json(inst.pose);
        ji["dimensions"] = vec3_to_json(inst.dimensions);
        ji["nocs_extents"] = vec3_to_json(inst.nocs_extents);
        if (inst.handle_visible) ji["handle_visible"] = *inst.handle_visible;
        j["instances"].push_back(std::move(ji));
    }
    atomic_write(path, j.dump(2) + "\n");
}

PredictionFile load_predictions(const std::string& path) {
    const json j = load_json_file(path, "predictions");
    PredictionFile pred;
    try {
        pred.image_id = j.at("image_id").get<std::string>();
        for (const auto& jd : j.at("detections")) {
            PredictionFile::Detection det;
            det.class_id = jd.at("class_id").get<int>();
            det.score = jd.at("score").get<double>();
            det.pose = pose_from_json(jd.at("pose"));
            det.dimensions = vec3_from_json(jd.at("dimensions"));
            det.inlier_count = jd.value("inlier_count", 0);
            det.rmse = jd.value("rmse", 0.0);
            if (jd.contains("box2d")) {
                const auto& b = jd.at("box2d");
                det.box2d = {{b.at(0).get<double>(), b.at(1).get<double>(),
                              b.at(2).get<double>(), b.at(3).get<double>()}};
            }
            pred.detections.push_back(std::move(det));
        }
    } catch (const json::exception& e) {
        throw ParseError("predictions: " + std::string(e.what()) + " in " + path);
    }
    return pred;
}

void save_predictions(const std::string& path, const PredictionFile& pred) {
    json j;
    j["image_id"] = pred.image_id;
    j["detections"] = json::array();
    for (const auto& det : pred.detections) {
        json jd;
        jd["class_id"] = det.class_id;
        jd["score"] = det.score;
        jd["pose"] = pose_to_json(det.pose);
        jd["dimensions"] = vec3_to_json(det.dimensions);
        jd["inlier_count"] = det.inlier_count;
        jd["rmse"] = det.rmse;
        if (det.box2d)
            jd["box2d"] = {(*det.box2d)[0], (*det.box2d)[1], (*det.box2d)[2], (*det.box2d)[3]};
        j["detections"].push_back(std::move(jd));
    }
    atomic_write(path, j.dump(2) + "\n");
}

ProbabilityMap read_probability_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("probability tensor: cannot open " + path);
    char magic[8] = {};
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "NOCSPRB1", 8) != 0)
        throw ParseError("probability tensor: bad magic in " + path);
    uint32_t w = 0, h = 0, b = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&b), 4);
    if (!in || w == 0 || h == 0 || b == 0 || w > 1 << 16 || h > 1 << 16 || b > 4096)
        throw ParseError("probability tensor: implausible header in " + path);
    ProbabilityMap map(static_cast<int>(w), static_cast<int>(h), static_cast<int>(b));
    in.read(reinterpret_cast<char*>(map.p.data()),
            static_cast<std::streamsize>(map.p.size() * sizeof(float)));
    if (!in) throw ParseError("probability tensor: truncated data in " + path);
    return map;
}

void write_probability_tensor(const std::string& path, const ProbabilityMap& map) {
    std::string bytes;
    bytes.reserve(20 + map.p.size() * sizeof(float));
    bytes.append("NOCSPRB1", 8);
    const uint32_t w = map.width, h = map.height, b = map.bins;
    bytes.append(reinterpret_cast<const char*>(&w), 4);
    bytes.append(reinterpret_cast<const char*>(&h), 4);
    bytes.append(reinterpret_cast<const char*>(&b), 4);
    bytes.append(reinterpret_cast<const char*>(map.p.data()), map.p.size() * sizeof(float));
    atomic_write(path, bytes);
}

}  // namespace nocs::io
