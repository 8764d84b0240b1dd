#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nocs/io.hpp"

namespace nocs::io {

namespace {

using nlohmann::json;

// "3", "3/1", "3/1/2", "3//2" -> vertex index (1-based in the file).
int parse_face_index(const std::string& token, size_t vertex_count, const std::string& path) {
    const size_t slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    int idx = 0;
    const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
    if (res.ec != std::errc{} || res.ptr != head.data() + head.size())
        throw ParseError("obj: bad face index '" + token + "' in " + path);
    if (idx < 0) idx = static_cast<int>(vertex_count) + idx + 1;  // negative = relative
    if (idx < 1 || idx > static_cast<int>(vertex_count))
        throw ParseError("obj: face index out of range in " + path);
    return idx - 1;
}

}  // namespace

canonical::Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("obj: cannot open " + path);

    canonical::Mesh mesh;
    bool in_handle_group = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;

        if (tag == "v") {
            Eigen::Vector3d v;
            if (!(ls >> v.x() >> v.y() >> v.z()))
                throw ParseError("obj: bad vertex at " + path + ":" + std::to_string(line_no));
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::string> tokens;
            std::string tok;
            while (ls >> tok) tokens.push_back(tok);
            if (tokens.size() != 3)
                throw ParseError("obj: non-triangle face at " + path + ":" +
                                 std::to_string(line_no) + " (input must be triangulated)");
            std::array<int, 3> tri{};
            for (int k = 0; k < 3; ++k)
                tri[k] = parse_face_index(tokens[k], mesh.vertices.size(), path);
            mesh.triangles.push_back(tri);
            if (in_handle_group)
                mesh.handle_triangles.push_back(static_cast<int>(mesh.triangles.size()) - 1);
        } else if (tag == "g") {
            std::string name;
            ls >> name;
            in_handle_group = (name == "handle");
        }
        // vn / vt / o / s / mtllib / usemtl records are ignored.
    }
    mesh.validate();
    return mesh;
}

void save_obj(const std::string& path, const canonical::Mesh& mesh) {
    mesh.validate();
    std::ostringstream out;
    out.precision(17);
    for (const auto& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";

    std::vector<char> is_handle(mesh.triangles.size(), 0);
    for (int t : mesh.handle_triangles) is_handle[t] = 1;

    bool in_handle_group = false;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        if (bool(is_handle[t]) != in_handle_group) {
            in_handle_group = is_handle[t];
            out << "g " << (in_handle_group ? "handle" : "body") << "\n";
        }
        const auto& tri = mesh.triangles[t];
        out << "f " << tri[0] + 1 << " " << tri[1] + 1 << " " << tri[2] + 1 << "\n";
    }
    atomic_write(path, out.str());
}

std::string sidecar_path(const std::string& obj_path) {
    std::filesystem::path p(obj_path);
    p.replace_extension(".meta.json");
    return p.string();
}

void save_canonical_mesh(const std::string& obj_path, const canonical::CanonicalMesh& mesh) {
    save_obj(obj_path, mesh.mesh);
    json j;
    j["source_scale"] = mesh.source_scale;
    j["nocs_extents"] = {mesh.nocs_extents.x(), mesh.nocs_extents.y(), mesh.nocs_extents.z()};
    atomic_write(sidecar_path(obj_path), j.dump(2) + "\n");
}

canonical::CanonicalMesh load_canonical_mesh(const std::string& obj_path) {
    canonical::CanonicalMesh out;
    out.mesh = load_obj(obj_path);

    std::ifstream in(sidecar_path(obj_path));
    if (!in) throw ParseError("canonical mesh: missing sidecar " + sidecar_path(obj_path));
    json j;
    try {
        in >> j;
        out.source_scale = j.at("source_scale").get<double>();
        const auto& e = j.at("nocs_extents");
        out.nocs_extents = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
    } catch (const json::exception& e) {
        throw ParseError("canonical mesh sidecar: " + std::string(e.what()));
    }
    return out;
}

}  // namespace nocs::io
