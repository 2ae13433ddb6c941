// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ipt/common.hpp"
#include "ipt/params.hpp"
#include "ipt/scene.hpp"

namespace ipt {

constexpr double kDegenerateAreaThreshold = 1e-12;  // m^2

namespace detail {

struct ObjFace {
    int v[3];
    int n[3];  // -1 when the face carries no normals
    int object_id;
    int line;
};

// One vertex-index token: "12" or "12//4". Texture coordinates and negative
// indices are outside the supported subset.
inline void parse_face_token(const std::string& tok, int line, int& v, int& n) {
    auto fail = [&](const std::string& why) {
        throw InputError("OBJ line " + std::to_string(line) + ": " + why + " in \"" + tok + "\"");
    };
    std::size_t slash = tok.find('/');
    try {
        if (slash == std::string::npos) {
            v = std::stoi(tok);
            n = 0;
            return;
        }
        if (slash + 1 >= tok.size() || tok[slash + 1] != '/')
            fail("texture coordinates are not supported (use v or v//vn)");
        v = std::stoi(tok.substr(0, slash));
        n = std::stoi(tok.substr(slash + 2));
    } catch (const InputError&) {
        throw;
    } catch (const std::exception&) {
        fail("malformed index");
    }
    if (v <= 0 || n <= 0)
        fail("indices must be positive (relative indexing unsupported)");
}

}  // namespace detail

// Loads the OBJ subset: v, vn, f (triangles, v or v//vn), o/g object starts.
// Quads, materials and other directives are rejected. Degenerate triangles
// (area below 1e-12) are dropped and counted in the returned scene's
// load_stats. Missing normals are filled with area-weighted face normal
// averages.
inline Scene load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError(path + ": cannot open mesh file");

    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    std::vector<detail::ObjFace> faces;
    std::vector<std::string> object_names;
    std::unordered_map<std::string, int> object_index;
    int current_object = -1;
    bool any_face_normals = false, any_face_bare = false;

    std::string line_text;
    int line = 0;
    while (std::getline(in, line_text)) {
        ++line;
        std::istringstream ls(line_text);
        std::string keyword;
        if (!(ls >> keyword) || keyword[0] == '#')
            continue;
        if (keyword == "v" || keyword == "vn") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw InputError(path + ": OBJ line " + std::to_string(line) +
                                 ": expected three coordinates");
            (keyword == "v" ? positions : normals).push_back({x, y, z});
        } else if (keyword == "o" || keyword == "g") {
            std::string name;
            ls >> name;
            if (name.empty())
                name = "unnamed";
            auto it = object_index.find(name);
            if (it == object_index.end()) {
                current_object = static_cast<int>(object_names.size());
                object_index.emplace(name, current_object);
                object_names.push_back(name);
            } else {
                current_object = it->second;
            }
        } else if (keyword == "f") {
            std::vector<std::string> toks;
            std::string tok;
            while (ls >> tok)
                toks.push_back(tok);
            if (toks.size() != 3)
                throw InputError(path + ": OBJ line " + std::to_string(line) +
                                 ": only triangle faces are supported (got " +
                                 std::to_string(toks.size()) + " vertices)");
            if (current_object < 0) {
                current_object = static_cast<int>(object_names.size());
                object_index.emplace("default", current_object);
                object_names.push_back("default");
            }
            detail::ObjFace face;
            face.object_id = current_object;
            face.line = line;
            for (int k = 0; k < 3; ++k) {
                int v, n;
                detail::parse_face_token(toks[k], line, v, n);
                face.v[k] = v;
                face.n[k] = n;
            }
            bool has_normals = face.n[0] > 0;
            if ((face.n[1] > 0) != has_normals || (face.n[2] > 0) != has_normals)
                throw InputError(path + ": OBJ line " + std::to_string(line) +
                                 ": mixed v and v//vn indexing within one face");
            (has_normals ? any_face_normals : any_face_bare) = true;
            faces.push_back(face);
        } else if (keyword == "usemtl" || keyword == "mtllib") {
            throw InputError(path + ": OBJ line " + std::to_string(line) + ": \"" + keyword +
                             "\" is not supported (materials come from the scene config)");
        } else {
            throw InputError(path + ": OBJ line " + std::to_string(line) +
                             ": unsupported directive \"" + keyword + "\"");
        }
    }
    if (any_face_normals && any_face_bare)
        throw InputError(path + ": some faces use v//vn indexing and some do not");

    // Validate indices up front so out-of-range errors beat degeneracy drops.
    for (const auto& face : faces) {
        for (int k = 0; k < 3; ++k) {
            if (face.v[k] > static_cast<int>(positions.size()))
                throw InputError(path + ": OBJ line " + std::to_string(face.line) +
                                 ": out-of-range vertex index " + std::to_string(face.v[k]) +
                                 " (file has " + std::to_string(positions.size()) + " vertices)");
            if (face.n[k] > static_cast<int>(normals.size()))
                throw InputError(path + ": OBJ line " + std::to_string(face.line) +
                                 ": out-of-range normal index " + std::to_string(face.n[k]));
        }
    }

    Scene scene;
    scene.objects.resize(object_names.size());
    for (std::size_t i = 0; i < object_names.size(); ++i)
        scene.objects[i].name = object_names[i];

    // Deduplicate (position, normal) pairs into the final vertex list.
    std::map<std::pair<int, int>, int32_t> vertex_cache;
    auto vertex_for = [&](int v, int n) {
        auto key = std::make_pair(v, n);
        auto it = vertex_cache.find(key);
        if (it != vertex_cache.end())
            return it->second;
        Vertex vert;
        vert.position = positions[v - 1];
        vert.normal = n > 0 ? normals[n - 1] : Vec3{0.0, 0.0, 0.0};
        scene.vertices.push_back(vert);
        int32_t idx = static_cast<int32_t>(scene.vertices.size() - 1);
        vertex_cache.emplace(key, idx);
        return idx;
    };

    for (const auto& face : faces) {
        Triangle tri;
        for (int k = 0; k < 3; ++k)
            tri.v[k] = vertex_for(face.v[k], face.n[k]);
        tri.object_id = face.object_id;
        Vec3 e1 = scene.vertices[tri.v[1]].position - scene.vertices[tri.v[0]].position;
        Vec3 e2 = scene.vertices[tri.v[2]].position - scene.vertices[tri.v[0]].position;
        tri.area = 0.5 * length(cross(e1, e2));
        if (tri.area < kDegenerateAreaThreshold) {
            std::fprintf(stderr, "warning: %s: dropping degenerate triangle at OBJ line %d\n",
                         path.c_str(), face.line);
            ++scene.load_stats.dropped_degenerate;
            continue;
        }
        scene.objects[tri.object_id].triangles.push_back(
            static_cast<int32_t>(scene.triangles.size()));
        scene.triangles.push_back(tri);
    }

    for (const auto& obj : scene.objects)
        if (obj.triangles.empty())
            throw InputError(path + ": object \"" + obj.name + "\" has zero triangles");

    if (!any_face_normals) {
        // Area-weighted face normal average; the unnormalized cross product of
        // the edges already carries the area weight.
        for (const auto& tri : scene.triangles) {
            Vec3 e1 = scene.vertices[tri.v[1]].position - scene.vertices[tri.v[0]].position;
            Vec3 e2 = scene.vertices[tri.v[2]].position - scene.vertices[tri.v[0]].position;
            Vec3 weighted = cross(e1, e2);
            for (int k = 0; k < 3; ++k)
                scene.vertices[tri.v[k]].normal += weighted;
        }
    }
    for (auto& vert : scene.vertices) {
        double len = length(vert.normal);
        vert.normal = len > 1e-20 ? vert.normal / len : Vec3{0.0, 0.0, 1.0};
    }

    scene.commit();
    return scene;
}

struct SceneBundle {
    Scene scene;
    std::map<std::string, ObjectParams> object_params;  // ground-truth/initial values
};

namespace detail {

inline RGB rgb_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3)
        throw InputError(what + ": expected an array of three numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Camera camera_from_json(const nlohmann::json& j, const std::string& what) {
    Camera cam;
    if (!j.contains("pose") || !j["pose"].is_array() || j["pose"].size() != 16)
        throw InputError(what + ": camera needs a 16-element row-major \"pose\"");
    for (int i = 0; i < 16; ++i)
        cam.pose.m[i] = j["pose"][i].get<double>();
    double fov_deg = j.at("fov_y_deg").get<double>();
    cam.fov_y = fov_deg * kPi / 180.0;
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    if (!(cam.fov_y > 0.0 && cam.fov_y < kPi))
        throw InputError(what + ": fov_y_deg must be in (0, 180)");
    if (cam.width < 1 || cam.height < 1)
        throw InputError(what + ": resolution must be at least 1x1");
    return cam;
}

}  // namespace detail

// Scene config JSON: mesh path (optional when given explicitly), cameras, and
// per-object parameter table.
inline SceneBundle load_scene(const std::string& mesh_path, const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in)
        throw InputError(config_path + ": cannot open scene config");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(config_path + ": invalid JSON: " + e.what());
    }

    std::string mesh = mesh_path;
    if (mesh.empty()) {
        if (!j.contains("mesh"))
            throw InputError(config_path + ": no mesh path given and config has no \"mesh\"");
        std::filesystem::path rel = j["mesh"].get<std::string>();
        mesh = rel.is_absolute()
                   ? rel.string()
                   : (std::filesystem::path(config_path).parent_path() / rel).string();
    }

    SceneBundle bundle;
    bundle.scene = load_obj(mesh);

    if (j.contains("cameras")) {
        int index = 0;
        for (const auto& cj : j["cameras"]) {
            bundle.scene.cameras.push_back(
                detail::camera_from_json(cj, config_path + ": camera " + std::to_string(index)));
            ++index;
        }
    }

    if (j.contains("objects")) {
        for (const auto& [name, oj] : j["objects"].items()) {
            bool known = false;
            for (const auto& obj : bundle.scene.objects)
                known = known || obj.name == name;
            if (!known)
                throw InputError(config_path + ": config object \"" + name +
                                 "\" does not exist in the mesh");
            ObjectParams op;
            if (oj.contains("base_color"))
                op.material.base_color =
                    detail::rgb_from_json(oj["base_color"], config_path + ": " + name);
            if (oj.contains("roughness"))
                op.material.roughness = oj["roughness"].get<double>();
            if (oj.contains("emission"))
                op.emission.flux = detail::rgb_from_json(oj["emission"], config_path + ": " + name);
            bundle.object_params.emplace(name, op);
        }
    }
    return bundle;
}

}  // namespace ipt
