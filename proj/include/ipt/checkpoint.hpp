// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "ipt/params.hpp"

namespace ipt {

// Parameter checkpoint. Doubles are serialized with shortest-round-trip
// formatting, so save -> load -> save is byte-identical.
inline nlohmann::json checkpoint_to_json(const ParameterSet& params) {
    nlohmann::json j;
    j["phase"] = phase_name(params.phase());
    j["objects"] = params.object_names();

    nlohmann::json materials = nlohmann::json::array();
    for (int32_t e = 0; e < params.material_entity_count(); ++e) {
        MaterialParams m = params.material(e);
        materials.push_back({{"base_color", {m.base_color.x, m.base_color.y, m.base_color.z}},
                             {"roughness", m.roughness}});
    }
    j["materials"] = materials;

    nlohmann::json emissions = nlohmann::json::array();
    for (int32_t o = 0; o < params.object_count(); ++o) {
        EmissionParams e = params.emission(o);
        emissions.push_back({e.flux.x, e.flux.y, e.flux.z});
    }
    j["emissions"] = emissions;
    j["triangle_entities"] = params.triangle_entities();
    return j;
}

inline void save_checkpoint(const ParameterSet& params, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw InputError(path + ": cannot open for writing");
    out << checkpoint_to_json(params).dump(2) << "\n";
}

// Loads a checkpoint against a scene. The scene fixes the entity layout; the
// checkpoint must agree with it.
inline ParameterSet load_checkpoint(const Scene& scene, const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError(path + ": cannot open checkpoint");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": invalid JSON: " + e.what());
    }

    std::string phase_str = j.at("phase").get<std::string>();
    Phase phase;
    if (phase_str == "per_object")
        phase = Phase::PerObject;
    else if (phase_str == "per_triangle")
        phase = Phase::PerTriangle;
    else
        throw InputError(path + ": unknown phase \"" + phase_str + "\"");

    ParameterSet params = ParameterSet::zeros(scene, phase);
    if (j.at("materials").size() != static_cast<std::size_t>(params.material_entity_count()))
        throw InputError(path + ": checkpoint has " + std::to_string(j.at("materials").size()) +
                         " material entities but the scene needs " +
                         std::to_string(params.material_entity_count()));
    if (j.at("emissions").size() != static_cast<std::size_t>(params.object_count()))
        throw InputError(path + ": emission entity count mismatch");

    for (int32_t e = 0; e < params.material_entity_count(); ++e) {
        const auto& mj = j["materials"][e];
        MaterialParams m;
        m.base_color = {mj.at("base_color")[0].get<double>(),
                        mj.at("base_color")[1].get<double>(),
                        mj.at("base_color")[2].get<double>()};
        m.roughness = mj.at("roughness").get<double>();
        params.set_material(e, m);
    }
    for (int32_t o = 0; o < params.object_count(); ++o) {
        const auto& ej = j["emissions"][o];
        params.set_emission(o, {{ej[0].get<double>(), ej[1].get<double>(), ej[2].get<double>()}});
    }
    return params;
}

// Area-weighted mean absolute base-color difference over material entities.
// Weights are entity surface areas (objects or triangles, by phase).
inline double albedo_l1(const ParameterSet& a, const ParameterSet& b,
                        const std::vector<double>& entity_areas) {
    if (a.material_entity_count() != b.material_entity_count() ||
        static_cast<int32_t>(entity_areas.size()) != a.material_entity_count())
        throw InputError("albedo_l1: entity count mismatch");
    double num = 0.0, denom = 0.0;
    for (int32_t e = 0; e < a.material_entity_count(); ++e) {
        RGB d = a.material(e).base_color - b.material(e).base_color;
        double mean_abs = (std::abs(d.x) + std::abs(d.y) + std::abs(d.z)) / 3.0;
        num += entity_areas[e] * mean_abs;
        denom += entity_areas[e];
    }
    return denom > 0.0 ? num / denom : 0.0;
}

inline std::vector<double> material_entity_areas(const Scene& scene, const ParameterSet& params) {
    std::vector<double> areas(params.material_entity_count(), 0.0);
    for (std::size_t t = 0; t < scene.triangles.size(); ++t)
        areas[params.material_entity_of_triangle(static_cast<int32_t>(t))] +=
            scene.triangles[t].area;
    return areas;
}

}  // namespace ipt
