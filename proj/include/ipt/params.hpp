// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ipt/common.hpp"
#include "ipt/materials.hpp"
#include "ipt/scene.hpp"

namespace ipt {

// Which scalar of an entity a parameter slot addresses. Base color and
// roughness belong to material entities (objects in the coarse phase,
// triangles in the refined phase); emission always belongs to objects.
enum class ParamKind : int32_t {
    BaseR = 0,
    BaseG = 1,
    BaseB = 2,
    Roughness = 3,
    EmissionR = 4,
    EmissionG = 5,
    EmissionB = 6,
};

struct ParameterIndex {
    int32_t entity = 0;
    ParamKind kind = ParamKind::BaseR;

    bool operator==(const ParameterIndex&) const = default;
};

enum class Phase { PerObject, PerTriangle };

inline const char* phase_name(Phase p) {
    return p == Phase::PerObject ? "per_object" : "per_triangle";
}

// Ground-truth / initial values attached to one object in the scene config.
struct ObjectParams {
    MaterialParams material;
    EmissionParams emission;
};

// Dense unknown vector plus the (entity, kind) <-> slot bijection.
// Layout: [material entity 0: baseR baseG baseB rough][entity 1: ...] ...
//         [object 0: emR emG emB][object 1: ...] ...
class ParameterSet {
  public:
    ParameterSet() = default;

    static ParameterSet zeros(const Scene& scene, Phase phase) {
        ParameterSet p;
        p.phase_ = phase;
        p.n_objects_ = static_cast<int32_t>(scene.objects.size());
        p.n_material_entities_ = phase == Phase::PerObject
                                     ? p.n_objects_
                                     : static_cast<int32_t>(scene.triangles.size());
        p.tri_material_entity_.resize(scene.triangles.size());
        for (std::size_t t = 0; t < scene.triangles.size(); ++t)
            p.tri_material_entity_[t] = phase == Phase::PerObject
                                            ? scene.triangles[t].object_id
                                            : static_cast<int32_t>(t);
        p.object_names_.reserve(scene.objects.size());
        for (const auto& obj : scene.objects)
            p.object_names_.push_back(obj.name);
        p.values_.assign(static_cast<std::size_t>(4) * p.n_material_entities_ +
                             static_cast<std::size_t>(3) * p.n_objects_,
                         0.0);
        return p;
    }

    static ParameterSet from_object_params(const Scene& scene,
                                           const std::map<std::string, ObjectParams>& table) {
        ParameterSet p = zeros(scene, Phase::PerObject);
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            auto it = table.find(scene.objects[o].name);
            if (it == table.end())
                continue;
            p.set_material(static_cast<int32_t>(o), it->second.material);
            p.set_emission(static_cast<int32_t>(o), it->second.emission);
        }
        return p;
    }

    Phase phase() const { return phase_; }
    int32_t object_count() const { return n_objects_; }
    int32_t material_entity_count() const { return n_material_entities_; }
    int32_t size() const { return static_cast<int32_t>(values_.size()); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const std::vector<std::string>& object_names() const { return object_names_; }
    const std::vector<int32_t>& triangle_entities() const { return tri_material_entity_; }

    int32_t slot(const ParameterIndex& idx) const {
        int32_t k = static_cast<int32_t>(idx.kind);
        if (k < 4)
            return idx.entity * 4 + k;
        return 4 * n_material_entities_ + idx.entity * 3 + (k - 4);
    }

    int32_t material_slot_base(int32_t material_entity) const { return material_entity * 4; }

    int32_t emission_slot_base(int32_t object) const {
        return 4 * n_material_entities_ + object * 3;
    }

    ParameterIndex index_of(int32_t slot) const {
        int32_t material_span = 4 * n_material_entities_;
        if (slot < material_span)
            return {slot / 4, static_cast<ParamKind>(slot % 4)};
        int32_t rel = slot - material_span;
        return {rel / 3, static_cast<ParamKind>(4 + rel % 3)};
    }

    int32_t material_entity_of_triangle(int32_t tri) const { return tri_material_entity_[tri]; }

    MaterialParams material(int32_t entity) const {
        const double* v = values_.data() + entity * 4;
        return {{v[0], v[1], v[2]}, v[3]};
    }

    MaterialParams material_at_triangle(int32_t tri) const {
        return material(tri_material_entity_[tri]);
    }

    EmissionParams emission(int32_t object) const {
        const double* v = values_.data() + emission_slot_base(object);
        return {{v[0], v[1], v[2]}};
    }

    void set_material(int32_t entity, const MaterialParams& m) {
        double* v = values_.data() + entity * 4;
        v[0] = m.base_color.x;
        v[1] = m.base_color.y;
        v[2] = m.base_color.z;
        v[3] = m.roughness;
    }

    void set_emission(int32_t object, const EmissionParams& e) {
        double* v = values_.data() + emission_slot_base(object);
        v[0] = e.flux.x;
        v[1] = e.flux.y;
        v[2] = e.flux.z;
    }

    // Clamp every slot to its feasible interval: materials to [0,1], emission
    // to [0, inf).
    void project() {
        int32_t material_span = 4 * n_material_entities_;
        for (int32_t i = 0; i < material_span; ++i)
            values_[i] = clamp01(values_[i]);
        for (std::size_t i = material_span; i < values_.size(); ++i)
            values_[i] = std::max(values_[i], 0.0);
    }

    // Switch material entities from objects to individual triangles, seeding
    // each triangle with its object's current values. Emission stays
    // per-object.
    ParameterSet to_per_triangle(const Scene& scene) const {
        ParameterSet p = zeros(scene, Phase::PerTriangle);
        p.object_names_ = object_names_;
        for (std::size_t t = 0; t < scene.triangles.size(); ++t)
            p.set_material(static_cast<int32_t>(t), material_at_triangle(static_cast<int32_t>(t)));
        for (int32_t o = 0; o < n_objects_; ++o)
            p.set_emission(o, emission(o));
        return p;
    }

    // Rebuild for a subdivided scene; children inherit the parent triangle's
    // material entity values.
    ParameterSet remap_for_subdivision(const Scene& new_scene,
                                       const std::vector<int32_t>& parent_of) const {
        ParameterSet p = zeros(new_scene, phase_);
        p.object_names_ = object_names_;
        if (phase_ == Phase::PerTriangle) {
            for (std::size_t t = 0; t < new_scene.triangles.size(); ++t)
                p.set_material(static_cast<int32_t>(t), material_at_triangle(parent_of[t]));
        } else {
            for (int32_t e = 0; e < n_material_entities_; ++e)
                p.set_material(e, material(e));
        }
        for (int32_t o = 0; o < n_objects_; ++o)
            p.set_emission(o, emission(o));
        return p;
    }

  private:
    Phase phase_ = Phase::PerObject;
    int32_t n_objects_ = 0;
    int32_t n_material_entities_ = 0;
    std::vector<double> values_;
    std::vector<int32_t> tri_material_entity_;
    std::vector<std::string> object_names_;
};

// Per-pixel gradient estimate: slot -> d(pixel RGB)/d(parameter). Paths touch
// only a handful of entities, so entries stay short and a flat array beats a
// hash map.
class SparseGradient {
  public:
    struct Entry {
        int32_t slot;
        RGB value;
    };

    void add(int32_t slot, const RGB& delta) {
        for (auto& e : entries_) {
            if (e.slot == slot) {
                e.value += delta;
                return;
            }
        }
        entries_.push_back({slot, delta});
    }

    void add_channel(int32_t slot, int channel, double delta) {
        RGB v(0.0);
        v[channel] = delta;
        add(slot, v);
    }

    void scale(double s) {
        for (auto& e : entries_)
            e.value *= s;
    }

    void merge(const SparseGradient& other) {
        for (const auto& e : other.entries_)
            add(e.slot, e.value);
    }

    RGB value(int32_t slot) const {
        for (const auto& e : entries_)
            if (e.slot == slot)
                return e.value;
        return RGB(0.0);
    }

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<Entry> sorted_entries() const {
        auto out = entries_;
        std::sort(out.begin(), out.end(),
                  [](const Entry& a, const Entry& b) { return a.slot < b.slot; });
        return out;
    }

    bool all_finite() const {
        for (const auto& e : entries_)
            if (!is_finite(e.value))
                return false;
        return true;
    }

  private:
    std::vector<Entry> entries_;
};

}  // namespace ipt
