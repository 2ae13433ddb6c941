// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "ipt/common.hpp"

namespace ipt {

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void grow(const Vec3& p) {
        lo = min(lo, p);
        hi = max(hi, p);
    }
    void grow(const Aabb& b) {
        lo = min(lo, b.lo);
        hi = max(hi, b.hi);
    }

    double surface_area() const {
        Vec3 d = hi - lo;
        if (d.x < 0.0 || d.y < 0.0 || d.z < 0.0)
            return 0.0;
        return 2.0 * (d.x * d.y + d.y * d.z + d.z * d.x);
    }

    Vec3 centroid() const { return (lo + hi) * 0.5; }

    // Slab test against [t_min, t_max]; conservative on boundaries.
    bool hit(const Vec3& origin, const Vec3& inv_dir, double t_min, double t_max) const {
        for (int a = 0; a < 3; ++a) {
            double t0 = (lo[a] - origin[a]) * inv_dir[a];
            double t1 = (hi[a] - origin[a]) * inv_dir[a];
            if (inv_dir[a] < 0.0)
                std::swap(t0, t1);
            t_min = std::max(t_min, t0);
            t_max = std::min(t_max, t1);
            if (t_max < t_min)
                return false;
        }
        return true;
    }
};

// Binary BVH over triangle indices, binned-SAH build, iterative traversal.
// Leaves hold ranges of a reordered primitive index list.
class Bvh {
  public:
    struct Node {
        Aabb box;
        int32_t first = 0;  // leaf: offset into prim_indices; interior: left child
        int32_t count = 0;  // leaf: primitive count; 0 for interior
        int32_t right = 0;  // interior: right child
    };

    void build(const std::vector<Aabb>& prim_bounds) {
        prim_indices_.resize(prim_bounds.size());
        for (std::size_t i = 0; i < prim_indices_.size(); ++i)
            prim_indices_[i] = static_cast<int32_t>(i);
        nodes_.clear();
        if (prim_bounds.empty())
            return;
        nodes_.reserve(2 * prim_bounds.size());
        build_node(prim_bounds, 0, static_cast<int32_t>(prim_bounds.size()));
    }

    bool empty() const { return nodes_.empty(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int32_t>& prim_indices() const { return prim_indices_; }

    // Visits every leaf range whose box overlaps the ray; `leaf_fn` may shrink
    // t_max by returning the current nearest distance.
    template <typename LeafFn>
    void traverse(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                  LeafFn&& leaf_fn) const {
        if (nodes_.empty())
            return;
        Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
        int32_t stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!node.box.hit(origin, inv_dir, t_min, t_max))
                continue;
            if (node.count > 0) {
                t_max = leaf_fn(node.first, node.count, t_max);
            } else {
                stack[sp++] = node.right;
                stack[sp++] = node.first;
            }
        }
    }

  private:
    static constexpr int kLeafSize = 4;
    static constexpr int kBins = 16;

    int32_t build_node(const std::vector<Aabb>& prim_bounds, int32_t begin, int32_t end) {
        int32_t node_index = static_cast<int32_t>(nodes_.size());
        nodes_.emplace_back();

        Aabb bounds, centroid_bounds;
        for (int32_t i = begin; i < end; ++i) {
            bounds.grow(prim_bounds[prim_indices_[i]]);
            centroid_bounds.grow(prim_bounds[prim_indices_[i]].centroid());
        }
        nodes_[node_index].box = bounds;

        int32_t count = end - begin;
        Vec3 extent = centroid_bounds.hi - centroid_bounds.lo;
        int axis = 0;
        if (extent.y > extent.x)
            axis = 1;
        if (extent.z > extent[axis])
            axis = 2;

        if (count <= kLeafSize || extent[axis] <= 0.0) {
            nodes_[node_index].first = begin;
            nodes_[node_index].count = count;
            return node_index;
        }

        // Binned SAH along the widest centroid axis; fall back to median split
        // when SAH cannot beat a leaf.
        struct Bin {
            Aabb box;
            int32_t count = 0;
        };
        Bin bins[kBins];
        double inv_extent = kBins / extent[axis];
        auto bin_of = [&](int32_t prim) {
            double c = prim_bounds[prim].centroid()[axis] - centroid_bounds.lo[axis];
            int b = static_cast<int>(c * inv_extent);
            return std::clamp(b, 0, kBins - 1);
        };
        for (int32_t i = begin; i < end; ++i) {
            int b = bin_of(prim_indices_[i]);
            bins[b].box.grow(prim_bounds[prim_indices_[i]]);
            bins[b].count++;
        }

        double right_area[kBins];
        Aabb acc;
        int32_t acc_count = 0;
        for (int b = kBins - 1; b >= 1; --b) {
            acc.grow(bins[b].box);
            acc_count += bins[b].count;
            right_area[b] = acc_count > 0 ? acc.surface_area() * acc_count : 0.0;
        }
        double best_cost = std::numeric_limits<double>::infinity();
        int best_split = -1;
        acc = Aabb{};
        acc_count = 0;
        for (int b = 0; b + 1 < kBins; ++b) {
            acc.grow(bins[b].box);
            acc_count += bins[b].count;
            if (acc_count == 0 || acc_count == count)
                continue;
            double cost = acc.surface_area() * acc_count + right_area[b + 1];
            if (cost < best_cost) {
                best_cost = cost;
                best_split = b;
            }
        }

        auto mid_it = prim_indices_.begin() + begin;
        if (best_split >= 0) {
            mid_it = std::partition(prim_indices_.begin() + begin, prim_indices_.begin() + end,
                                    [&](int32_t prim) { return bin_of(prim) <= best_split; });
        }
        int32_t mid = static_cast<int32_t>(mid_it - prim_indices_.begin());
        if (mid == begin || mid == end) {
            mid = begin + count / 2;
            std::nth_element(prim_indices_.begin() + begin, prim_indices_.begin() + mid,
                             prim_indices_.begin() + end, [&](int32_t a, int32_t b) {
                                 return prim_bounds[a].centroid()[axis] <
                                        prim_bounds[b].centroid()[axis];
                             });
        }

        int32_t left = build_node(prim_bounds, begin, mid);
        int32_t right = build_node(prim_bounds, mid, end);
        nodes_[node_index].first = left;
        nodes_[node_index].count = 0;
        nodes_[node_index].right = right;
        return node_index;
    }

    std::vector<Node> nodes_;
    std::vector<int32_t> prim_indices_;
};

}  // namespace ipt
