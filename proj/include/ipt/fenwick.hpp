// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ipt/common.hpp"

namespace ipt {

// Binary indexed tree over non-negative sampling weights. Point assignment and
// prefix sums are O(log n); inverse-CDF sampling walks the implicit tree once.
class FenwickTree {
  public:
    FenwickTree() = default;

    explicit FenwickTree(std::size_t size) : weights_(size, 0.0), cells_(size + 1, 0.0) {
        top_bit_ = 1;
        while ((top_bit_ << 1) <= size)
            top_bit_ <<= 1;
    }

    std::size_t size() const { return weights_.size(); }

    double weight(std::size_t index) const { return weights_.at(index); }

    // Assigns weights[index] = new_weight.
    void update(std::size_t index, double new_weight) {
        if (index >= weights_.size())
            throw std::out_of_range("FenwickTree::update: index out of range");
        if (new_weight < 0.0)
            throw InputError("FenwickTree::update: negative weight");
        double delta = new_weight - weights_[index];
        weights_[index] = new_weight;
        for (std::size_t i = index + 1; i < cells_.size(); i += i & (~i + 1))
            cells_[i] += delta;
    }

    // Sum of weights[0..index] inclusive.
    double prefix_sum(std::size_t index) const {
        if (index >= weights_.size())
            throw std::out_of_range("FenwickTree::prefix_sum: index out of range");
        double sum = 0.0;
        for (std::size_t i = index + 1; i > 0; i -= i & (~i + 1))
            sum += cells_[i];
        return sum;
    }

    double total() const { return weights_.empty() ? 0.0 : prefix_sum(weights_.size() - 1); }

    // Smallest index i with prefix_sum(i) > u * total(). Requires total() > 0;
    // zero-weight entries are never returned.
    std::size_t sample(double u) const {
        double tot = total();
        if (!(tot > 0.0))
            throw std::runtime_error("FenwickTree::sample: no emitters (total weight is zero)");
        double target = u * tot;
        std::size_t pos = 0;
        double acc = 0.0;
        for (std::size_t bit = top_bit_; bit > 0; bit >>= 1) {
            std::size_t next = pos + bit;
            if (next < cells_.size() && acc + cells_[next] <= target) {
                pos = next;
                acc += cells_[next];
            }
        }
        // pos counts entries whose cumulative weight is <= target. Rounding can
        // push target to total() when u is within an ulp of 1; fall back to the
        // last positive-weight entry in that case.
        if (pos >= weights_.size() || weights_[pos] <= 0.0) {
            pos = std::min(pos, weights_.size() - 1);
            while (pos > 0 && weights_[pos] <= 0.0)
                --pos;
        }
        return pos;
    }

  private:
    std::vector<double> weights_;
    std::vector<double> cells_;  // 1-based implicit tree
    std::size_t top_bit_ = 1;
};

}  // namespace ipt
