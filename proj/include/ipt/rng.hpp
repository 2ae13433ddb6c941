// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace ipt {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter-based: the value stream is a pure function of (key, counter), so any
// (pixel, iteration, sample) tuple can own a private stream and results do not
// depend on thread scheduling.
namespace philox {

constexpr std::uint32_t kW32A = 0x9E3779B9u;
constexpr std::uint32_t kW32B = 0xBB67AE85u;
constexpr std::uint32_t kM4x32A = 0xD2511F53u;
constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0), hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1), hi1 = static_cast<std::uint32_t>(p1 >> 32);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW32A;
    key[1] += kW32B;
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r)
        round_once(ctr, key);
    return ctr;
}

}  // namespace philox

// A sequential view over one Philox stream. The stream identity is
// (seed, id0, id1, id2); draws advance a block counter within the stream.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint32_t id0, std::uint32_t id1, std::uint32_t id2)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          base_{0, id0, id1, id2} {}

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        if (cache_pos_ == 2)
            refill();
        std::uint64_t bits = cache_[cache_pos_++];
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    std::uint32_t next_u32() {
        if (cache_pos_ == 2)
            refill();
        return static_cast<std::uint32_t>(cache_[cache_pos_++]);
    }

  private:
    void refill() {
        auto ctr = base_;
        ctr[0] = block_index_++;
        auto out = philox::block(ctr, key_);
        cache_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        cache_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        cache_pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_;
    std::uint32_t block_index_ = 0;
    std::array<std::uint64_t, 2> cache_{};
    int cache_pos_ = 2;
};

// Stream id allocation. One stream per (image, pixel, iteration, purpose,
// sample); purposes keep color/gradient estimates on disjoint substreams.
enum class StreamPurpose : std::uint32_t {
    Color = 0,
    Gradient = 1,
    BatchSampling = 2,
    ErrorRender = 3,
    Generic = 4,
};

struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t image = 0;
    std::uint32_t iteration = 0;
    StreamPurpose purpose = StreamPurpose::Color;
};

inline RngStream make_stream(const StreamKey& key, std::uint32_t pixel, std::uint32_t sample) {
    std::uint32_t id2 = (static_cast<std::uint32_t>(key.purpose) << 28) | (key.image << 20) |
                        (sample & 0xFFFFFu);
    return RngStream(key.seed, pixel, key.iteration, id2);
}

}  // namespace ipt
