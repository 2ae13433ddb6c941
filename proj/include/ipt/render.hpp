// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ipt/imaging.hpp"
#include "ipt/parallel.hpp"
#include "ipt/transport.hpp"

namespace ipt {

// Full-frame render with paths_per_pixel_color paths per pixel. Each pixel
// owns its streams and output slot, so the image is bit-identical for any
// worker count.
inline Image render_image(const Scene& scene, const ParameterSet& params,
                          const LightSampler& lights, const TraceConfig& cfg,
                          const Camera& camera, std::uint32_t image_id, std::uint64_t seed,
                          ThreadPool& pool, int64_t* segments = nullptr) {
    Image img(camera.width, camera.height);
    StreamKey key{seed, image_id, 0, StreamPurpose::Color};
    int64_t pixel_count = static_cast<int64_t>(camera.width) * camera.height;
    std::vector<int64_t> seg_counts(segments ? pixel_count : 0, 0);
    pool.parallel_for(pixel_count, [&](int64_t i) {
        int px = static_cast<int>(i % camera.width);
        int py = static_cast<int>(i / camera.width);
        int64_t* seg = segments ? &seg_counts[i] : nullptr;
        RadianceEstimate est =
            trace_radiance(scene, params, lights, cfg, px, py, camera, key, seg);
        img.set(px, py, est.value);
    });
    if (segments)
        for (int64_t c : seg_counts)
            *segments += c;
    return img;
}

inline Image render_image(const Scene& scene, const ParameterSet& params,
                          const LightSampler& lights, const TraceConfig& cfg,
                          const Camera& camera, std::uint32_t image_id, std::uint64_t seed) {
    return render_image(scene, params, lights, cfg, camera, image_id, seed, ThreadPool::global());
}

}  // namespace ipt
