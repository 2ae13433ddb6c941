// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ipt/common.hpp"

namespace ipt {

// Linear-radiance HDR image, row-major, row 0 at the top. Samples are float32
// to match PFM storage exactly; arithmetic on them happens in double.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // 3 * width * height, RGB interleaved

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0.0f) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    RGB at(int x, int y) const {
        std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        return {data[i], data[i + 1], data[i + 2]};
    }

    void set(int x, int y, const RGB& c) {
        std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        data[i] = static_cast<float>(c.x);
        data[i + 1] = static_cast<float>(c.y);
        data[i + 2] = static_cast<float>(c.z);
    }
};

namespace detail {

inline float byteswap_float(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = ((u & 0xFF000000u) >> 24) | ((u & 0x00FF0000u) >> 8) | ((u & 0x0000FF00u) << 8) |
        ((u & 0x000000FFu) << 24);
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::string next_pfm_token(std::istream& in, const std::string& path) {
    std::string tok;
    if (!(in >> tok))
        throw InputError(path + ": malformed PFM header (unexpected end of file)");
    return tok;
}

}  // namespace detail

// Reads a color PFM ("PF"). Negative scale means little-endian, positive means
// big-endian; |scale| multiplies the stored samples. PFM rows are stored
// bottom-to-top. Non-finite pixels are rejected with their location.
inline Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(path + ": cannot open file");

    std::string magic = detail::next_pfm_token(in, path);
    if (magic != "PF")
        throw InputError(path + ": malformed PFM header (expected \"PF\", got \"" + magic + "\")");

    int width = 0, height = 0;
    double scale = 0.0;
    try {
        width = std::stoi(detail::next_pfm_token(in, path));
        height = std::stoi(detail::next_pfm_token(in, path));
        scale = std::stod(detail::next_pfm_token(in, path));
    } catch (const std::exception&) {
        throw InputError(path + ": malformed PFM header (bad dimensions or scale)");
    }
    if (width < 1 || height < 1)
        throw InputError(path + ": malformed PFM header (non-positive dimensions)");
    if (scale == 0.0)
        throw InputError(path + ": malformed PFM header (zero scale)");

    in.get();  // single whitespace byte separating header from payload

    Image img(width, height);
    std::vector<float> row(static_cast<std::size_t>(3) * width);
    const bool big_endian = scale > 0.0;
    const float magnitude = static_cast<float>(std::abs(scale));
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        if (!in)
            throw InputError(path + ": truncated PFM payload");
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = row[3 * x + c];
                if (big_endian)
                    v = detail::byteswap_float(v);
                if (magnitude != 1.0f)
                    v *= magnitude;
                if (!std::isfinite(v))
                    throw InputError(path + ": non-finite pixel at (" + std::to_string(x) + ", " +
                                     std::to_string(y) + ") channel " + std::to_string(c));
                img.data[3 * (static_cast<std::size_t>(y) * width + x) + c] = v;
            }
        }
    }
    return img;
}

// Writes little-endian color PFM (scale = -1.0). write(read(write(x))) is
// byte-identical.
inline void write_pfm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError(path + ": cannot open file for writing");
    char header[64];
    int n = std::snprintf(header, sizeof(header), "PF\n%d %d\n-1.0\n", img.width, img.height);
    out.write(header, n);
    for (int y = img.height - 1; y >= 0; --y) {
        const float* row = img.data.data() + 3 * static_cast<std::size_t>(y) * img.width;
        out.write(reinterpret_cast<const char*>(row),
                  std::streamsize(3 * sizeof(float) * img.width));
    }
    if (!out)
        throw InputError(path + ": write failed");
}

// Mean absolute difference over all pixels and channels.
inline double image_l1(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw InputError("image_l1: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        sum += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    return a.data.empty() ? 0.0 : sum / static_cast<double>(a.data.size());
}

}  // namespace ipt
