#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "nocs/error.hpp"

namespace nocs {

/// Row-major interleaved raster. data[(y * width + x) * channels + c].
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c = 1, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    T& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    const T& at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_size(int w, int h) const { return width == w && height == h; }
};

/// Depth in millimeters, 0 = invalid (sensor convention).
using DepthMap = Image<uint16_t>;

/// 0 = background, k = instance id.
using InstanceMask = Image<uint8_t>;

/// Per-pixel NOCS coordinates in [0,1]^3 with a validity flag.
struct NocsMap {
    int width = 0;
    int height = 0;
    std::vector<double> xyz;     // 3 per pixel
    std::vector<uint8_t> valid;  // 0 / 1

    NocsMap() = default;
    NocsMap(int w, int h)
        : width(w), height(h),
          xyz(static_cast<size_t>(w) * h * 3, 0.0),
          valid(static_cast<size_t>(w) * h, 0) {}

    Eigen::Vector3d value(int x, int y) const {
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        return {xyz[i], xyz[i + 1], xyz[i + 2]};
    }
    void set_value(int x, int y, const Eigen::Vector3d& v) {
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        xyz[i] = v.x();
        xyz[i + 1] = v.y();
        xyz[i + 2] = v.z();
    }
    bool is_valid(int x, int y) const {
        return valid[static_cast<size_t>(y) * width + x] != 0;
    }
    void set_valid(int x, int y, bool v) {
        valid[static_cast<size_t>(y) * width + x] = v ? 1 : 0;
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Per-pixel, per-channel B-way class probabilities.
/// Layout: p[((y * width + x) * 3 + channel) * bins + bin], float32.
struct ProbabilityMap {
    int width = 0;
    int height = 0;
    int bins = 0;
    std::vector<float> p;

    ProbabilityMap() = default;
    ProbabilityMap(int w, int h, int b)
        : width(w), height(h), bins(b),
          p(static_cast<size_t>(w) * h * 3 * b, 0.f) {}

    float* bin_ptr(int x, int y, int channel) {
        return p.data() + ((static_cast<size_t>(y) * width + x) * 3 + channel) * bins;
    }
    const float* bin_ptr(int x, int y, int channel) const {
        return p.data() + ((static_cast<size_t>(y) * width + x) * 3 + channel) * bins;
    }
};

}  // namespace nocs
