// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "gsps/vec.hpp"

namespace gsps {

// Dense row-major image buffer. Row 0 is the top of the image.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * size_t(h), fill) {}

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    T& at(int x, int y) {
        assert(contains(x, y));
        return data[size_t(y) * width + x];
    }
    const T& at(int x, int y) const {
        assert(contains(x, y));
        return data[size_t(y) * width + x];
    }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool same_size(int w, int h) const { return width == w && height == h; }
    template <typename U>
    bool same_size(const Image<U>& o) const { return width == o.width && height == o.height; }

    void fill(const T& v) { data.assign(data.size(), v); }
};

using ImageD = Image<double>;
using ImageU8 = Image<uint8_t>;
using ImageV3 = Image<Vec3>;

// Planar RGB in double precision; planes are contiguous so the SIMD
// kernels can run straight over them.
struct ColorImage {
    ImageD r, g, b;

    ColorImage() = default;
    ColorImage(int w, int h) : r(w, h), g(w, h), b(w, h) {}

    int width() const { return r.width; }
    int height() const { return r.height; }

    Vec3 at(int x, int y) const { return {r.at(x, y), g.at(x, y), b.at(x, y)}; }
    void set(int x, int y, const Vec3& v) {
        r.at(x, y) = v.x;
        g.at(x, y) = v.y;
        b.at(x, y) = v.z;
    }

    ImageD& plane(int c) { return c == 0 ? r : (c == 1 ? g : b); }
    const ImageD& plane(int c) const { return c == 0 ? r : (c == 1 ? g : b); }
};

inline int count_true(const ImageU8& mask) {
    int n = 0;
    for (uint8_t v : mask.data) n += v ? 1 : 0;
    return n;
}

}  // namespace gsps
