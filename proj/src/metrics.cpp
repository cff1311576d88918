// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gsps/errors.hpp"
#include "gsps/image_io.hpp"

namespace gsps {

namespace {
constexpr double kRadToDeg = 180.0 / M_PI;
}

ImageD angular_error_map(const ImageV3& estimated, const ImageV3& truth, const ImageU8& mask) {
    if (!estimated.same_size(mask) || !truth.same_size(mask))
        throw ParamError("normal map resolutions do not match the mask");
    ImageD err(mask.width, mask.height, std::numeric_limits<double>::quiet_NaN());
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const Vec3 e = estimated.at(x, y);
            const Vec3 t = truth.at(x, y);
            const double le = norm(e), lt = norm(t);
            if (le < 1e-9 || lt < 1e-9) {
                err.at(x, y) = 90.0;
                continue;
            }
            const double c = std::clamp(dot(e, t) / (le * lt), -1.0, 1.0);
            err.at(x, y) = std::acos(c) * kRadToDeg;
        }
    return err;
}

ErrorStats error_stats(const ImageD& error_map, const ImageU8& mask) {
    if (!error_map.same_size(mask)) throw ParamError("error map resolution does not match mask");
    std::vector<double> vals;
    vals.reserve(error_map.data.size());
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double v = error_map.at(x, y);
            if (std::isnan(v)) continue;
            vals.push_back(v);
        }
    if (vals.empty()) throw ParamError("no masked pixels to evaluate");

    ErrorStats s;
    s.pixel_count = int(vals.size());
    double sum = 0.0, sq = 0.0;
    for (double v : vals) {
        sum += v;
        sq += v * v;
    }
    s.mean_deg = sum / vals.size();
    s.rms_deg = std::sqrt(sq / vals.size());
    std::sort(vals.begin(), vals.end());
    const size_t n = vals.size();
    s.median_deg = (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    return s;
}

double mean_angular_error(const ImageD& error_map, const ImageU8& mask) {
    return error_stats(error_map, mask).mean_deg;
}

void write_normal_png(const std::string& path, const ImageV3& normals, const ImageU8& mask,
                      int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ParamError("normal PNG bit depth must be 8 or 16");
    const int w = normals.width, h = normals.height;
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;

    auto encode = [&](int x, int y, int c) -> double {
        Vec3 n{0.0, 0.0, 0.0};
        if (mask.empty() || mask.at(x, y)) n = normals.at(x, y);
        return std::lround((n[c] + 1.0) * 0.5 * maxv);
    };

    if (bit_depth == 16) {
        std::vector<uint16_t> buf(size_t(w) * h * 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    buf[3 * (size_t(y) * w + x) + size_t(c)] = uint16_t(encode(x, y, c));
        write_png16(path, w, h, 3, buf.data());
    } else {
        std::vector<uint8_t> buf(size_t(w) * h * 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    buf[3 * (size_t(y) * w + x) + size_t(c)] = uint8_t(encode(x, y, c));
        write_png8(path, w, h, 3, buf.data());
    }
}

ImageV3 read_normal_png(const std::string& path) {
    const PngImage png = read_png(path);
    if (png.channels != 3) throw FormatError(path + ": normal map must be RGB");
    const double maxv = png.max_value();
    ImageV3 out(png.width, png.height);
    for (size_t i = 0; i < out.data.size(); ++i) {
        Vec3 n{2.0 * png.data[3 * i + 0] / maxv - 1.0, 2.0 * png.data[3 * i + 1] / maxv - 1.0,
               2.0 * png.data[3 * i + 2] / maxv - 1.0};
        const double l = norm(n);
        // mid-gray (within quantization) marks an absent normal
        out.data[i] = l > 0.05 ? n / l : Vec3{0.0, 0.0, 0.0};
    }
    return out;
}

ImageV3 error_colormap(const ImageD& error_map, double max_degrees) {
    if (!(max_degrees > 0.0)) throw ParamError("max_degrees must be positive");
    static const Vec3 stops[5] = {
        {0.267, 0.005, 0.329}, {0.229, 0.322, 0.545}, {0.128, 0.565, 0.551},
        {0.369, 0.789, 0.383}, {0.993, 0.906, 0.144}};
    ImageV3 out(error_map.width, error_map.height);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double v = error_map.data[i];
        if (std::isnan(v)) {
            out.data[i] = {0.0, 0.0, 0.0};
            continue;
        }
        const double t = std::clamp(v / max_degrees, 0.0, 1.0) * 4.0;
        const int k = std::min(int(t), 3);
        const double f = t - k;
        out.data[i] = stops[k] * (1.0 - f) + stops[k + 1] * f;
    }
    return out;
}

void write_color_png8(const std::string& path, const ImageV3& rgb) {
    std::vector<uint8_t> buf(size_t(rgb.width) * rgb.height * 3);
    for (size_t i = 0; i < rgb.data.size(); ++i)
        for (int c = 0; c < 3; ++c)
            buf[3 * i + size_t(c)] =
                uint8_t(std::lround(std::clamp(rgb.data[i][c], 0.0, 1.0) * 255.0));
    write_png8(path, rgb.width, rgb.height, 3, buf.data());
}

}  // namespace gsps
