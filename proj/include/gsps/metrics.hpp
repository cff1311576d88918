// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "gsps/image.hpp"

namespace gsps {

// Per-pixel angle in degrees between two normal maps; both sides are
// renormalized first. Unmasked pixels hold NaN and never enter any
// statistic. A zero-length estimate on the mask counts as 90 degrees:
// a wrong normal, not missing data.
ImageD angular_error_map(const ImageV3& estimated, const ImageV3& truth, const ImageU8& mask);

double mean_angular_error(const ImageD& error_map, const ImageU8& mask);

struct ErrorStats {
    double mean_deg = 0.0;
    double median_deg = 0.0;
    double rms_deg = 0.0;
    int pixel_count = 0;
};

ErrorStats error_stats(const ImageD& error_map, const ImageU8& mask);

// RGB = round((n+1)/2 * maxval). 8-bit is for visualization; 16-bit is
// the ground-truth interchange format (8-bit quantization alone costs
// up to ~0.4 degrees). Off-mask pixels encode as mid-gray and decode
// back to the zero normal.
void write_normal_png(const std::string& path, const ImageV3& normals, const ImageU8& mask,
                      int bit_depth);
ImageV3 read_normal_png(const std::string& path);

// Linear ramp 0..max_degrees through a fixed five-stop palette
// (dark violet -> blue -> teal -> green -> yellow, viridis-like);
// values above max_degrees saturate, NaN renders black.
ImageV3 error_colormap(const ImageD& error_map, double max_degrees);

// 8-bit RGB writer for [0,1] color buffers.
void write_color_png8(const std::string& path, const ImageV3& rgb);

}  // namespace gsps
