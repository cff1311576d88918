// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsps/image.hpp"

namespace gsps {

// Decoded PNG, expanded to 8- or 16-bit gray or RGB (alpha stripped,
// palettes expanded). Samples are raw code values, not linearized.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 or 3
    int bit_depth = 0;  // 8 or 16
    std::vector<uint16_t> data;  // interleaved

    uint16_t max_value() const { return bit_depth == 16 ? 65535 : 255; }
};

PngImage read_png(const std::string& path);
void write_png8(const std::string& path, int width, int height, int channels,
                const uint8_t* data);
void write_png16(const std::string& path, int width, int height, int channels,
                 const uint16_t* data);

// Portable float map, grayscale ("Pf"), little-endian, bottom-up rows.
// Non-finite values are clamped to the float maximum on write and mapped
// back to +inf on read; finite values round-trip bit-exactly at float32
// precision.
ImageD read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageD& img);

}  // namespace gsps
