// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/image_io.hpp"

#include <png.h>

#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

#include "gsps/errors.hpp"

namespace gsps {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

PngImage read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw LoadError("cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw FormatError(path + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw LoadError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw LoadError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16) png_set_swap(png);  // file is big-endian
    png_read_update_info(png, info);

    PngImage out;
    out.width = int(png_get_image_width(png, info));
    out.height = int(png_get_image_height(png, info));
    out.bit_depth = int(png_get_bit_depth(png, info));
    out.channels = int(png_get_channels(png, info));
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path + ": unsupported channel count");
    }

    const size_t samples = size_t(out.width) * out.height * out.channels;
    out.data.resize(samples);
    std::vector<png_bytep> rows(static_cast<size_t>(out.height));
    std::vector<uint8_t> raw;
    if (out.bit_depth == 16) {
        for (int y = 0; y < out.height; ++y)
            rows[size_t(y)] = reinterpret_cast<png_bytep>(out.data.data() +
                                                          size_t(y) * out.width * out.channels);
    } else {
        raw.resize(samples);
        for (int y = 0; y < out.height; ++y)
            rows[size_t(y)] = raw.data() + size_t(y) * out.width * out.channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (out.bit_depth != 16)
        for (size_t i = 0; i < samples; ++i) out.data[i] = raw[i];
    return out;
}

namespace {

void write_png_impl(const std::string& path, int width, int height, int channels, int depth,
                    const void* data) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw LoadError("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw LoadError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw LoadError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("failed to encode " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), depth,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (depth == 16) png_set_swap(png);

    const size_t stride = size_t(width) * channels * (depth / 8);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[size_t(y)] =
            const_cast<png_bytep>(static_cast<const png_byte*>(data) + size_t(y) * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png8(const std::string& path, int width, int height, int channels,
                const uint8_t* data) {
    write_png_impl(path, width, height, channels, 8, data);
}

void write_png16(const std::string& path, int width, int height, int channels,
                 const uint16_t* data) {
    write_png_impl(path, width, height, channels, 16, data);
}

ImageD read_pfm(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw LoadError("cannot open " + path);

    char tag[3] = {0, 0, 0};
    int width = 0, height = 0;
    double scale = 0.0;
    if (std::fscanf(fp.get(), "%2s %d %d %lf", tag, &width, &height, &scale) != 4)
        throw FormatError(path + ": bad PFM header");
    if (std::strcmp(tag, "Pf") != 0)
        throw FormatError(path + ": expected grayscale PFM (Pf)");
    if (width <= 0 || height <= 0) throw FormatError(path + ": bad PFM dimensions");
    if (scale >= 0.0) throw FormatError(path + ": big-endian PFM is not supported");
    std::fgetc(fp.get());  // single whitespace after the scale

    ImageD img(width, height);
    std::vector<float> row(static_cast<size_t>(width));
    for (int y = height - 1; y >= 0; --y) {  // bottom-up storage
        if (std::fread(row.data(), sizeof(float), size_t(width), fp.get()) != size_t(width))
            throw FormatError(path + ": truncated PFM data");
        for (int x = 0; x < width; ++x) {
            float v = row[size_t(x)];
            img.at(x, y) = (v >= FLT_MAX) ? std::numeric_limits<double>::infinity() : double(v);
        }
    }
    return img;
}

void write_pfm(const std::string& path, const ImageD& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw LoadError("cannot write " + path);
    std::fprintf(fp.get(), "Pf\n%d %d\n-1.0\n", img.width, img.height);
    std::vector<float> row(static_cast<size_t>(img.width));
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) {
            double v = img.at(x, y);
            row[size_t(x)] = std::isfinite(v) ? float(v) : FLT_MAX;
        }
        if (std::fwrite(row.data(), sizeof(float), size_t(img.width), fp.get()) !=
            size_t(img.width))
            throw LoadError("short write to " + path);
    }
}

}  // namespace gsps
