// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsps/image.hpp"
#include "gsps/types.hpp"

namespace gsps {

// N observations of a fixed-viewpoint scene under varying calibrated
// directional lights. Images are linear, intensity-normalized (divided
// per channel by the calibration), so every light acts with unit
// strength downstream; the original intensities are kept for exact
// round trips.
struct ImageStack {
    std::vector<ColorImage> images;
    std::vector<Light> lights;       // unit intensity after normalization
    std::vector<Vec3> calibration;   // original per-image intensities
    ImageU8 mask;
    ImageD mask_plane;               // 0/1 doubles, kernel-friendly mirror of mask
    std::optional<ImageV3> gt_normals;  // camera space, unit length on mask

    int count() const { return int(images.size()); }
    int width() const { return mask.width; }
    int height() const { return mask.height; }

    void rebuild_mask_plane();

    // Structural invariants; min_images = 3 is the Woodham floor.
    void validate(int min_images = 3) const;

    // Mean of the three channels, used by the least-squares baseline.
    ImageD luminance(int index) const;
};

struct LoadOptions {
    bool srgb = false;  // decode 8/16-bit PNGs through the sRGB curve
};

// DiliGenT directory layout: filenames.txt, light_directions.txt,
// light_intensities.txt, mask.png, the listed images, and optionally
// normal.txt / Normal_gt.png / normal_gt.png.
ImageStack load_diligent(const std::string& dir, const LoadOptions& opts = {});

enum class SynthShape { Sphere, Plane, SphereOverPlane };

// Analytic scene description: the oracle geometry behind the synthetic
// generator. Exact heights, normals and cast-shadow queries; also the
// reference every shadow/depth test compares against.
struct AnalyticScene {
    SynthShape shape = SynthShape::Sphere;
    int resolution = 64;
    double half_extent = 1.1;    // frame spans [-half_extent, half_extent]
    double camera_z = 3.0;
    double sphere_radius = 0.9;
    Vec3 sphere_center{0.0, 0.0, 0.0};
    bool has_plane = false;
    double plane_z = 0.0;

    static AnalyticScene make(SynthShape shape, int resolution);

    Camera camera() const;
    Vec3 pixel_xy(int ix, int iy) const;  // scene coords of the pixel center

    bool inside(double x, double y) const;
    double height(double x, double y) const;  // surface z (toward camera)
    Vec3 normal(double x, double y) const;
    // True when the open ray p + s*dir (s > 0) is blocked before the light.
    bool occluded(const Vec3& p, const Vec3& light_dir) const;

    ImageU8 foreground_mask() const;
    ImageD depth_map() const;             // ray-parameter depth, +inf off mask
    ImageV3 normal_map() const;
    ImageU8 cast_shadow_mask(const Light& light) const;  // the ray-cast oracle
};

// Evenly spread directions on a cone ring around +z with seeded jitter.
std::vector<Light> synth_lights(int count, uint64_t seed);

// Renders the analytic scene under each light with the Lambertian model
// and exact cast shadows; gt_normals carry the analytic normals.
ImageStack synth_scene(SynthShape shape, const std::vector<Light>& lights, int resolution);

// One camera-facing surfel per foreground pixel on the z=0 plane,
// albedo = per-channel max over the observations.
SplatScene init_scene(const ImageStack& stack, const Camera& camera);

// Surfels placed on the true analytic surface (opaque, normal-aligned);
// used to exercise shadow mapping independently of reconstruction.
SplatScene analytic_splat_scene(const AnalyticScene& scene);

// Writes the DiliGenT layout plus oracle extras (depth_gt.pfm and
// shadow_gt_###.png when the shape casts shadows).
void save_diligent(const std::string& dir, const ImageStack& stack,
                   const AnalyticScene* oracle = nullptr);

}  // namespace gsps
