// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gsps/image.hpp"
#include "gsps/types.hpp"

namespace gsps {

// One forward pass, planar so the shading kernels can stream over the
// planes. Normals are blended in camera coordinates with the
// camera-facing sign applied per fragment; depth is the alpha-weighted
// expected ray parameter, +inf where nothing rendered.
struct RenderBuffers {
    int width = 0, height = 0;
    ImageD albedo_r, albedo_g, albedo_b;
    ImageD normal_x, normal_y, normal_z;
    ImageD depth;
    ImageD alpha;

    static constexpr double kDepthBackground = std::numeric_limits<double>::infinity();

    RenderBuffers() = default;
    RenderBuffers(int w, int h)
        : width(w), height(h), albedo_r(w, h), albedo_g(w, h), albedo_b(w, h), normal_x(w, h),
          normal_y(w, h), normal_z(w, h), depth(w, h, kDepthBackground), alpha(w, h) {}

    Vec3 albedo_at(int x, int y) const {
        return {albedo_r.at(x, y), albedo_g.at(x, y), albedo_b.at(x, y)};
    }
    Vec3 normal_at(int x, int y) const {
        return {normal_x.at(x, y), normal_y.at(x, y), normal_z.at(x, y)};
    }
};

struct SplatFragment {
    int gaussian_index = -1;
    double weight = 0.0;          // Gaussian value at the ray hit, in (0,1]
    double depth_at_pixel = 0.0;  // ray parameter t of the surfel-plane hit
};

enum class EvalMode { Surfel, Ray3D };

struct RenderOptions {
    int tile_size = 16;
    double w_min = std::exp(-4.5);  // 3-sigma fragment cutoff
    double t_stop = 1e-4;           // early exit once transmittance drops below
    EvalMode mode = EvalMode::Surfel;
    double ray3d_epsilon = 1e-3;    // Gaussian thickness along the surfel normal
};

// Pixel-ray / surfel-plane intersection mapped into tangent coordinates.
// Empty when the ray is parallel to the plane, the hit is behind the
// camera, or the weight falls under w_min.
std::optional<SplatFragment> intersect_surfel(const SurfelGaussian& g, const Camera& camera,
                                              int px, int py,
                                              double w_min = std::exp(-4.5));

// Alternative evaluation: the surfel read as a thin 3D Gaussian sampled
// at the ray point closest to its center.
std::optional<SplatFragment> project_ray_3d(const SurfelGaussian& g, const Camera& camera,
                                            int px, int py, double epsilon,
                                            double w_min = std::exp(-4.5));

enum class Channel { Albedo, Normal, Depth };

struct CompositeResult {
    Vec3 value;      // rgb / blended normal / (depth, 0, 0)
    double alpha = 0.0;
};

// Front-to-back accumulation of one pre-sorted fragment list (spec-level
// single-channel form; render() fuses all channels over one shared
// transmittance). view_dir orients the per-fragment normal flip.
CompositeResult composite(std::span<const SplatFragment> fragments, const SplatScene& scene,
                          Channel channel, const Vec3& view_dir = {0.0, 0.0, -1.0},
                          double t_stop = 1e-4);

RenderBuffers render(const SplatScene& scene, const RenderOptions& opts = {});

// Depth-sorted fragments of every pixel, retained for the adjoint pass
// (row-major pixel indexing).
struct FragmentArena {
    std::vector<uint32_t> offsets;  // pixel count + 1
    std::vector<SplatFragment> fragments;

    std::span<const SplatFragment> at(size_t pixel) const {
        return {fragments.data() + offsets[pixel], fragments.data() + offsets[pixel + 1]};
    }
};

RenderBuffers render_with_fragments(const SplatScene& scene, const RenderOptions& opts,
                                    FragmentArena& arena);

// --- shared plumbing between the forward pass and the adjoint pass ---

// Per-Gaussian quantities hoisted out of the pixel loops.
struct GaussianCache {
    std::vector<Vec3> plane_normal;  // raw tangent cross product
    std::vector<Vec3> unit_normal;   // normalized, unflipped
};
GaussianCache build_gaussian_cache(const SplatScene& scene);

// Conservative screen-space binning of Gaussians into tiles. Bin lists
// are ordered by Gaussian index.
struct TileBins {
    int tile_size = 0;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> bins;
};
TileBins bin_gaussians(const SplatScene& scene, const RenderOptions& opts);

// Fragments for one pixel from its tile bin, depth-sorted (ties broken
// by Gaussian index).
void gather_fragments(const SplatScene& scene, const GaussianCache& cache,
                      const std::vector<int>& bin, int px, int py, const RenderOptions& opts,
                      std::vector<SplatFragment>& out);

}  // namespace gsps
