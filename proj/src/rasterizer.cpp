// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/rasterizer.hpp"

#include <algorithm>
#include <cassert>

#include "gsps/threading.hpp"

namespace gsps {

namespace {

constexpr double kParallelEps = 1e-9;

std::optional<SplatFragment> intersect_surfel_cached(const SurfelGaussian& g,
                                                     const Vec3& plane_normal, int index,
                                                     const Camera::Ray& ray, double w_min) {
    const double denom = dot(ray.dir, plane_normal);
    if (std::abs(denom) < kParallelEps) return std::nullopt;
    const double t = dot(g.center - ray.origin, plane_normal) / denom;
    if (t <= 0.0) return std::nullopt;
    const Vec3 q = ray.origin + ray.dir * t - g.center;
    const double u = dot(q, g.tangent_u) / g.scale_u;
    const double v = dot(q, g.tangent_v) / g.scale_v;
    const double w = gaussian_weight(u, v);
    if (w < w_min) return std::nullopt;
    return SplatFragment{index, w, t};
}

std::optional<SplatFragment> project_ray_3d_cached(const SurfelGaussian& g,
                                                   const Vec3& unit_normal, int index,
                                                   const Camera::Ray& ray, double epsilon,
                                                   double w_min) {
    const double t = dot(g.center - ray.origin, ray.dir);  // unit dir
    if (t <= 0.0) return std::nullopt;
    const Vec3 q = ray.origin + ray.dir * t - g.center;
    const double a = dot(q, g.tangent_u) / g.scale_u;
    const double b = dot(q, g.tangent_v) / g.scale_v;
    const double c = dot(q, unit_normal) / epsilon;
    const double w = std::exp(-0.5 * ((a * a + b * b) + c * c));
    if (w < w_min) return std::nullopt;
    return SplatFragment{index, w, t};
}

}  // namespace

std::optional<SplatFragment> intersect_surfel(const SurfelGaussian& g, const Camera& camera,
                                              int px, int py, double w_min) {
    const Camera::Ray ray = camera.pixel_ray(px + 0.5, py + 0.5);
    return intersect_surfel_cached(g, cross(g.tangent_u, g.tangent_v), 0, ray, w_min);
}

std::optional<SplatFragment> project_ray_3d(const SurfelGaussian& g, const Camera& camera,
                                            int px, int py, double epsilon, double w_min) {
    const Camera::Ray ray = camera.pixel_ray(px + 0.5, py + 0.5);
    return project_ray_3d_cached(g, normalized(cross(g.tangent_u, g.tangent_v)), 0, ray, epsilon,
                                 w_min);
}

GaussianCache build_gaussian_cache(const SplatScene& scene) {
    GaussianCache cache;
    const size_t n = scene.size();
    cache.plane_normal.resize(n);
    cache.unit_normal.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec3 c = cross(scene.gaussians[i].tangent_u, scene.gaussians[i].tangent_v);
        cache.plane_normal[i] = c;
        cache.unit_normal[i] = normalized(c);
    }
    return cache;
}

TileBins bin_gaussians(const SplatScene& scene, const RenderOptions& opts) {
    const Camera& cam = scene.camera;
    TileBins bins;
    bins.tile_size = opts.tile_size;
    bins.tiles_x = (cam.width + opts.tile_size - 1) / opts.tile_size;
    bins.tiles_y = (cam.height + opts.tile_size - 1) / opts.tile_size;
    bins.bins.assign(size_t(bins.tiles_x) * bins.tiles_y, {});

    for (int gi = 0; gi < int(scene.size()); ++gi) {
        const SurfelGaussian& g = scene.gaussians[size_t(gi)];
        // Axis-aligned cube bounding the 3-sigma tangent disk.
        const double half = 3.0 * std::max(g.scale_u, g.scale_v) * 1.4142135623730951;

        double min_px = 0, min_py = 0, max_px = 0, max_py = 0;
        bool all_projected = true, first = true;
        for (int corner = 0; corner < 8 && all_projected; ++corner) {
            const Vec3 p = g.center + Vec3{(corner & 1) ? half : -half,
                                           (corner & 2) ? half : -half,
                                           (corner & 4) ? half : -half};
            double px, py;
            const bool front = cam.project(p, &px, &py, nullptr);
            if (cam.model == CameraModel::Pinhole && !front) {
                all_projected = false;  // straddles the camera plane
                break;
            }
            if (first || px < min_px) min_px = first ? px : std::min(min_px, px);
            if (first || px > max_px) max_px = first ? px : std::max(max_px, px);
            if (first || py < min_py) min_py = first ? py : std::min(min_py, py);
            if (first || py > max_py) max_py = first ? py : std::max(max_py, py);
            first = false;
        }

        int x0, x1, y0, y1;
        if (all_projected) {
            x0 = std::max(0, int(std::floor(min_px - 1.0)));
            x1 = std::min(cam.width - 1, int(std::ceil(max_px + 1.0)));
            y0 = std::max(0, int(std::floor(min_py - 1.0)));
            y1 = std::min(cam.height - 1, int(std::ceil(max_py + 1.0)));
            if (x0 > x1 || y0 > y1) continue;  // fully off screen
        } else {
            x0 = 0; x1 = cam.width - 1; y0 = 0; y1 = cam.height - 1;
        }

        const int tx0 = x0 / opts.tile_size, tx1 = x1 / opts.tile_size;
        const int ty0 = y0 / opts.tile_size, ty1 = y1 / opts.tile_size;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins.bins[size_t(ty) * bins.tiles_x + tx].push_back(gi);
    }
    return bins;
}

void gather_fragments(const SplatScene& scene, const GaussianCache& cache,
                      const std::vector<int>& bin, int px, int py, const RenderOptions& opts,
                      std::vector<SplatFragment>& out) {
    out.clear();
    const Camera::Ray ray = scene.camera.pixel_ray(px + 0.5, py + 0.5);
    for (int gi : bin) {
        const SurfelGaussian& g = scene.gaussians[size_t(gi)];
        std::optional<SplatFragment> frag =
            opts.mode == EvalMode::Surfel
                ? intersect_surfel_cached(g, cache.plane_normal[size_t(gi)], gi, ray, opts.w_min)
                : project_ray_3d_cached(g, cache.unit_normal[size_t(gi)], gi, ray,
                                        opts.ray3d_epsilon, opts.w_min);
        if (frag) out.push_back(*frag);
    }
    std::sort(out.begin(), out.end(), [](const SplatFragment& a, const SplatFragment& b) {
        if (a.depth_at_pixel != b.depth_at_pixel) return a.depth_at_pixel < b.depth_at_pixel;
        return a.gaussian_index < b.gaussian_index;  // deterministic ties
    });
}

namespace {

struct PixelOut {
    Vec3 albedo{0, 0, 0};
    Vec3 normal{0, 0, 0};  // camera space
    double depth_sum = 0.0;
    double alpha = 0.0;
};

// Shared Eq.-style front-to-back accumulation; the camera-facing flip is
// applied per fragment before the normal enters the blend.
PixelOut composite_pixel(std::span<const SplatFragment> fragments, const SplatScene& scene,
                         const GaussianCache& cache, const Vec3& view_dir, double t_stop) {
    PixelOut out;
    double T = 1.0;
    for (const SplatFragment& f : fragments) {
        const SurfelGaussian& g = scene.gaussians[size_t(f.gaussian_index)];
        const double fk = g.opacity * f.weight;
        const double contrib = fk * T;
        Vec3 n = cache.unit_normal[size_t(f.gaussian_index)];
        if (dot(n, view_dir) > 0.0) n = -n;
        n = scene.camera.orientation.transpose_mul(n);
        out.albedo += g.albedo * contrib;
        out.normal += n * contrib;
        out.depth_sum += f.depth_at_pixel * contrib;
        T *= 1.0 - fk;
        if (T < t_stop) break;
    }
    out.alpha = 1.0 - T;
    return out;
}

}  // namespace

CompositeResult composite(std::span<const SplatFragment> fragments, const SplatScene& scene,
                          Channel channel, const Vec3& view_dir, double t_stop) {
#ifndef NDEBUG
    for (size_t i = 1; i < fragments.size(); ++i)
        assert(fragments[i - 1].depth_at_pixel <= fragments[i].depth_at_pixel &&
               "composite requires fragments sorted by ascending depth");
#endif
    const GaussianCache cache = build_gaussian_cache(scene);
    const PixelOut px = composite_pixel(fragments, scene, cache, view_dir, t_stop);
    CompositeResult r;
    r.alpha = px.alpha;
    switch (channel) {
        case Channel::Albedo: r.value = px.albedo; break;
        case Channel::Normal: r.value = px.normal; break;
        case Channel::Depth:
            r.value = {px.alpha > 0.0 ? px.depth_sum / px.alpha : RenderBuffers::kDepthBackground,
                       0.0, 0.0};
            break;
    }
    return r;
}

namespace {

RenderBuffers render_internal(const SplatScene& scene, const RenderOptions& opts,
                              FragmentArena* arena) {
    const Camera& cam = scene.camera;
    RenderBuffers out(cam.width, cam.height);
    const size_t npx = size_t(cam.width) * cam.height;
    if (arena) {
        arena->offsets.assign(npx + 1, 0);
        arena->fragments.clear();
    }
    if (scene.gaussians.empty()) return out;

    const GaussianCache cache = build_gaussian_cache(scene);
    const TileBins bins = bin_gaussians(scene, opts);
    const int ntiles = bins.tiles_x * bins.tiles_y;

    // per-tile fragment retention, scattered back to row-major afterwards
    std::vector<std::vector<SplatFragment>> tile_frags(arena ? size_t(ntiles) : 0);

    parallel_for(ntiles, [&](int tile) {
        const int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
        const std::vector<int>& bin = bins.bins[size_t(tile)];
        if (bin.empty()) return;
        const int x0 = tx * opts.tile_size, x1 = std::min(cam.width, x0 + opts.tile_size);
        const int y0 = ty * opts.tile_size, y1 = std::min(cam.height, y0 + opts.tile_size);
        std::vector<SplatFragment> frags;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                gather_fragments(scene, cache, bin, x, y, opts, frags);
                if (arena) {
                    arena->offsets[size_t(y) * cam.width + x + 1] = uint32_t(frags.size());
                    tile_frags[size_t(tile)].insert(tile_frags[size_t(tile)].end(),
                                                    frags.begin(), frags.end());
                }
                if (frags.empty()) continue;
                const Camera::Ray ray = cam.pixel_ray(x + 0.5, y + 0.5);
                const PixelOut px = composite_pixel(frags, scene, cache, ray.dir, opts.t_stop);
                out.albedo_r.at(x, y) = px.albedo.x;
                out.albedo_g.at(x, y) = px.albedo.y;
                out.albedo_b.at(x, y) = px.albedo.z;
                out.normal_x.at(x, y) = px.normal.x;
                out.normal_y.at(x, y) = px.normal.y;
                out.normal_z.at(x, y) = px.normal.z;
                out.alpha.at(x, y) = px.alpha;
                out.depth.at(x, y) = px.alpha > 0.0 ? px.depth_sum / px.alpha
                                                    : RenderBuffers::kDepthBackground;
            }
    });

    if (arena) {
        for (size_t i = 1; i <= npx; ++i) arena->offsets[i] += arena->offsets[i - 1];
        arena->fragments.resize(arena->offsets[npx]);
        parallel_for(ntiles, [&](int tile) {
            const std::vector<SplatFragment>& src = tile_frags[size_t(tile)];
            if (src.empty()) return;
            const int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
            const int x0 = tx * opts.tile_size, x1 = std::min(cam.width, x0 + opts.tile_size);
            const int y0 = ty * opts.tile_size, y1 = std::min(cam.height, y0 + opts.tile_size);
            size_t cursor = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const size_t p = size_t(y) * cam.width + x;
                    const size_t count = arena->offsets[p + 1] - arena->offsets[p];
                    for (size_t k = 0; k < count; ++k)
                        arena->fragments[arena->offsets[p] + k] = src[cursor++];
                }
        });
    }
    return out;
}

}  // namespace

RenderBuffers render(const SplatScene& scene, const RenderOptions& opts) {
    return render_internal(scene, opts, nullptr);
}

RenderBuffers render_with_fragments(const SplatScene& scene, const RenderOptions& opts,
                                    FragmentArena& arena) {
    return render_internal(scene, opts, &arena);
}

}  // namespace gsps
