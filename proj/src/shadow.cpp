// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/shadow.hpp"

#include <algorithm>
#include <cmath>

#include "gsps/errors.hpp"
#include "gsps/threading.hpp"

namespace gsps {

Camera light_view_camera(const Light& light, const Box3& bounds, int width, int height) {
    if (!light_valid(light)) throw ParamError("invalid light");
    if (bounds.empty()) throw ParamError("empty scene bounds");
    if (width < 1 || height < 1) throw ParamError("light view resolution must be positive");

    const Vec3 l = normalized(light.direction);
    const Vec3 up = std::abs(dot(l, Vec3{0, 1, 0})) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
    const Vec3 x_cam = normalized(cross(up, l));
    const Vec3 y_cam = cross(l, x_cam);  // [x y l] is right-handed

    // Degenerate boxes get at least a unit frame.
    Vec3 extent = bounds.extent();
    const Vec3 center = bounds.center();
    for (int i = 0; i < 3; ++i) extent[i] = std::max(extent[i], 1.0);

    double ex = 0.0, ey = 0.0, ez = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 p{((corner & 1) ? 0.5 : -0.5) * extent.x,
                     ((corner & 2) ? 0.5 : -0.5) * extent.y,
                     ((corner & 4) ? 0.5 : -0.5) * extent.z};
        ex = std::max(ex, std::abs(dot(p, x_cam)));
        ey = std::max(ey, std::abs(dot(p, y_cam)));
        ez = std::max(ez, std::abs(dot(p, l)));
    }

    Camera cam;
    cam.model = CameraModel::Orthographic;
    cam.width = width;
    cam.height = height;
    cam.orientation = Mat3::from_cols(x_cam, y_cam, l);
    cam.position = center + l * (ez + std::max(0.5, 0.05 * norm(extent)));
    cam.pixel_pitch = std::max(2.0 * ex * 1.05 / width, 2.0 * ey * 1.05 / height);
    return cam;
}

ShadowResult shadow_mask_full(const SplatScene& scene, const Light& light,
                              const RenderBuffers& camera_buffers, double bias,
                              const RenderOptions& opts, int light_resolution_scale) {
    if (!(bias > 0.0)) throw ParamError("shadow bias must be positive");
    if (camera_buffers.width != scene.camera.width ||
        camera_buffers.height != scene.camera.height)
        throw ParamError("render buffers do not match the scene camera");

    const Box3 bounds = scene_bounds(scene);
    ShadowResult res;
    res.light_camera = light_view_camera(light, bounds, scene.camera.width * light_resolution_scale,
                                         scene.camera.height * light_resolution_scale);

    SplatScene light_scene = scene;
    light_scene.camera = res.light_camera;
    res.light_view = render(light_scene, opts);

    const int w = scene.camera.width, h = scene.camera.height;
    res.mask = ImageU8(w, h, 0);
    res.point_depth_in_light = ImageD(w, h, RenderBuffers::kDepthBackground);
    res.sampled_light_depth = ImageD(w, h, RenderBuffers::kDepthBackground);

    const ImageD& ldepth = res.light_view.depth;
    const ImageD& lalpha = res.light_view.alpha;
    const int lw = res.light_camera.width, lh = res.light_camera.height;

    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const double a = camera_buffers.alpha.at(x, y);
            const double d = camera_buffers.depth.at(x, y);
            if (!(a > 1e-6) || !std::isfinite(d)) continue;  // nothing rendered here

            const Camera::Ray ray = scene.camera.pixel_ray(x + 0.5, y + 0.5);
            const Vec3 p = ray.origin + ray.dir * d;

            double px, py, tl;
            if (!res.light_camera.project(p, &px, &py, &tl)) continue;
            res.point_depth_in_light.at(x, y) = tl;

            // bilinear sample of the light depth map at (px, py)
            const double fx = px - 0.5, fy = py - 0.5;
            const int ix = int(std::floor(fx)), iy = int(std::floor(fy));
            if (ix < 0 || iy < 0 || ix + 1 >= lw || iy + 1 >= lh) continue;  // outside frame
            bool valid = true;
            for (int dy = 0; dy <= 1 && valid; ++dy)
                for (int dx = 0; dx <= 1; ++dx)
                    if (!(lalpha.at(ix + dx, iy + dy) > 1e-6) ||
                        !std::isfinite(ldepth.at(ix + dx, iy + dy))) {
                        valid = false;
                        break;
                    }
            if (!valid) continue;  // silhouette gap in the light map: leave unshadowed

            const double ax = fx - ix, ay = fy - iy;
            const double s00 = ldepth.at(ix, iy), s10 = ldepth.at(ix + 1, iy);
            const double s01 = ldepth.at(ix, iy + 1), s11 = ldepth.at(ix + 1, iy + 1);
            const double sample = (s00 * (1.0 - ax) + s10 * ax) * (1.0 - ay) +
                                  (s01 * (1.0 - ax) + s11 * ax) * ay;
            res.sampled_light_depth.at(x, y) = sample;
            if (tl > sample + bias) res.mask.at(x, y) = 1;
        }
    });
    return res;
}

ImageU8 shadow_mask(const SplatScene& scene, const Light& light,
                    const RenderBuffers& camera_buffers, double bias, const RenderOptions& opts) {
    return shadow_mask_full(scene, light, camera_buffers, bias, opts).mask;
}

}  // namespace gsps
