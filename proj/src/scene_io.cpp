// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/scene_io.hpp"

#include <algorithm>
#include <cmath>

#include "gsps/errors.hpp"

namespace gsps {

Camera default_reconstruction_camera(int width, int height) {
    const double pitch = 2.2 / std::max(width, height);
    return make_orthographic(width, height, pitch, {0.0, 0.0, 3.0});
}

SplatScene scene_from_depth(const ImageD& depth, const ImageV3& normals, const ImageU8& mask,
                            const Camera& camera) {
    if (!depth.same_size(mask) || !normals.same_size(mask))
        throw ParamError("depth, normals and mask resolutions differ");
    if (camera.width != mask.width || camera.height != mask.height)
        throw ParamError("camera resolution does not match the maps");

    SplatScene scene;
    scene.camera = camera;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double t = depth.at(x, y);
            if (!std::isfinite(t)) continue;
            Vec3 n = normals.at(x, y);
            const double l = norm(n);
            if (l < 1e-6) continue;
            n = n / l;

            const Camera::Ray ray = camera.pixel_ray(x + 0.5, y + 0.5);
            SurfelGaussian g;
            g.center = ray.origin + ray.dir * t;
            const Vec3 n_world = camera.orientation * n;  // gt normals live in camera space
            Vec3 up = std::abs(n_world.y) < 0.99 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
            g.tangent_u = normalized(cross(up, n_world));
            g.tangent_v = cross(n_world, g.tangent_u);
            const double pitch = camera.footprint_pitch(t);
            g.scale_u = g.scale_v = 0.5 * pitch / std::max(std::abs(n.z), 0.3);
            g.opacity = 1.0;
            scene.gaussians.push_back(g);
        }
    scene.densify_stats.resize(scene.gaussians.size());
    return scene;
}

}  // namespace gsps
