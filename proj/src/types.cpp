// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/types.hpp"

#include <cmath>
#include <string>

#include "gsps/errors.hpp"

namespace gsps {

Vec3 surfel_normal(const SurfelGaussian& g) {
    return normalized(cross(g.tangent_u, g.tangent_v));
}

Vec3 surfel_point(const SurfelGaussian& g, double u, double v) {
    return g.center + g.tangent_u * (g.scale_u * u) + g.tangent_v * (g.scale_v * v);
}

double gaussian_weight(double u, double v) {
    return std::exp(-0.5 * (u * u + v * v));
}

bool surfel_valid(const SurfelGaussian& g, double tol) {
    if (!is_finite(g.center) || !is_finite(g.tangent_u) || !is_finite(g.tangent_v) ||
        !is_finite(g.albedo))
        return false;
    if (std::abs(norm(g.tangent_u) - 1.0) > tol) return false;
    if (std::abs(norm(g.tangent_v) - 1.0) > tol) return false;
    if (std::abs(dot(g.tangent_u, g.tangent_v)) > tol) return false;
    if (!(g.scale_u > 0.0) || !(g.scale_v > 0.0)) return false;
    if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) return false;
    if (g.albedo.x < 0.0 || g.albedo.y < 0.0 || g.albedo.z < 0.0) return false;
    return true;
}

Camera::Ray Camera::pixel_ray(double px, double py) const {
    if (model == CameraModel::Orthographic) {
        const double cx = width * 0.5, cy = height * 0.5;
        Vec3 o_cam{(px - cx) * pixel_pitch, (cy - py) * pixel_pitch, 0.0};
        return {position + orientation * o_cam, orientation * Vec3{0.0, 0.0, -1.0}};
    }
    Vec3 d_cam{(px - principal_x) / focal_px, (principal_y - py) / focal_px, -1.0};
    return {position, orientation * normalized(d_cam)};
}

bool Camera::project(const Vec3& p, double* px, double* py, double* t) const {
    const Vec3 q = orientation.transpose_mul(p - position);
    if (model == CameraModel::Orthographic) {
        if (px) *px = q.x / pixel_pitch + width * 0.5;
        if (py) *py = height * 0.5 - q.y / pixel_pitch;
        if (t) *t = -q.z;
        return -q.z > 0.0;
    }
    const double z = -q.z;
    if (!(z > 0.0)) return false;
    if (px) *px = principal_x + focal_px * q.x / z;
    if (py) *py = principal_y - focal_px * q.y / z;
    if (t) *t = norm(q);
    return true;
}

double Camera::footprint_pitch(double t) const {
    if (model == CameraModel::Orthographic) return pixel_pitch;
    return t / focal_px;
}

bool Camera::valid(double tol) const {
    if (width < 1 || height < 1) return false;
    const Mat3& r = orientation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double d = dot(r.col(i), r.col(j)) - (i == j ? 1.0 : 0.0);
            if (std::abs(d) > tol) return false;
        }
    if (std::abs(r.det() - 1.0) > tol) return false;
    if (model == CameraModel::Pinhole && !(focal_px > 0.0)) return false;
    if (model == CameraModel::Orthographic && !(pixel_pitch > 0.0)) return false;
    return true;
}

Camera make_orthographic(int width, int height, double pixel_pitch, const Vec3& position,
                         const Mat3& orientation) {
    Camera c;
    c.model = CameraModel::Orthographic;
    c.width = width;
    c.height = height;
    c.pixel_pitch = pixel_pitch;
    c.position = position;
    c.orientation = orientation;
    return c;
}

Camera make_pinhole(int width, int height, double focal_px, const Vec3& position,
                    const Mat3& orientation) {
    Camera c;
    c.model = CameraModel::Pinhole;
    c.width = width;
    c.height = height;
    c.focal_px = focal_px;
    c.principal_x = width * 0.5;
    c.principal_y = height * 0.5;
    c.position = position;
    c.orientation = orientation;
    return c;
}

bool light_valid(const Light& l, double tol) {
    if (!is_finite(l.direction) || !is_finite(l.intensity)) return false;
    if (std::abs(norm(l.direction) - 1.0) > tol) return false;
    if (l.intensity.x < 0.0 || l.intensity.y < 0.0 || l.intensity.z < 0.0) return false;
    return true;
}

void SplatScene::validate(double tol) const {
    if (!camera.valid(tol)) throw ParamError("scene camera is invalid");
    for (size_t i = 0; i < gaussians.size(); ++i)
        if (!surfel_valid(gaussians[i], tol))
            throw ParamError("gaussian " + std::to_string(i) + " violates surfel invariants");
    if (densify_stats.size() != gaussians.size() ||
        densify_stats.update_count.size() != gaussians.size())
        throw ParamError("densify_stats length does not match gaussian count");
}

Box3 scene_bounds(const SplatScene& scene) {
    Box3 box;
    for (const SurfelGaussian& g : scene.gaussians) {
        double r = 3.0 * (g.scale_u > g.scale_v ? g.scale_u : g.scale_v);
        box.expand(g.center, r);
    }
    return box;
}

}  // namespace gsps
