// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gsps/vec.hpp"

namespace gsps {

// One 2D Gaussian primitive: a unit-weight Gaussian living on the plane
// spanned by its orthonormal tangent frame, with per-axis extents and a
// constant RGB albedo. The surfel normal is derived (tangent_u x tangent_v),
// never stored.
struct SurfelGaussian {
    Vec3 center;
    Vec3 tangent_u{1.0, 0.0, 0.0};
    Vec3 tangent_v{0.0, 1.0, 0.0};
    double scale_u = 1.0;
    double scale_v = 1.0;
    double opacity = 0.5;   // in [0,1]
    Vec3 albedo{1.0, 1.0, 1.0};
};

Vec3 surfel_normal(const SurfelGaussian& g);
Vec3 surfel_point(const SurfelGaussian& g, double u, double v);
double gaussian_weight(double u, double v);

bool surfel_valid(const SurfelGaussian& g, double tol = 1e-6);

enum class CameraModel { Orthographic, Pinhole };

// Camera space: x right, y up, looking along -z. `orientation` maps
// camera coordinates to world coordinates. Pixel (i,j) has continuous
// coordinates (i+0.5, j+0.5); row 0 is the top of the image.
struct Camera {
    CameraModel model = CameraModel::Orthographic;
    Vec3 position{0.0, 0.0, 3.0};
    Mat3 orientation;
    double focal_px = 0.0;       // pinhole only
    double principal_x = 0.0;    // pinhole only, pixels
    double principal_y = 0.0;
    double pixel_pitch = 1.0;    // orthographic only, scene units per pixel
    int width = 0;
    int height = 0;

    struct Ray {
        Vec3 origin;
        Vec3 dir;  // unit length
    };

    Ray pixel_ray(double px, double py) const;

    // World point -> continuous pixel coordinates plus ray depth.
    // Returns false when the point is not in front of the camera.
    bool project(const Vec3& p, double* px, double* py, double* t) const;

    // World-space extent of one pixel at ray depth t.
    double footprint_pitch(double t) const;

    bool valid(double tol = 1e-6) const;
};

Camera make_orthographic(int width, int height, double pixel_pitch, const Vec3& position,
                         const Mat3& orientation = Mat3::identity());
Camera make_pinhole(int width, int height, double focal_px, const Vec3& position,
                    const Mat3& orientation = Mat3::identity());

// Direction points FROM the surface TOWARD the light.
struct Light {
    Vec3 direction{0.0, 0.0, 1.0};
    Vec3 intensity{1.0, 1.0, 1.0};
};

bool light_valid(const Light& l, double tol = 1e-6);

// Per-Gaussian positional-gradient bookkeeping driving clone/split
// decisions. Always kept the same length as the Gaussian list.
struct DensifyStats {
    std::vector<double> grad_accum;  // sum of |d_center| over steps
    std::vector<int> update_count;

    void resize(size_t n) {
        grad_accum.assign(n, 0.0);
        update_count.assign(n, 0);
    }
    size_t size() const { return grad_accum.size(); }
};

// The full optimizable parameter set. Single writer (the optimizer);
// renders take an immutable snapshot.
struct SplatScene {
    std::vector<SurfelGaussian> gaussians;
    Camera camera;
    DensifyStats densify_stats;

    size_t size() const { return gaussians.size(); }

    // Throws ParamError on the first violated invariant.
    void validate(double tol = 1e-6) const;
};

struct Box3 {
    Vec3 lo{0, 0, 0};
    Vec3 hi{-1, -1, -1};  // default-constructed box is empty

    bool empty() const { return lo.x > hi.x || lo.y > hi.y || lo.z > hi.z; }
    void expand(const Vec3& p, double radius = 0.0) {
        if (empty()) {
            lo = p - Vec3(radius, radius, radius);
            hi = p + Vec3(radius, radius, radius);
            return;
        }
        for (int i = 0; i < 3; ++i) {
            if (p[i] - radius < lo[i]) lo[i] = p[i] - radius;
            if (p[i] + radius > hi[i]) hi[i] = p[i] + radius;
        }
    }
    Vec3 center() const { return (lo + hi) * 0.5; }
    Vec3 extent() const { return hi - lo; }
};

// Centers padded by each surfel's 3-sigma radius.
Box3 scene_bounds(const SplatScene& scene);

}  // namespace gsps
