// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "gsps/ingest.hpp"
#include "gsps/loss.hpp"
#include "gsps/rasterizer.hpp"
#include "gsps/types.hpp"

namespace gsps {

// Adjoints of the composite loss with respect to every Gaussian
// parameter, index-aligned with the scene.
struct GradientSet {
    std::vector<Vec3> d_center;
    std::vector<Vec3> d_tangent_u;
    std::vector<Vec3> d_tangent_v;
    std::vector<double> d_scale_u;
    std::vector<double> d_scale_v;
    std::vector<double> d_opacity;
    std::vector<Vec3> d_albedo;

    void resize(size_t n) {
        d_center.assign(n, {});
        d_tangent_u.assign(n, {});
        d_tangent_v.assign(n, {});
        d_scale_u.assign(n, 0.0);
        d_scale_v.assign(n, 0.0);
        d_opacity.assign(n, 0.0);
        d_albedo.assign(n, {});
    }
    size_t size() const { return d_center.size(); }
};

// Scalar-parameter view used by the finite-difference oracle and the
// optimizer: 15 parameters per Gaussian, fixed order (center xyz,
// tangent_u xyz, tangent_v xyz, scale_u, scale_v, opacity, albedo rgb).
inline constexpr int kParamsPerGaussian = 15;
double* gaussian_param(SurfelGaussian& g, int k);
double gradient_param(const GradientSet& grads, size_t index, int k);

struct BackwardOptions {
    RenderOptions render;
    // Open choice isolated for ablation: let the normal-consistency term
    // also backpropagate through the depth buffer's stencil.
    bool normal_reg_depth_path = true;
};

// Exact adjoints of the implemented forward computation; clamp kinks and
// the fragment cutoff take subgradient 0. Deterministic across runs and
// thread counts. Throws NumericError naming the Gaussian on non-finite
// intermediates.
std::pair<LossReport, GradientSet> backward(const SplatScene& scene, const ImageStack& stack,
                                            double lambda, const BackwardOptions& opts = {});

// Independent oracle: central differences of total_loss over every
// scalar parameter.
GradientSet fd_gradient(const SplatScene& scene, const ImageStack& stack, double lambda,
                        double h, const RenderOptions& opts = {});

}  // namespace gsps
