// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gsps/image.hpp"
#include "gsps/ingest.hpp"
#include "gsps/rasterizer.hpp"
#include "gsps/types.hpp"

namespace gsps {

struct LossReport {
    double photometric = 0.0;  // L1 image term
    double normal_reg = 0.0;   // splat-vs-depth normal consistency
    double total = 0.0;        // photometric + lambda * normal_reg, exactly
    double lambda = 0.0;
    bool empty_normal_domain = false;
};

// One JSON line for the training log.
std::string loss_report_json_line(const LossReport& report, int iteration, size_t gaussian_count);

// Mean absolute difference over foreground pixels, channels and lights.
double photometric_loss(const std::vector<ColorImage>& predicted, const ImageStack& observed);

// Normals implied by the rendered depth map (ray-parameter depth, the
// rasterizer's convention): n = normalize(dt/dx, dt/dy, 1) in camera
// space, central differences with one-sided fallbacks at mask borders.
// A neighbor participates only when masked and finite. Isolated pixels
// get (0,0,1) and are counted in *flagged.
ImageV3 depth_to_normals(const ImageD& depth, const Camera& camera, const ImageU8& mask,
                         int* flagged = nullptr);

// Mean of (1 - n_splat_hat . n_depth) over mask pixels with alpha above
// the domain threshold.
inline constexpr double kNormalDomainAlphaMin = 0.5;
double normal_consistency_loss(const ImageV3& splatted, const ImageV3& from_depth,
                               const ImageD& alpha, const ImageU8& mask,
                               bool* empty_domain = nullptr);

// Renders once, shades every light off the shared buffers, and
// assembles the composite loss.
LossReport total_loss(const SplatScene& scene, const ImageStack& stack, double lambda,
                      const RenderOptions& opts = {});

}  // namespace gsps
