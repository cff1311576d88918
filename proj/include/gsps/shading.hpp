// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsps/image.hpp"
#include "gsps/rasterizer.hpp"
#include "gsps/types.hpp"

namespace gsps {

// Lambert shading of splatted buffers for one light, per pixel:
//   I = albedo (.) intensity * max(0, l . n_hat) * alpha
// n_hat is the blended normal renormalized when |n| > 1e-6, else the
// pixel stays black. The clamp realizes attached shadows. Light
// direction and buffer normals both live in camera coordinates.
ColorImage shade(const RenderBuffers& buffers, const Light& light);

// As shade, forced to zero where shadow_mask is set (cast shadows).
ColorImage shade_with_shadow(const RenderBuffers& buffers, const Light& light,
                             const ImageU8& shadow_mask);

}  // namespace gsps
