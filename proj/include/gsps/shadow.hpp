// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsps/image.hpp"
#include "gsps/rasterizer.hpp"
#include "gsps/types.hpp"

namespace gsps {

// Orthographic camera looking back along the light direction, placed
// outside the bounds and framing the whole box (degenerate boxes get a
// minimal 1-unit frame).
Camera light_view_camera(const Light& light, const Box3& bounds, int width, int height);

struct ShadowResult {
    ImageU8 mask;                 // 1 = cast shadow
    ImageD point_depth_in_light;  // camera-view points re-expressed as light depths
    ImageD sampled_light_depth;   // bilinear light-map lookup per camera pixel
    RenderBuffers light_view;     // full render from the light camera
    Camera light_camera;
};

// Williams-style shadow test over the splatted geometry: back-project
// every camera pixel through its rendered depth, transform into the
// light frame, and compare against the light-view depth map plus bias.
// Pixels with no geometry or projecting outside the light frame are
// unshadowed. light_resolution_scale doubles the map by default.
ShadowResult shadow_mask_full(const SplatScene& scene, const Light& light,
                              const RenderBuffers& camera_buffers, double bias,
                              const RenderOptions& opts = {}, int light_resolution_scale = 2);

ImageU8 shadow_mask(const SplatScene& scene, const Light& light,
                    const RenderBuffers& camera_buffers, double bias,
                    const RenderOptions& opts = {});

}  // namespace gsps
