// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/shading.hpp"

#include "gsps/errors.hpp"
#include "gsps/kernels.hpp"

namespace gsps {

ColorImage shade(const RenderBuffers& buffers, const Light& light) {
    const int w = buffers.width, h = buffers.height;
    const size_t n = size_t(w) * h;
    ColorImage out(w, h);

    ImageD ux(w, h), uy(w, h), uz(w, h);
    const kernels::KernelTable& k = kernels::table();
    k.normalize3(buffers.normal_x.ptr(), buffers.normal_y.ptr(), buffers.normal_z.ptr(), n, 1e-6,
                 ux.ptr(), uy.ptr(), uz.ptr(), nullptr);

    const double dir[3] = {light.direction.x, light.direction.y, light.direction.z};
    const double inten[3] = {light.intensity.x, light.intensity.y, light.intensity.z};
    k.shade(ux.ptr(), uy.ptr(), uz.ptr(), buffers.albedo_r.ptr(), buffers.albedo_g.ptr(),
            buffers.albedo_b.ptr(), buffers.alpha.ptr(), n, dir, inten, out.r.ptr(), out.g.ptr(),
            out.b.ptr());
    return out;
}

ColorImage shade_with_shadow(const RenderBuffers& buffers, const Light& light,
                             const ImageU8& shadow_mask) {
    if (!shadow_mask.same_size(buffers.width, buffers.height))
        throw ParamError("shadow mask resolution does not match the render buffers");
    ColorImage out = shade(buffers, light);
    for (size_t i = 0; i < shadow_mask.data.size(); ++i)
        if (shadow_mask.data[i]) {
            out.r.data[i] = 0.0;
            out.g.data[i] = 0.0;
            out.b.data[i] = 0.0;
        }
    return out;
}

}  // namespace gsps
