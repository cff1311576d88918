// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/loss.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "gsps/errors.hpp"
#include "gsps/kernels.hpp"

namespace gsps {

std::string loss_report_json_line(const LossReport& report, int iteration,
                                  size_t gaussian_count) {
    nlohmann::ordered_json j;
    j["iter"] = iteration;
    j["l_c"] = report.photometric;
    j["l_n"] = report.normal_reg;
    j["total"] = report.total;
    j["lambda"] = report.lambda;
    j["gaussians"] = gaussian_count;
    return j.dump();
}

double photometric_loss(const std::vector<ColorImage>& predicted, const ImageStack& observed) {
    if (int(predicted.size()) != observed.count())
        throw ParamError("predicted image count does not match the observations");
    const int fg = count_true(observed.mask);
    if (fg == 0) throw ParamError("empty foreground");

    const kernels::KernelTable& k = kernels::table();
    const size_t n = observed.mask.data.size();
    double sum = 0.0;
    for (int i = 0; i < observed.count(); ++i) {
        if (!predicted[size_t(i)].r.same_size(observed.mask))
            throw ParamError("predicted image " + std::to_string(i) + " resolution mismatch");
        for (int c = 0; c < 3; ++c)
            sum += k.masked_l1(predicted[size_t(i)].plane(c).ptr(),
                               observed.images[size_t(i)].plane(c).ptr(),
                               observed.mask_plane.ptr(), n);
    }
    return sum / (3.0 * observed.count() * fg);
}

namespace {

inline bool depth_valid(const ImageD& depth, const ImageU8& mask, int x, int y) {
    return mask.contains(x, y) && mask.at(x, y) && std::isfinite(depth.at(x, y));
}

}  // namespace

ImageV3 depth_to_normals(const ImageD& depth, const Camera& camera, const ImageU8& mask,
                         int* flagged) {
    if (!depth.same_size(mask)) throw ParamError("depth and mask resolutions differ");
    ImageV3 out(depth.width, depth.height);
    int flags = 0;

    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            if (!mask.at(x, y)) continue;
            if (!std::isfinite(depth.at(x, y))) {
                out.at(x, y) = {0.0, 0.0, 1.0};
                ++flags;
                continue;
            }
            // Lateral scene-unit spacing of one pixel at this depth.
            const double pitch = camera.footprint_pitch(depth.at(x, y));

            const int xl = depth_valid(depth, mask, x - 1, y) ? x - 1 : x;
            const int xr = depth_valid(depth, mask, x + 1, y) ? x + 1 : x;
            const int yu = depth_valid(depth, mask, x, y - 1) ? y - 1 : y;
            const int yd = depth_valid(depth, mask, x, y + 1) ? y + 1 : y;

            if (xl == xr && yu == yd) {
                out.at(x, y) = {0.0, 0.0, 1.0};
                ++flags;
                continue;
            }
            // camera x grows with pixel x, camera y shrinks with pixel y
            double tx = 0.0, ty = 0.0;
            if (xr != xl) tx = (depth.at(xr, y) - depth.at(xl, y)) / ((xr - xl) * pitch);
            if (yd != yu) ty = (depth.at(x, yu) - depth.at(x, yd)) / ((yd - yu) * pitch);
            out.at(x, y) = normalized(Vec3{tx, ty, 1.0});
        }
    if (flagged) *flagged = flags;
    return out;
}

double normal_consistency_loss(const ImageV3& splatted, const ImageV3& from_depth,
                               const ImageD& alpha, const ImageU8& mask, bool* empty_domain) {
    if (!splatted.same_size(mask) || !from_depth.same_size(mask) || !alpha.same_size(mask))
        throw ParamError("normal consistency inputs have mismatched resolutions");
    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y) || !(alpha.at(x, y) > kNormalDomainAlphaMin)) continue;
            const Vec3 ns = splatted.at(x, y);
            const double l = norm(ns);
            // a vanished splat normal counts as fully inconsistent
            const double cosine = l > 1e-6 ? dot(ns / l, from_depth.at(x, y)) : 0.0;
            sum += 1.0 - cosine;
            ++count;
        }
    if (empty_domain) *empty_domain = count == 0;
    return count > 0 ? sum / double(count) : 0.0;
}

LossReport total_loss(const SplatScene& scene, const ImageStack& stack, double lambda,
                      const RenderOptions& opts) {
    if (lambda < 0.0) throw ParamError("lambda must be nonnegative");
    if (scene.camera.width != stack.width() || scene.camera.height != stack.height())
        throw ParamError("scene camera resolution does not match the image stack");
    const int fg = count_true(stack.mask);
    if (fg == 0) throw ParamError("empty foreground");

    const RenderBuffers buffers = render(scene, opts);
    const size_t n = size_t(buffers.width) * buffers.height;
    const kernels::KernelTable& k = kernels::table();

    ImageD ux(buffers.width, buffers.height), uy(buffers.width, buffers.height),
        uz(buffers.width, buffers.height);
    k.normalize3(buffers.normal_x.ptr(), buffers.normal_y.ptr(), buffers.normal_z.ptr(), n, 1e-6,
                 ux.ptr(), uy.ptr(), uz.ptr(), nullptr);

    double sum = 0.0;
    ColorImage pred(buffers.width, buffers.height);
    for (int i = 0; i < stack.count(); ++i) {
        const Light& light = stack.lights[size_t(i)];
        const double dir[3] = {light.direction.x, light.direction.y, light.direction.z};
        const double inten[3] = {light.intensity.x, light.intensity.y, light.intensity.z};
        k.shade(ux.ptr(), uy.ptr(), uz.ptr(), buffers.albedo_r.ptr(), buffers.albedo_g.ptr(),
                buffers.albedo_b.ptr(), buffers.alpha.ptr(), n, dir, inten, pred.r.ptr(),
                pred.g.ptr(), pred.b.ptr());
        for (int c = 0; c < 3; ++c)
            sum += k.masked_l1(pred.plane(c).ptr(), stack.images[size_t(i)].plane(c).ptr(),
                               stack.mask_plane.ptr(), n);
    }

    LossReport report;
    report.lambda = lambda;
    report.photometric = sum / (3.0 * stack.count() * fg);

    const ImageV3 nd = depth_to_normals(buffers.depth, scene.camera, stack.mask);
    ImageV3 nsplat(buffers.width, buffers.height);
    for (size_t i = 0; i < n; ++i)
        nsplat.data[i] = {buffers.normal_x.data[i], buffers.normal_y.data[i],
                          buffers.normal_z.data[i]};
    report.normal_reg = normal_consistency_loss(nsplat, nd, buffers.alpha, stack.mask,
                                                &report.empty_normal_domain);
    report.total = report.photometric + lambda * report.normal_reg;
    return report;
}

}  // namespace gsps
