// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsps/errors.hpp"
#include "gsps/kernels.hpp"
#include "gsps/threading.hpp"

namespace gsps {

double* gaussian_param(SurfelGaussian& g, int k) {
    switch (k) {
        case 0: return &g.center.x;
        case 1: return &g.center.y;
        case 2: return &g.center.z;
        case 3: return &g.tangent_u.x;
        case 4: return &g.tangent_u.y;
        case 5: return &g.tangent_u.z;
        case 6: return &g.tangent_v.x;
        case 7: return &g.tangent_v.y;
        case 8: return &g.tangent_v.z;
        case 9: return &g.scale_u;
        case 10: return &g.scale_v;
        case 11: return &g.opacity;
        case 12: return &g.albedo.x;
        case 13: return &g.albedo.y;
        case 14: return &g.albedo.z;
    }
    return nullptr;
}

double gradient_param(const GradientSet& g, size_t i, int k) {
    switch (k) {
        case 0: return g.d_center[i].x;
        case 1: return g.d_center[i].y;
        case 2: return g.d_center[i].z;
        case 3: return g.d_tangent_u[i].x;
        case 4: return g.d_tangent_u[i].y;
        case 5: return g.d_tangent_u[i].z;
        case 6: return g.d_tangent_v[i].x;
        case 7: return g.d_tangent_v[i].y;
        case 8: return g.d_tangent_v[i].z;
        case 9: return g.d_scale_u[i];
        case 10: return g.d_scale_v[i];
        case 11: return g.d_opacity[i];
        case 12: return g.d_albedo[i].x;
        case 13: return g.d_albedo[i].y;
        case 14: return g.d_albedo[i].z;
    }
    return 0.0;
}

namespace {

constexpr size_t kPixelChunk = 4096;

// Stencil configuration of depth_to_normals at one pixel; backward
// needs the exact same neighbor choices the forward pass made.
struct StencilConfig {
    int xl, xr, yu, yd;
    double pitch;       // lateral scene units per pixel at this depth
    double tx, ty;      // finite differences
    double glen;        // |(tx, ty, 1)|
    bool valid = false;
};

inline bool depth_valid(const ImageD& depth, const ImageU8& mask, int x, int y) {
    return mask.contains(x, y) && mask.at(x, y) && std::isfinite(depth.at(x, y));
}

StencilConfig stencil_at(const ImageD& depth, const Camera& camera, const ImageU8& mask, int x,
                         int y) {
    StencilConfig s{};
    if (!mask.at(x, y) || !std::isfinite(depth.at(x, y))) return s;
    s.pitch = camera.footprint_pitch(depth.at(x, y));
    s.xl = depth_valid(depth, mask, x - 1, y) ? x - 1 : x;
    s.xr = depth_valid(depth, mask, x + 1, y) ? x + 1 : x;
    s.yu = depth_valid(depth, mask, x, y - 1) ? y - 1 : y;
    s.yd = depth_valid(depth, mask, x, y + 1) ? y + 1 : y;
    if (s.xl == s.xr && s.yu == s.yd) return s;  // isolated, constant (0,0,1)
    s.tx = s.xr != s.xl ? (depth.at(s.xr, y) - depth.at(s.xl, y)) / ((s.xr - s.xl) * s.pitch)
                        : 0.0;
    s.ty = s.yd != s.yu ? (depth.at(x, s.yu) - depth.at(x, s.yd)) / ((s.yd - s.yu) * s.pitch)
                        : 0.0;
    s.glen = std::sqrt((s.tx * s.tx + s.ty * s.ty) + 1.0);
    s.valid = true;
    return s;
}

// Per-tile gradient scratch, merged into the global set in tile order.
struct LocalGrads {
    std::vector<Vec3> center, tu, tv, albedo;
    std::vector<double> su, sv, opacity;
    void resize(size_t n) {
        center.assign(n, {});
        tu.assign(n, {});
        tv.assign(n, {});
        albedo.assign(n, {});
        su.assign(n, 0.0);
        sv.assign(n, 0.0);
        opacity.assign(n, 0.0);
    }
};

struct FragReplay {
    double f;        // opacity * weight
    double T;        // transmittance in front of this fragment
    double cdot;     // dO . c_k over all channels
    double u, v, t, w;
    Vec3 q;
    Vec3 ncam;       // flipped camera-space unit normal (blend value)
    double flip;     // +-1
    int index;
};

}  // namespace

std::pair<LossReport, GradientSet> backward(const SplatScene& scene, const ImageStack& stack,
                                            double lambda, const BackwardOptions& opts) {
    if (opts.render.mode != EvalMode::Surfel)
        throw ParamError("backward supports the surfel evaluation mode only");
    if (lambda < 0.0) throw ParamError("lambda must be nonnegative");
    if (scene.camera.width != stack.width() || scene.camera.height != stack.height())
        throw ParamError("scene camera resolution does not match the image stack");
    const int fg = count_true(stack.mask);
    if (fg == 0) throw ParamError("empty foreground");

    const Camera& cam = scene.camera;
    const int w = cam.width, h = cam.height;
    const size_t npx = size_t(w) * h;
    const int nlights = stack.count();
    const kernels::KernelTable& kt = kernels::table();

    // ---- forward render, fragments retained for the replay ----
    FragmentArena arena;
    const RenderBuffers buffers = render_with_fragments(scene, opts.render, arena);

    // ---- image-space adjoints ----
    ImageD ux(w, h), uy(w, h), uz(w, h), nlen(w, h);
    kt.normalize3(buffers.normal_x.ptr(), buffers.normal_y.ptr(), buffers.normal_z.ptr(), npx,
                  1e-6, ux.ptr(), uy.ptr(), uz.ptr(), nlen.ptr());

    ImageD d_ux(w, h), d_uy(w, h), d_uz(w, h), d_alpha(w, h), d_ar(w, h), d_ag(w, h), d_ab(w, h);

    std::vector<double> light_dir(static_cast<size_t>(nlights) * 3), light_int(static_cast<size_t>(nlights) * 3);
    for (int i = 0; i < nlights; ++i) {
        const Light& l = stack.lights[size_t(i)];
        light_dir[3 * size_t(i) + 0] = l.direction.x;
        light_dir[3 * size_t(i) + 1] = l.direction.y;
        light_dir[3 * size_t(i) + 2] = l.direction.z;
        light_int[3 * size_t(i) + 0] = l.intensity.x;
        light_int[3 * size_t(i) + 1] = l.intensity.y;
        light_int[3 * size_t(i) + 2] = l.intensity.z;
    }
    const double inv_norm = 1.0 / (3.0 * nlights * fg);

    const int nchunks = int((npx + kPixelChunk - 1) / kPixelChunk);
    const double l1_sum = ordered_sum(nchunks, [&](int ci) {
        const size_t begin = size_t(ci) * kPixelChunk;
        const size_t len = std::min(kPixelChunk, npx - begin);
        std::vector<const double*> pr(static_cast<size_t>(nlights)), pg(static_cast<size_t>(nlights)), pb(static_cast<size_t>(nlights));
        for (int i = 0; i < nlights; ++i) {
            pr[size_t(i)] = stack.images[size_t(i)].r.ptr() + begin;
            pg[size_t(i)] = stack.images[size_t(i)].g.ptr() + begin;
            pb[size_t(i)] = stack.images[size_t(i)].b.ptr() + begin;
        }
        kernels::ShadeLightsGradArgs args;
        args.n = len;
        args.ux = ux.ptr() + begin;
        args.uy = uy.ptr() + begin;
        args.uz = uz.ptr() + begin;
        args.alpha = buffers.alpha.ptr() + begin;
        args.ar = buffers.albedo_r.ptr() + begin;
        args.ag = buffers.albedo_g.ptr() + begin;
        args.ab = buffers.albedo_b.ptr() + begin;
        args.mask = stack.mask_plane.ptr() + begin;
        args.obs_r = pr.data();
        args.obs_g = pg.data();
        args.obs_b = pb.data();
        args.light_dir = light_dir.data();
        args.light_int = light_int.data();
        args.light_count = nlights;
        args.inv_norm = inv_norm;
        args.d_ux = d_ux.ptr() + begin;
        args.d_uy = d_uy.ptr() + begin;
        args.d_uz = d_uz.ptr() + begin;
        args.d_alpha = d_alpha.ptr() + begin;
        args.d_ar = d_ar.ptr() + begin;
        args.d_ag = d_ag.ptr() + begin;
        args.d_ab = d_ab.ptr() + begin;
        return kt.shade_lights_grad(args);
    });

    LossReport report;
    report.lambda = lambda;
    report.photometric = l1_sum / (3.0 * nlights * fg);

    // ---- normal-consistency term ----
    const ImageV3 nd = depth_to_normals(buffers.depth, cam, stack.mask);
    long domain_count = 0;
    double ln_sum = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!stack.mask.at(x, y) || !(buffers.alpha.at(x, y) > kNormalDomainAlphaMin))
                continue;
            const Vec3 nhat{ux.at(x, y), uy.at(x, y), uz.at(x, y)};
            ln_sum += 1.0 - dot(nhat, nd.at(x, y));
            ++domain_count;
        }
    report.empty_normal_domain = domain_count == 0;
    report.normal_reg = domain_count > 0 ? ln_sum / double(domain_count) : 0.0;
    report.total = report.photometric + lambda * report.normal_reg;

    ImageD d_depth(w, h);
    if (lambda > 0.0 && domain_count > 0) {
        const double kappa = lambda / double(domain_count);
        // direct path into the splatted unit normal
        ImageV3 d_nd(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!stack.mask.at(x, y) || !(buffers.alpha.at(x, y) > kNormalDomainAlphaMin))
                    continue;
                const Vec3 ndp = nd.at(x, y);
                d_ux.at(x, y) += -kappa * ndp.x;
                d_uy.at(x, y) += -kappa * ndp.y;
                d_uz.at(x, y) += -kappa * ndp.z;
                d_nd.at(x, y) = Vec3{ux.at(x, y), uy.at(x, y), uz.at(x, y)} * -kappa;
            }

        if (opts.normal_reg_depth_path) {
            // project d_nd through the stencil normalization to (dtx, dty)
            ImageD dtx(w, h), dty(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const Vec3 dn = d_nd.at(x, y);
                    if (dn.x == 0.0 && dn.y == 0.0 && dn.z == 0.0) continue;
                    const StencilConfig s = stencil_at(buffers.depth, cam, stack.mask, x, y);
                    if (!s.valid) continue;
                    const Vec3 nu{s.tx / s.glen, s.ty / s.glen, 1.0 / s.glen};
                    const Vec3 dg = (dn - nu * dot(nu, dn)) / s.glen;
                    dtx.at(x, y) = dg.x;
                    dty.at(x, y) = dg.y;
                }

            // gather dtx/dty of every stencil this pixel's depth feeds
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    if (!depth_valid(buffers.depth, stack.mask, x, y)) continue;
                    double dd = 0.0;
                    // horizontal stencils centered at x-1, x, x+1
                    for (int qx = x - 1; qx <= x + 1; ++qx) {
                        if (!dtx.contains(qx, y)) continue;
                        const double dv = dtx.at(qx, y);
                        if (dv == 0.0) continue;
                        const StencilConfig s = stencil_at(buffers.depth, cam, stack.mask, qx, y);
                        if (!s.valid || s.xr == s.xl) continue;
                        const double denom = (s.xr - s.xl) * s.pitch;
                        if (x == s.xr) dd += dv / denom;
                        if (x == s.xl) dd -= dv / denom;
                        // pinhole: the per-pixel lateral pitch depends on
                        // the center depth itself
                        if (qx == x && cam.model == CameraModel::Pinhole)
                            dd += -dv * s.tx / buffers.depth.at(x, y);
                    }
                    for (int qy = y - 1; qy <= y + 1; ++qy) {
                        if (!dty.contains(x, qy)) continue;
                        const double dv = dty.at(x, qy);
                        if (dv == 0.0) continue;
                        const StencilConfig s = stencil_at(buffers.depth, cam, stack.mask, x, qy);
                        if (!s.valid || s.yd == s.yu) continue;
                        const double denom = (s.yd - s.yu) * s.pitch;
                        if (y == s.yu) dd += dv / denom;
                        if (y == s.yd) dd -= dv / denom;
                        if (qy == y && cam.model == CameraModel::Pinhole)
                            dd += -dv * s.ty / buffers.depth.at(x, y);
                    }
                    d_depth.at(x, y) = dd;
                }
        }
    }

    // ---- project the unit-normal adjoint back onto the blended normal ----
    ImageD d_nx(w, h), d_ny(w, h), d_nz(w, h), d_draw(w, h);
    for (size_t i = 0; i < npx; ++i) {
        const double len = nlen.data[i];
        if (len > 1e-6) {
            const Vec3 u{ux.data[i], uy.data[i], uz.data[i]};
            const Vec3 du{d_ux.data[i], d_uy.data[i], d_uz.data[i]};
            const Vec3 dn = (du - u * dot(u, du)) / len;
            d_nx.data[i] = dn.x;
            d_ny.data[i] = dn.y;
            d_nz.data[i] = dn.z;
        }
        // depth normalization D = D_raw / alpha
        const double dd = d_depth.data[i];
        if (dd != 0.0) {
            const double a = buffers.alpha.data[i];
            if (a > 0.0 && std::isfinite(buffers.depth.data[i])) {
                d_draw.data[i] = dd / a;
                d_alpha.data[i] += -dd * buffers.depth.data[i] / a;
            }
        }
    }

    // ---- rasterizer backward, tile-parallel with ordered merge ----
    const GaussianCache cache = build_gaussian_cache(scene);
    const TileBins bins = bin_gaussians(scene, opts.render);
    const int ntiles = bins.tiles_x * bins.tiles_y;
    std::vector<LocalGrads> local(static_cast<size_t>(ntiles));

    parallel_for(ntiles, [&](int tile) {
        const std::vector<int>& bin = bins.bins[size_t(tile)];
        if (bin.empty()) return;
        LocalGrads& lg = local[size_t(tile)];
        lg.resize(bin.size());
        const int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
        const int x0 = tx * opts.render.tile_size, x1 = std::min(w, x0 + opts.render.tile_size);
        const int y0 = ty * opts.render.tile_size, y1 = std::min(h, y0 + opts.render.tile_size);

        std::vector<FragReplay> replay;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                const Vec3 dA{d_ar.at(x, y), d_ag.at(x, y), d_ab.at(x, y)};
                const Vec3 dN{d_nx.at(x, y), d_ny.at(x, y), d_nz.at(x, y)};
                const double dDraw = d_draw.at(x, y);
                const double da = d_alpha.at(x, y);
                if (dA == Vec3{} && dN == Vec3{} && dDraw == 0.0 && da == 0.0) continue;

                const std::span<const SplatFragment> frags =
                    arena.at(size_t(y) * size_t(w) + size_t(x));
                if (frags.empty()) continue;
                const Camera::Ray ray = cam.pixel_ray(x + 0.5, y + 0.5);

                // forward replay
                replay.clear();
                double T = 1.0;
                for (const SplatFragment& f : frags) {
                    const SurfelGaussian& g = scene.gaussians[size_t(f.gaussian_index)];
                    FragReplay r;
                    r.index = f.gaussian_index;
                    r.w = f.weight;
                    r.t = f.depth_at_pixel;
                    r.f = g.opacity * f.weight;
                    r.T = T;
                    Vec3 nu = cache.unit_normal[size_t(f.gaussian_index)];
                    r.flip = dot(nu, ray.dir) > 0.0 ? -1.0 : 1.0;
                    r.ncam = cam.orientation.transpose_mul(nu * r.flip);
                    const Vec3 q = ray.origin + ray.dir * r.t - g.center;
                    r.q = q;
                    r.u = dot(q, g.tangent_u) / g.scale_u;
                    r.v = dot(q, g.tangent_v) / g.scale_v;
                    r.cdot = (dot(dA, g.albedo) + dot(dN, r.ncam)) + dDraw * r.t;
                    replay.push_back(r);
                    T *= 1.0 - r.f;
                    if (T < opts.render.t_stop) break;
                }

                // suffix recurrence, division-free
                double R = -da;
                for (int k = int(replay.size()) - 1; k >= 0; --k) {
                    const FragReplay& r = replay[size_t(k)];
                    const SurfelGaussian& g = scene.gaussians[size_t(r.index)];
                    const double df = r.T * (r.cdot - R);
                    R = r.cdot * r.f + (1.0 - r.f) * R;

                    const double contrib = r.f * r.T;
                    const size_t li = size_t(
                        std::lower_bound(bin.begin(), bin.end(), r.index) - bin.begin());

                    lg.albedo[li] += dA * contrib;
                    lg.opacity[li] += df * r.w;

                    // weight and geometry chain
                    const double dw = df * g.opacity;
                    const double du = -r.u * r.w * dw;
                    const double dv = -r.v * r.w * dw;

                    Vec3 dq = g.tangent_u * (du / g.scale_u) + g.tangent_v * (dv / g.scale_v);
                    Vec3 dc = -dq;
                    Vec3 dtu = r.q * (du / g.scale_u);
                    Vec3 dtv = r.q * (dv / g.scale_v);
                    lg.su[li] += -du * r.u / g.scale_u;
                    lg.sv[li] += -dv * r.v / g.scale_v;

                    // t adjoint: the depth channel plus the hit point's motion
                    const double dt = dDraw * contrib + dot(dq, ray.dir);
                    const Vec3 tw = cache.plane_normal[size_t(r.index)];
                    const double B = dot(ray.dir, tw);
                    dc += tw * (dt / B);
                    Vec3 dtw = r.q * (-dt / B);

                    // normal channel: unit plane normal, flipped, to camera space
                    const Vec3 dn_world = cam.orientation * (dN * contrib);
                    const Vec3 dn_unit = dn_world * r.flip;
                    const Vec3 nu = cache.unit_normal[size_t(r.index)];
                    const double twlen = norm(tw);
                    dtw += (dn_unit - nu * dot(nu, dn_unit)) / twlen;

                    dtu += cross(g.tangent_v, dtw);
                    dtv += cross(dtw, g.tangent_u);

                    lg.center[li] += dc;
                    lg.tu[li] += dtu;
                    lg.tv[li] += dtv;
                }
            }
    });

    // ordered merge
    GradientSet grads;
    grads.resize(scene.size());
    for (int tile = 0; tile < ntiles; ++tile) {
        const std::vector<int>& bin = bins.bins[size_t(tile)];
        const LocalGrads& lg = local[size_t(tile)];
        if (bin.empty() || lg.center.empty()) continue;
        for (size_t li = 0; li < bin.size(); ++li) {
            const size_t gi = size_t(bin[li]);
            grads.d_center[gi] += lg.center[li];
            grads.d_tangent_u[gi] += lg.tu[li];
            grads.d_tangent_v[gi] += lg.tv[li];
            grads.d_scale_u[gi] += lg.su[li];
            grads.d_scale_v[gi] += lg.sv[li];
            grads.d_opacity[gi] += lg.opacity[li];
            grads.d_albedo[gi] += lg.albedo[li];
        }
    }

    for (size_t i = 0; i < grads.size(); ++i) {
        bool ok = is_finite(grads.d_center[i]) && is_finite(grads.d_tangent_u[i]) &&
                  is_finite(grads.d_tangent_v[i]) && is_finite(grads.d_albedo[i]) &&
                  std::isfinite(grads.d_scale_u[i]) && std::isfinite(grads.d_scale_v[i]) &&
                  std::isfinite(grads.d_opacity[i]);
        if (!ok)
            throw NumericError("non-finite gradient for gaussian " + std::to_string(i));
    }
    return {report, grads};
}

GradientSet fd_gradient(const SplatScene& scene, const ImageStack& stack, double lambda, double h,
                        const RenderOptions& opts) {
    if (!(h > 0.0)) throw ParamError("finite-difference step must be positive");
    GradientSet grads;
    grads.resize(scene.size());
    SplatScene work = scene;
    for (size_t i = 0; i < scene.size(); ++i)
        for (int k = 0; k < kParamsPerGaussian; ++k) {
            double* p = gaussian_param(work.gaussians[i], k);
            const double saved = *p;
            *p = saved + h;
            const double lp = total_loss(work, stack, lambda, opts).total;
            *p = saved - h;
            const double lm = total_loss(work, stack, lambda, opts).total;
            *p = saved;
            const double g = (lp - lm) / (2.0 * h);
            switch (k) {
                case 0: grads.d_center[i].x = g; break;
                case 1: grads.d_center[i].y = g; break;
                case 2: grads.d_center[i].z = g; break;
                case 3: grads.d_tangent_u[i].x = g; break;
                case 4: grads.d_tangent_u[i].y = g; break;
                case 5: grads.d_tangent_u[i].z = g; break;
                case 6: grads.d_tangent_v[i].x = g; break;
                case 7: grads.d_tangent_v[i].y = g; break;
                case 8: grads.d_tangent_v[i].z = g; break;
                case 9: grads.d_scale_u[i] = g; break;
                case 10: grads.d_scale_v[i] = g; break;
                case 11: grads.d_opacity[i] = g; break;
                case 12: grads.d_albedo[i].x = g; break;
                case 13: grads.d_albedo[i].y = g; break;
                case 14: grads.d_albedo[i].z = g; break;
            }
        }
    return grads;
}

}  // namespace gsps
