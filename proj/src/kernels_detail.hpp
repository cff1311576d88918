// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

// Per-element kernel math shared between the scalar reference loops and
// the tail handling of the SIMD variants. Keeping one definition is what
// makes the bit-identity contract hold at block boundaries.

#pragma once

#include <cmath>

#include "gsps/kernels.hpp"

namespace gsps::kernels::detail {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double sign_of(double r) {
    return (r > 0.0 ? 1.0 : 0.0) - (r < 0.0 ? 1.0 : 0.0);
}

inline void shade_element(const double* ux, const double* uy, const double* uz, const double* ar,
                          const double* ag, const double* ab, const double* alpha, size_t i,
                          const double light_dir[3], const double light_int[3], double* out_r,
                          double* out_g, double* out_b) {
    const double d = (light_dir[0] * ux[i] + light_dir[1] * uy[i]) + light_dir[2] * uz[i];
    const double s = relu(d) * alpha[i];
    out_r[i] = (ar[i] * light_int[0]) * s;
    out_g[i] = (ag[i] * light_int[1]) * s;
    out_b[i] = (ab[i] * light_int[2]) * s;
}

// Full per-pixel pass of the fused shading gradient: forward for every
// light, L1 accumulation, and adjoints of inv_norm * sum|r| with respect
// to the unit normal, alpha and the albedo planes.
inline double shade_grad_pixel(const ShadeLightsGradArgs& a, size_t i) {
    const double ux = a.ux[i], uy = a.uy[i], uz = a.uz[i];
    const double alpha = a.alpha[i];
    const double ar = a.ar[i], ag = a.ag[i], ab = a.ab[i];

    double l1 = 0.0;
    double dux = 0.0, duy = 0.0, duz = 0.0;
    double dalpha = 0.0, dar = 0.0, dag = 0.0, dab = 0.0;

    for (int k = 0; k < a.light_count; ++k) {
        const double lx = a.light_dir[3 * k + 0];
        const double ly = a.light_dir[3 * k + 1];
        const double lz = a.light_dir[3 * k + 2];
        const double ir = a.light_int[3 * k + 0];
        const double ig = a.light_int[3 * k + 1];
        const double ib = a.light_int[3 * k + 2];

        const double d = (lx * ux + ly * uy) + lz * uz;
        const double rd = relu(d);
        const double s = rd * alpha;

        const double gr = ar * ir;
        const double gg = ag * ig;
        const double gb = ab * ib;

        const double rr = gr * s - a.obs_r[k][i];
        const double rg = gg * s - a.obs_g[k][i];
        const double rb = gb * s - a.obs_b[k][i];

        l1 += std::fabs(rr);
        l1 += std::fabs(rg);
        l1 += std::fabs(rb);

        const double cr = sign_of(rr) * a.inv_norm;
        const double cg = sign_of(rg) * a.inv_norm;
        const double cb = sign_of(rb) * a.inv_norm;

        dar += cr * (ir * s);
        dag += cg * (ig * s);
        dab += cb * (ib * s);

        const double dsum = (cr * gr + cg * gg) + cb * gb;
        dalpha += dsum * rd;
        const double gate = d > 0.0 ? 1.0 : 0.0;
        const double ddot = (dsum * alpha) * gate;
        dux += ddot * lx;
        duy += ddot * ly;
        duz += ddot * lz;
    }

    const double m = a.mask[i];
    a.d_ux[i] = dux * m;
    a.d_uy[i] = duy * m;
    a.d_uz[i] = duz * m;
    a.d_alpha[i] = dalpha * m;
    a.d_ar[i] = dar * m;
    a.d_ag[i] = dag * m;
    a.d_ab[i] = dab * m;
    return l1 * m;
}

inline double masked_l1_element(const double* a, const double* b, const double* mask, size_t i) {
    return std::fabs(a[i] - b[i]) * mask[i];
}

inline void normalize3_element(const double* x, const double* y, const double* z, size_t i,
                               double eps, double* ux, double* uy, double* uz, double* len) {
    const double l = std::sqrt((x[i] * x[i] + y[i] * y[i]) + z[i] * z[i]);
    const double inv = l > eps ? 1.0 / l : 0.0;
    ux[i] = x[i] * inv;
    uy[i] = y[i] * inv;
    uz[i] = z[i] * inv;
    if (len) len[i] = l;
}

inline void adam_element(double* param, const double* grad, double* m, double* v, size_t i,
                         double lr, double beta1, double beta2, double eps, double bias1,
                         double bias2) {
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    const double g = grad[i];
    m[i] = beta1 * m[i] + c1 * g;
    v[i] = beta2 * v[i] + c2 * (g * g);
    const double mhat = m[i] * bias1;
    const double vhat = v[i] * bias2;
    param[i] -= (lr * mhat) / (std::sqrt(vhat) + eps);
}

}  // namespace gsps::kernels::detail
