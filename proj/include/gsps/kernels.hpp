// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace gsps::kernels {

// The data-parallel inner loops of the pipeline: per-pixel Lambert
// shading (forward and fused forward+gradient over all lights), masked
// L1 reduction, buffer normalization, and the Adam parameter update.
//
// Every kernel has a scalar reference implementation and an AVX2
// variant selected at runtime. The two are bit-identical by contract:
// same operation trees per element, reductions accumulated in fixed
// 4-lane blocks, and the whole project builds with -ffp-contract=off.
// Equivalence is enforced by tests/test_kernels.cpp.

enum class Backend { Scalar, Avx2 };

// Fused Lambert shading forward + adjoints for one pixel range under
// all lights. Per pixel i and light k:
//   s    = max(0, l_k . u_i) * alpha_i
//   P_c  = (albedo_c * int_c) * s
//   r_c  = P_c - obs_c
// Returns sum over lights/channels of mask * |r|; writes the adjoints
// of (inv_norm * sum |r|) with respect to the unit normal u (not yet
// projected onto the normalization tangent space), alpha, and the
// composited albedo planes. The max(0,.) kink takes subgradient 0.
struct ShadeLightsGradArgs {
    size_t n = 0;
    const double* ux = nullptr;
    const double* uy = nullptr;
    const double* uz = nullptr;
    const double* alpha = nullptr;
    const double* ar = nullptr;
    const double* ag = nullptr;
    const double* ab = nullptr;
    const double* mask = nullptr;           // 0.0 or 1.0
    const double* const* obs_r = nullptr;   // per light, plane pointer at range start
    const double* const* obs_g = nullptr;
    const double* const* obs_b = nullptr;
    const double* light_dir = nullptr;      // 3 * light_count, xyz per light
    const double* light_int = nullptr;      // 3 * light_count
    int light_count = 0;
    double inv_norm = 1.0;                  // folded into every adjoint
    double* d_ux = nullptr;                 // outputs, overwritten
    double* d_uy = nullptr;
    double* d_uz = nullptr;
    double* d_alpha = nullptr;
    double* d_ar = nullptr;
    double* d_ag = nullptr;
    double* d_ab = nullptr;
};

struct KernelTable {
    // out_c = (albedo_c * int_c) * (max(0, l . u) * alpha)
    void (*shade)(const double* ux, const double* uy, const double* uz,
                  const double* ar, const double* ag, const double* ab,
                  const double* alpha, size_t n, const double light_dir[3],
                  const double light_int[3], double* out_r, double* out_g, double* out_b);

    double (*shade_lights_grad)(const ShadeLightsGradArgs& args);

    // sum_i mask[i] * |a[i] - b[i]|, blocked accumulation
    double (*masked_l1)(const double* a, const double* b, const double* mask, size_t n);

    // u = v / |v| when |v| > eps else 0; len receives |v| (may be null)
    void (*normalize3)(const double* x, const double* y, const double* z, size_t n,
                       double eps, double* ux, double* uy, double* uz, double* len);

    // m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
    // p -= lr * (m*bias1) / (sqrt(v*bias2) + eps)
    void (*adam_update)(double* param, const double* grad, double* m, double* v, size_t n,
                        double lr, double beta1, double beta2, double eps, double bias1,
                        double bias2);
};

bool backend_supported(Backend b);
const char* backend_name(Backend b);

// Selecting an unsupported backend returns false and keeps the current one.
bool set_backend(Backend b);
Backend active_backend();

// Active dispatch table (AVX2 when the CPU has it, unless overridden).
const KernelTable& table();

// Specific table for equivalence tests; null when unsupported.
const KernelTable* table_for(Backend b);

}  // namespace gsps::kernels
