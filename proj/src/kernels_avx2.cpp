// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

// AVX2 kernel variants. Each loop mirrors the scalar reference operation
// tree exactly (no FMA, same add/mul order, same 4-lane reduction
// blocks), so outputs are bit-identical to kernels_scalar.cpp. Tails are
// the shared per-element functions. This TU is compiled with -mavx2;
// callers reach it only after the runtime CPU check in the dispatcher.

#include "gsps/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include "kernels_detail.hpp"

namespace gsps::kernels {
namespace {

using namespace detail;

inline __m256d abs_pd(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

// (r > 0) - (r < 0) as doubles
inline __m256d sign_pd(__m256d r) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d gt = _mm256_and_pd(_mm256_cmp_pd(r, zero, _CMP_GT_OQ), one);
    __m256d lt = _mm256_and_pd(_mm256_cmp_pd(r, zero, _CMP_LT_OQ), one);
    return _mm256_sub_pd(gt, lt);
}

// ((l0 + l1) + (l2 + l3)), matching the scalar accumulator combine.
inline double reduce_pd(__m256d acc) {
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    double s01 = _mm_cvtsd_f64(_mm_hadd_pd(lo, lo));
    double s23 = _mm_cvtsd_f64(_mm_hadd_pd(hi, hi));
    return s01 + s23;
}

void shade_avx2(const double* ux, const double* uy, const double* uz, const double* ar,
                const double* ag, const double* ab, const double* alpha, size_t n,
                const double light_dir[3], const double light_int[3], double* out_r,
                double* out_g, double* out_b) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d lx = _mm256_set1_pd(light_dir[0]);
    const __m256d ly = _mm256_set1_pd(light_dir[1]);
    const __m256d lz = _mm256_set1_pd(light_dir[2]);
    const __m256d ir = _mm256_set1_pd(light_int[0]);
    const __m256d ig = _mm256_set1_pd(light_int[1]);
    const __m256d ib = _mm256_set1_pd(light_int[2]);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vux = _mm256_loadu_pd(ux + i);
        __m256d vuy = _mm256_loadu_pd(uy + i);
        __m256d vuz = _mm256_loadu_pd(uz + i);
        __m256d d = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(lx, vux), _mm256_mul_pd(ly, vuy)),
            _mm256_mul_pd(lz, vuz));
        __m256d s = _mm256_mul_pd(_mm256_max_pd(d, zero), _mm256_loadu_pd(alpha + i));
        _mm256_storeu_pd(out_r + i,
                         _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(ar + i), ir), s));
        _mm256_storeu_pd(out_g + i,
                         _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(ag + i), ig), s));
        _mm256_storeu_pd(out_b + i,
                         _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(ab + i), ib), s));
    }
    for (; i < n; ++i)
        shade_element(ux, uy, uz, ar, ag, ab, alpha, i, light_dir, light_int, out_r, out_g,
                      out_b);
}

double shade_lights_grad_avx2(const ShadeLightsGradArgs& a) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d inv_norm = _mm256_set1_pd(a.inv_norm);
    __m256d acc = zero;
    size_t i = 0;
    for (; i + 4 <= a.n; i += 4) {
        __m256d ux = _mm256_loadu_pd(a.ux + i);
        __m256d uy = _mm256_loadu_pd(a.uy + i);
        __m256d uz = _mm256_loadu_pd(a.uz + i);
        __m256d alpha = _mm256_loadu_pd(a.alpha + i);
        __m256d ar = _mm256_loadu_pd(a.ar + i);
        __m256d ag = _mm256_loadu_pd(a.ag + i);
        __m256d ab = _mm256_loadu_pd(a.ab + i);

        __m256d l1 = zero;
        __m256d dux = zero, duy = zero, duz = zero;
        __m256d dalpha = zero, dar = zero, dag = zero, dab = zero;

        for (int k = 0; k < a.light_count; ++k) {
            __m256d lx = _mm256_set1_pd(a.light_dir[3 * k + 0]);
            __m256d ly = _mm256_set1_pd(a.light_dir[3 * k + 1]);
            __m256d lz = _mm256_set1_pd(a.light_dir[3 * k + 2]);
            __m256d ir = _mm256_set1_pd(a.light_int[3 * k + 0]);
            __m256d ig = _mm256_set1_pd(a.light_int[3 * k + 1]);
            __m256d ib = _mm256_set1_pd(a.light_int[3 * k + 2]);

            __m256d d = _mm256_add_pd(
                _mm256_add_pd(_mm256_mul_pd(lx, ux), _mm256_mul_pd(ly, uy)),
                _mm256_mul_pd(lz, uz));
            __m256d rd = _mm256_max_pd(d, zero);
            __m256d s = _mm256_mul_pd(rd, alpha);

            __m256d gr = _mm256_mul_pd(ar, ir);
            __m256d gg = _mm256_mul_pd(ag, ig);
            __m256d gb = _mm256_mul_pd(ab, ib);

            __m256d rr = _mm256_sub_pd(_mm256_mul_pd(gr, s), _mm256_loadu_pd(a.obs_r[k] + i));
            __m256d rg = _mm256_sub_pd(_mm256_mul_pd(gg, s), _mm256_loadu_pd(a.obs_g[k] + i));
            __m256d rb = _mm256_sub_pd(_mm256_mul_pd(gb, s), _mm256_loadu_pd(a.obs_b[k] + i));

            l1 = _mm256_add_pd(l1, abs_pd(rr));
            l1 = _mm256_add_pd(l1, abs_pd(rg));
            l1 = _mm256_add_pd(l1, abs_pd(rb));

            __m256d cr = _mm256_mul_pd(sign_pd(rr), inv_norm);
            __m256d cg = _mm256_mul_pd(sign_pd(rg), inv_norm);
            __m256d cb = _mm256_mul_pd(sign_pd(rb), inv_norm);

            dar = _mm256_add_pd(dar, _mm256_mul_pd(cr, _mm256_mul_pd(ir, s)));
            dag = _mm256_add_pd(dag, _mm256_mul_pd(cg, _mm256_mul_pd(ig, s)));
            dab = _mm256_add_pd(dab, _mm256_mul_pd(cb, _mm256_mul_pd(ib, s)));

            __m256d dsum = _mm256_add_pd(
                _mm256_add_pd(_mm256_mul_pd(cr, gr), _mm256_mul_pd(cg, gg)),
                _mm256_mul_pd(cb, gb));
            dalpha = _mm256_add_pd(dalpha, _mm256_mul_pd(dsum, rd));
            __m256d gate = _mm256_and_pd(_mm256_cmp_pd(d, zero, _CMP_GT_OQ), one);
            __m256d ddot = _mm256_mul_pd(_mm256_mul_pd(dsum, alpha), gate);
            dux = _mm256_add_pd(dux, _mm256_mul_pd(ddot, lx));
            duy = _mm256_add_pd(duy, _mm256_mul_pd(ddot, ly));
            duz = _mm256_add_pd(duz, _mm256_mul_pd(ddot, lz));
        }

        __m256d m = _mm256_loadu_pd(a.mask + i);
        _mm256_storeu_pd(a.d_ux + i, _mm256_mul_pd(dux, m));
        _mm256_storeu_pd(a.d_uy + i, _mm256_mul_pd(duy, m));
        _mm256_storeu_pd(a.d_uz + i, _mm256_mul_pd(duz, m));
        _mm256_storeu_pd(a.d_alpha + i, _mm256_mul_pd(dalpha, m));
        _mm256_storeu_pd(a.d_ar + i, _mm256_mul_pd(dar, m));
        _mm256_storeu_pd(a.d_ag + i, _mm256_mul_pd(dag, m));
        _mm256_storeu_pd(a.d_ab + i, _mm256_mul_pd(dab, m));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(l1, m));
    }
    double tail = 0.0;
    for (; i < a.n; ++i) tail += shade_grad_pixel(a, i);
    return reduce_pd(acc) + tail;
}

double masked_l1_avx2(const double* a, const double* b, const double* mask, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = abs_pd(_mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, _mm256_loadu_pd(mask + i)));
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += masked_l1_element(a, b, mask, i);
    return reduce_pd(acc) + tail;
}

void normalize3_avx2(const double* x, const double* y, const double* z, size_t n, double eps,
                     double* ux, double* uy, double* uz, double* len) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d veps = _mm256_set1_pd(eps);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vz = _mm256_loadu_pd(z + i);
        __m256d l = _mm256_sqrt_pd(_mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(vx, vx), _mm256_mul_pd(vy, vy)),
            _mm256_mul_pd(vz, vz)));
        // 1/l masked to 0 at or below eps; the unmasked div may be inf.
        __m256d inv = _mm256_and_pd(_mm256_div_pd(one, l), _mm256_cmp_pd(l, veps, _CMP_GT_OQ));
        _mm256_storeu_pd(ux + i, _mm256_mul_pd(vx, inv));
        _mm256_storeu_pd(uy + i, _mm256_mul_pd(vy, inv));
        _mm256_storeu_pd(uz + i, _mm256_mul_pd(vz, inv));
        if (len) _mm256_storeu_pd(len + i, l);
    }
    for (; i < n; ++i) normalize3_element(x, y, z, i, eps, ux, uy, uz, len);
}

void adam_update_avx2(double* param, const double* grad, double* m, double* v, size_t n,
                      double lr, double beta1, double beta2, double eps, double bias1,
                      double bias2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbias1 = _mm256_set1_pd(bias1);
    const __m256d vbias2 = _mm256_set1_pd(bias2);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d g = _mm256_loadu_pd(grad + i);
        __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                   _mm256_mul_pd(vc1, g));
        __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(vc2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_mul_pd(vm, vbias1);
        __m256d vhat = _mm256_mul_pd(vv, vbias2);
        __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat),
                                    _mm256_add_pd(_mm256_sqrt_pd(vhat), veps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
    }
    for (; i < n; ++i) adam_element(param, grad, m, v, i, lr, beta1, beta2, eps, bias1, bias2);
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t{shade_avx2, shade_lights_grad_avx2, masked_l1_avx2,
                               normalize3_avx2, adam_update_avx2};
    return &t;
}

}  // namespace gsps::kernels

#else  // non-x86 builds fall back to the scalar reference

namespace gsps::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace gsps::kernels

#endif
