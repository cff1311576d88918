// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

// Reference kernels. These define the numeric contract: the AVX2
// variants in kernels_avx2.cpp replicate these operation trees exactly,
// lane for lane. Reductions run in blocks of four with a fixed combine
// order so both variants produce bit-identical sums.

#include "gsps/kernels.hpp"

#include "kernels_detail.hpp"

namespace gsps::kernels {
namespace {

using namespace detail;

void shade_scalar(const double* ux, const double* uy, const double* uz, const double* ar,
                  const double* ag, const double* ab, const double* alpha, size_t n,
                  const double light_dir[3], const double light_int[3], double* out_r,
                  double* out_g, double* out_b) {
    for (size_t i = 0; i < n; ++i)
        shade_element(ux, uy, uz, ar, ag, ab, alpha, i, light_dir, light_int, out_r, out_g,
                      out_b);
}

double shade_lights_grad_scalar(const ShadeLightsGradArgs& a) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= a.n; i += 4) {
        acc0 += shade_grad_pixel(a, i + 0);
        acc1 += shade_grad_pixel(a, i + 1);
        acc2 += shade_grad_pixel(a, i + 2);
        acc3 += shade_grad_pixel(a, i + 3);
    }
    double tail = 0.0;
    for (; i < a.n; ++i) tail += shade_grad_pixel(a, i);
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

double masked_l1_scalar(const double* a, const double* b, const double* mask, size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += masked_l1_element(a, b, mask, i + 0);
        acc1 += masked_l1_element(a, b, mask, i + 1);
        acc2 += masked_l1_element(a, b, mask, i + 2);
        acc3 += masked_l1_element(a, b, mask, i + 3);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += masked_l1_element(a, b, mask, i);
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

void normalize3_scalar(const double* x, const double* y, const double* z, size_t n, double eps,
                       double* ux, double* uy, double* uz, double* len) {
    for (size_t i = 0; i < n; ++i) normalize3_element(x, y, z, i, eps, ux, uy, uz, len);
}

void adam_update_scalar(double* param, const double* grad, double* m, double* v, size_t n,
                        double lr, double beta1, double beta2, double eps, double bias1,
                        double bias2) {
    for (size_t i = 0; i < n; ++i)
        adam_element(param, grad, m, v, i, lr, beta1, beta2, eps, bias1, bias2);
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{shade_scalar, shade_lights_grad_scalar, masked_l1_scalar,
                               normalize3_scalar, adam_update_scalar};
    return t;
}

}  // namespace gsps::kernels
