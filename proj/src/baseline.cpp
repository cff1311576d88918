// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsps/errors.hpp"
#include "gsps/threading.hpp"

namespace gsps {

namespace {

constexpr double kDegenerate = 1e-9;
constexpr double kCondLimit = 1e8;

struct Sym3 {
    // symmetric 3x3 in full storage
    double m[3][3] = {};
};

// Classic cyclic Jacobi; a handful of sweeps is plenty for 3x3.
void jacobi_eigen(Sym3 a, double eig[3], double vec[3][3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) vec[i][j] = i == j ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(a.m[0][1]) + std::abs(a.m[0][2]) + std::abs(a.m[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a.m[p][q]) < 1e-18) continue;
                const double theta = (a.m[q][q] - a.m[p][p]) / (2.0 * a.m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a.m[k][p], akq = a.m[k][q];
                    a.m[k][p] = c * akp - s * akq;
                    a.m[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a.m[p][k], aqk = a.m[q][k];
                    a.m[p][k] = c * apk - s * aqk;
                    a.m[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = vec[k][p], vkq = vec[k][q];
                    vec[k][p] = c * vkp - s * vkq;
                    vec[k][q] = s * vkp + c * vkq;
                }
            }
    }
    for (int i = 0; i < 3; ++i) eig[i] = a.m[i][i];
}

// inverse of LtL by cofactors; caller guarantees conditioning
Mat3 inverse3(const Mat3& a) {
    Mat3 r;
    const double det = a.det();
    r.m[0][0] = (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) / det;
    r.m[0][1] = (a.m[0][2] * a.m[2][1] - a.m[0][1] * a.m[2][2]) / det;
    r.m[0][2] = (a.m[0][1] * a.m[1][2] - a.m[0][2] * a.m[1][1]) / det;
    r.m[1][0] = (a.m[1][2] * a.m[2][0] - a.m[1][0] * a.m[2][2]) / det;
    r.m[1][1] = (a.m[0][0] * a.m[2][2] - a.m[0][2] * a.m[2][0]) / det;
    r.m[1][2] = (a.m[0][2] * a.m[1][0] - a.m[0][0] * a.m[1][2]) / det;
    r.m[2][0] = (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]) / det;
    r.m[2][1] = (a.m[0][1] * a.m[2][0] - a.m[0][0] * a.m[2][1]) / det;
    r.m[2][2] = (a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0]) / det;
    return r;
}

Mat3 gram(const std::vector<Vec3>& ls) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a.m[i][j] = 0.0;
    for (const Vec3& l : ls)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a.m[i][j] += l[i] * l[j];
    return a;
}

// A^-1 (or pseudo-inverse when poorly conditioned); throws on rank < 3.
Mat3 solve_matrix(const Mat3& a) {
    Sym3 s;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s.m[i][j] = a.m[i][j];
    double eig[3], vec[3][3];
    jacobi_eigen(s, eig, vec);
    const double lmax = std::max({std::abs(eig[0]), std::abs(eig[1]), std::abs(eig[2])});
    const double lmin = std::min({std::abs(eig[0]), std::abs(eig[1]), std::abs(eig[2])});
    if (lmax <= 0.0 || lmin <= lmax * 1e-12)
        throw ParamError("light directions do not span rank 3");
    if (lmin * kCondLimit >= lmax) return inverse3(a);
    // rank-revealing route: spectral inverse
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += vec[i][k] * vec[j][k] / eig[k];
            r.m[i][j] = v;
        }
    return r;
}

PhotometricStereoResult solve_pixels(
    const ImageStack& stack, const std::vector<ImageD>& lum,
    const std::function<void(int px, int py, Vec3* m, bool* ok)>& pixel_solver) {
    const int w = stack.width(), h = stack.height();
    PhotometricStereoResult res;
    res.normals = ImageV3(w, h);
    res.albedo = ImageD(w, h, 0.0);
    std::vector<int> degenerate_rows(size_t(h), 0);

    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            if (!stack.mask.at(x, y)) continue;
            Vec3 m;
            bool ok = true;
            pixel_solver(x, y, &m, &ok);
            const double rho = norm(m);
            if (!ok || rho < kDegenerate) {
                ++degenerate_rows[size_t(y)];
                continue;
            }
            Vec3 n = m / rho;
            if (n.z < 0.0) n = -n;  // camera-facing convention
            res.normals.at(x, y) = n;
            res.albedo.at(x, y) = rho;
        }
    });
    res.degenerate_count = std::accumulate(degenerate_rows.begin(), degenerate_rows.end(), 0);
    (void)lum;
    return res;
}

}  // namespace

PhotometricStereoResult woodham(const ImageStack& stack) {
    stack.validate(3);
    const int n = stack.count();

    std::vector<Vec3> dirs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) dirs[size_t(i)] = stack.lights[size_t(i)].direction;
    const Mat3 ainv = solve_matrix(gram(dirs));

    // M = (LtL)^-1 Lt, one 3xN application per pixel
    std::vector<Vec3> mt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) mt[size_t(i)] = ainv * dirs[size_t(i)];

    std::vector<ImageD> lum;
    lum.reserve(size_t(n));
    for (int i = 0; i < n; ++i) lum.push_back(stack.luminance(i));

    return solve_pixels(stack, lum, [&](int x, int y, Vec3* m, bool*) {
        Vec3 acc{0, 0, 0};
        for (int i = 0; i < n; ++i) acc += mt[size_t(i)] * lum[size_t(i)].at(x, y);
        *m = acc;
    });
}

PhotometricStereoResult woodham_robust(const ImageStack& stack, double discard_fraction) {
    if (discard_fraction < 0.0 || discard_fraction >= 0.5)
        throw ParamError("discard fraction must lie in [0, 0.5)");
    const int n = stack.count();
    const int k = int(std::floor(discard_fraction * n));
    if (k == 0) return woodham(stack);
    if (n - 2 * k < 3)
        throw ParamError("trimming " + std::to_string(2 * k) + " of " + std::to_string(n) +
                         " observations leaves fewer than 3");
    stack.validate(3);

    std::vector<Vec3> dirs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) dirs[size_t(i)] = stack.lights[size_t(i)].direction;
    // global rank check up front, as in the untrimmed solver
    (void)solve_matrix(gram(dirs));

    std::vector<ImageD> lum;
    lum.reserve(size_t(n));
    for (int i = 0; i < n; ++i) lum.push_back(stack.luminance(i));

    return solve_pixels(stack, lum, [&](int x, int y, Vec3* m, bool* ok) {
        std::vector<std::pair<double, int>> obs(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) obs[size_t(i)] = {lum[size_t(i)].at(x, y), i};
        std::sort(obs.begin(), obs.end());
        Mat3 a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a.m[i][j] = 0.0;
        Vec3 b{0, 0, 0};
        for (int i = k; i < n - k; ++i) {
            const Vec3 l = dirs[size_t(obs[size_t(i)].second)];
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) a.m[r][c] += l[r] * l[c];
            b += l * obs[size_t(i)].first;
        }
        const double det = a.det();
        if (std::abs(det) < 1e-12) {
            *ok = false;
            return;
        }
        *m = inverse3(a) * b;
    });
}

}  // namespace gsps
