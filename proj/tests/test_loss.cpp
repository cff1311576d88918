// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "gsps/errors.hpp"
#include "gsps/ingest.hpp"
#include "gsps/loss.hpp"
#include "gsps/metrics.hpp"
#include "gsps/scene_io.hpp"
#include "gsps/shading.hpp"
#include "test_scenes.hpp"

using namespace gsps;

TEST_SUITE_BEGIN("loss");

TEST_CASE("photometric loss identity, offset, and mean over lights") {
    const ImageStack stack = synth_scene(SynthShape::Plane, synth_lights(2, 9), 16);

    std::vector<ColorImage> pred = stack.images;
    CHECK(photometric_loss(pred, stack) == doctest::Approx(0.0));

    for (ColorImage& im : pred)
        for (int c = 0; c < 3; ++c)
            for (double& v : im.plane(c).data) v += 0.1;
    CHECK(photometric_loss(pred, stack) == doctest::Approx(0.1).epsilon(1e-12));

    pred = stack.images;
    for (int c = 0; c < 3; ++c)
        for (double& v : pred[0].plane(c).data) v += 0.2;
    CHECK(photometric_loss(pred, stack) == doctest::Approx(0.1).epsilon(1e-12));

    pred.pop_back();
    CHECK_THROWS_AS(photometric_loss(pred, stack), ParamError);
}

TEST_CASE("photometric loss is symmetric") {
    const testing::FdCase c = testing::make_fd_case(41, 16, 2, 2);
    std::vector<ColorImage> pred = c.stack.images;
    for (ColorImage& im : pred)
        for (int ch = 0; ch < 3; ++ch)
            for (double& v : im.plane(ch).data) v *= 0.7;

    ImageStack swapped = c.stack;
    swapped.images = pred;
    const double l1 = photometric_loss(pred, c.stack);
    const double l2 = photometric_loss(c.stack.images, swapped);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
}

TEST_CASE("depth_to_normals: constant depth is flat") {
    const Camera cam = default_reconstruction_camera(16, 16);
    const ImageD depth(16, 16, 2.5);
    const ImageU8 mask(16, 16, 1);
    const ImageV3 n = depth_to_normals(depth, cam, mask);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(norm(n.at(x, y) - Vec3{0, 0, 1}) < 1e-12);
}

TEST_CASE("depth_to_normals: affine depth gives one constant normal") {
    const Camera cam = default_reconstruction_camera(24, 24);
    ImageD depth(24, 24);
    const ImageU8 mask(24, 24, 1);
    // ray-parameter depth growing along +x_cam with unit slope
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) depth.at(x, y) = 3.0 + (x + 0.5 - 12.0) * cam.pixel_pitch;
    const ImageV3 n = depth_to_normals(depth, cam, mask);
    // with depth = ray parameter, the camera-facing unit-slope plane tilts
    // to (1,0,1)/sqrt(2)
    const Vec3 expect = normalized(Vec3{1, 0, 1});
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) CHECK(norm(n.at(x, y) - expect) < 1e-9);
}

TEST_CASE("depth_to_normals matches the rendered geometry of a tilted surfel") {
    // the regularizer's purpose: normals-from-depth must agree with the
    // splatted surfel normal for a clean tilted plane
    SplatScene scene;
    scene.camera = default_reconstruction_camera(32, 32);
    const Mat3 rot = axis_angle(normalized(Vec3{0.3, 1.0, 0.0}), 0.25);
    SurfelGaussian g;
    g.tangent_u = rot * Vec3{1, 0, 0};
    g.tangent_v = rot * Vec3{0, 1, 0};
    g.scale_u = g.scale_v = 3.0;
    g.opacity = 1.0;
    scene.gaussians.push_back(g);
    scene.densify_stats.resize(1);

    const RenderBuffers rb = render(scene);
    const ImageU8 mask(32, 32, 1);
    const ImageV3 nd = depth_to_normals(rb.depth, scene.camera, mask);
    const Vec3 expect = surfel_normal(g);
    for (int y = 2; y < 30; ++y)
        for (int x = 2; x < 30; ++x) CHECK(norm(nd.at(x, y) - expect) < 1e-6);
}

TEST_CASE("depth_to_normals: analytic sphere depth converges to analytic normals") {
    const AnalyticScene a = AnalyticScene::make(SynthShape::Sphere, 64);
    const ImageD depth = a.depth_map();
    const ImageU8 mask = a.foreground_mask();
    const ImageV3 truth = a.normal_map();
    const ImageV3 nd = depth_to_normals(depth, a.camera(), mask);

    // exclude a 2-pixel rim band
    ImageU8 interior(64, 64, 0);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!mask.at(x, y)) continue;
            bool inside = true;
            for (int dy = -2; dy <= 2 && inside; ++dy)
                for (int dx = -2; dx <= 2; ++dx)
                    if (!mask.contains(x + dx, y + dy) || !mask.at(x + dx, y + dy)) {
                        inside = false;
                        break;
                    }
            interior.at(x, y) = inside ? 1 : 0;
        }
    const double mean = mean_angular_error(angular_error_map(nd, truth, interior), interior);
    CHECK(mean < 1.0);
}

TEST_CASE("depth_to_normals flags isolated pixels") {
    const Camera cam = default_reconstruction_camera(8, 8);
    ImageD depth(8, 8, 2.0);
    ImageU8 mask(8, 8, 0);
    mask.at(4, 4) = 1;  // alone
    int flagged = 0;
    const ImageV3 n = depth_to_normals(depth, cam, mask, &flagged);
    CHECK(flagged == 1);
    CHECK(norm(n.at(4, 4) - Vec3{0, 0, 1}) == 0.0);
}

TEST_CASE("normal consistency loss canonical values") {
    const int n = 8;
    ImageV3 a(n, n), b(n, n);
    ImageD alpha(n, n, 1.0);
    ImageU8 mask(n, n, 1);
    for (auto& v : a.data) v = {0, 0, 1};

    b = a;
    CHECK(normal_consistency_loss(a, b, alpha, mask) == doctest::Approx(0.0));

    for (auto& v : b.data) v = {1, 0, 0};
    CHECK(normal_consistency_loss(a, b, alpha, mask) == doctest::Approx(1.0));

    for (auto& v : b.data) v = {0, 0, -1};
    CHECK(normal_consistency_loss(a, b, alpha, mask) == doctest::Approx(2.0));

    // empty domain: all alpha below the threshold
    bool empty = false;
    ImageD low(n, n, 0.2);
    CHECK(normal_consistency_loss(a, b, low, mask, &empty) == 0.0);
    CHECK(empty);
}

TEST_CASE("total_loss composition") {
    const testing::FdCase c = testing::make_fd_case(51, 24, 2, 3);

    const LossReport zero = total_loss(c.scene, c.stack, 0.0);
    CHECK(zero.total == zero.photometric);

    const LossReport l1 = total_loss(c.scene, c.stack, 0.05);
    const LossReport l2 = total_loss(c.scene, c.stack, 0.10);
    CHECK(l1.photometric == doctest::Approx(l2.photometric));
    CHECK(l1.normal_reg == doctest::Approx(l2.normal_reg));
    CHECK(l2.total - l1.total == doctest::Approx(0.05 * l1.normal_reg).epsilon(1e-9));
    CHECK(l1.total == l1.photometric + l1.lambda * l1.normal_reg);  // exact identity
    CHECK(l1.total >= 0.0);

    CHECK_THROWS_AS(total_loss(c.scene, c.stack, -0.1), ParamError);
}

TEST_CASE("total_loss is zero at an exact reproduction") {
    // observations equal to the scene's own shaded renders, lambda 0
    testing::FdCase c = testing::make_fd_case(61, 16, 2, 2);
    const RenderBuffers rb = render(c.scene);
    for (int i = 0; i < c.stack.count(); ++i)
        c.stack.images[size_t(i)] = shade(rb, c.stack.lights[size_t(i)]);
    const LossReport r = total_loss(c.scene, c.stack, 0.0);
    CHECK(r.total == doctest::Approx(0.0));
}

TEST_CASE("loss report serializes one json line") {
    LossReport r;
    r.photometric = 0.25;
    r.normal_reg = 0.5;
    r.lambda = 0.1;
    r.total = 0.3;
    const std::string line = loss_report_json_line(r, 42, 1000);
    CHECK(line.find("\"iter\":42") != std::string::npos);
    CHECK(line.find("\"gaussians\":1000") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}

TEST_SUITE_END();
