// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gsps/errors.hpp"
#include "gsps/image_io.hpp"
#include "gsps/ingest.hpp"
#include "gsps/metrics.hpp"
#include "gsps/scene_io.hpp"

using namespace gsps;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("ingest");

namespace {

fs::path fresh_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / "gsps_ingest_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Light frontal() {
    Light l;
    l.direction = {0, 0, 1};
    return l;
}

Light oblique(double deg, double az = 0.0) {
    Light l;
    const double t = deg * M_PI / 180.0;
    l.direction = {std::sin(t) * std::cos(az), std::sin(t) * std::sin(az), std::cos(t)};
    return l;
}

}  // namespace

TEST_CASE("synth sphere under frontal light") {
    const ImageStack stack = synth_scene(SynthShape::Sphere, {frontal()}, 64);
    // center pixel: n = (0,0,1), value 1
    const AnalyticScene a = AnalyticScene::make(SynthShape::Sphere, 64);
    CHECK(stack.images[0].at(32, 32).x == doctest::Approx(1.0).epsilon(1e-3));
    // rim pixel: n nearly in-plane, value ~ 0
    int rim_x = -1;
    for (int x = 0; x < 64; ++x)
        if (stack.mask.at(x, 32)) {
            rim_x = x;
            break;
        }
    REQUIRE(rim_x >= 0);
    CHECK(stack.images[0].at(rim_x, 32).x < 0.25);
    (void)a;
}

TEST_CASE("synth plane is constant cos(theta)") {
    const Light l = oblique(35.0);
    const ImageStack stack = synth_scene(SynthShape::Plane, {l}, 32);
    const double expect = l.direction.z;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            CHECK(stack.images[0].at(x, y).x == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("synth sphere side light darkens exactly half the disk") {
    Light l;
    l.direction = {1, 0, 0};
    const ImageStack stack = synth_scene(SynthShape::Sphere, {l}, 64);
    int lit = 0, dark = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!stack.mask.at(x, y)) continue;
            (stack.images[0].at(x, y).x > 0.0 ? lit : dark) += 1;
        }
    CHECK(lit == dark);  // even resolution puts no pixel on the terminator
    CHECK(lit > 0);
}

TEST_CASE("synth validates inputs") {
    CHECK_THROWS_AS(synth_scene(SynthShape::Sphere, {frontal()}, 8), ParamError);
    Light bad;
    bad.direction = {0, 0, 2};
    CHECK_THROWS_AS(synth_scene(SynthShape::Sphere, {bad}, 32), ParamError);
}

TEST_CASE("sphere_over_plane casts shadows only for oblique lights") {
    const ImageStack frontal_stack =
        synth_scene(SynthShape::SphereOverPlane, {frontal()}, 64);
    const AnalyticScene scene = AnalyticScene::make(SynthShape::SphereOverPlane, 64);
    const ImageU8 none = scene.cast_shadow_mask(frontal());
    // frontal light: shadow hides exactly under the sphere (off its disk
    // nothing is occluded)
    int outside = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const Vec3 p = scene.pixel_xy(x, y);
            const double dx = p.x - scene.sphere_center.x, dy = p.y - scene.sphere_center.y;
            const bool under = dx * dx + dy * dy <= scene.sphere_radius * scene.sphere_radius;
            if (!under && none.at(x, y)) ++outside;
        }
    CHECK(outside == 0);

    const Light l = oblique(45.0);
    const ImageU8 cast = scene.cast_shadow_mask(l);
    CHECK(count_true(cast) > 50);  // a real shadow appears
    // shadowed plane pixels are black in the rendered image
    const ImageStack stack = synth_scene(SynthShape::SphereOverPlane, {l}, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (cast.at(x, y)) CHECK(stack.images[0].at(x, y).x == 0.0);
    (void)frontal_stack;
}

TEST_CASE("init_scene one gaussian per foreground pixel with max albedo") {
    const std::vector<Light> lights = {oblique(20, 0), oblique(20, 2), oblique(20, 4)};
    ImageStack stack = synth_scene(SynthShape::Sphere, lights, 32);
    const Camera cam = default_reconstruction_camera(32, 32);
    const SplatScene scene = init_scene(stack, cam);
    CHECK(int(scene.size()) == count_true(stack.mask));
    CHECK(scene.densify_stats.size() == scene.size());

    // centers on z = 0, camera-facing frames, opacity 0.5
    for (const SurfelGaussian& g : scene.gaussians) {
        CHECK(g.center.z == 0.0);
        CHECK(norm(surfel_normal(g) - Vec3{0, 0, 1}) < 1e-12);
        CHECK(g.opacity == 0.5);
        CHECK(g.scale_u == doctest::Approx(0.5 * cam.pixel_pitch));
    }

    // albedo is the per-pixel per-channel max
    size_t gi = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (!stack.mask.at(x, y)) continue;
            double mx = 0.0;
            for (const ColorImage& im : stack.images) mx = std::max(mx, im.at(x, y).x);
            CHECK(scene.gaussians[gi].albedo.x == doctest::Approx(mx).epsilon(1e-12));
            ++gi;
        }

    // all-dark pixels still get a gaussian (plane under a grazing light)
    ImageStack dark = synth_scene(SynthShape::Plane, {oblique(89.9)}, 16);
    for (ColorImage& im : dark.images)
        for (int c = 0; c < 3; ++c)
            for (double& v : im.plane(c).data) v = 0.0;
    const SplatScene dark_scene = init_scene(dark, default_reconstruction_camera(16, 16));
    CHECK(dark_scene.size() == 256);
    CHECK(dark_scene.gaussians[0].albedo == Vec3{0, 0, 0});

    // resolution mismatch
    CHECK_THROWS_AS(init_scene(stack, default_reconstruction_camera(16, 16)), ParamError);
}

TEST_CASE("save + load round trip") {
    const fs::path dir = fresh_dir("roundtrip");
    std::vector<Light> lights = {oblique(25, 0.3), oblique(30, 2.1), oblique(18, 4.0)};
    // power-of-two intensities keep divide/multiply exact
    lights[0].intensity = {0.5, 1.0, 2.0};
    lights[1].intensity = {1.0, 0.25, 1.0};
    const AnalyticScene oracle = AnalyticScene::make(SynthShape::Sphere, 32);
    const ImageStack stack = synth_scene(SynthShape::Sphere, lights, 32);
    save_diligent(dir.string(), stack, &oracle);

    const ImageStack back = load_diligent(dir.string());
    back.validate();
    CHECK(back.count() == 3);
    CHECK(back.width() == 32);
    CHECK(count_true(back.mask) == count_true(stack.mask));
    CHECK(back.calibration[0].x == doctest::Approx(0.5));

    // calibration round trip: re-multiplying the normalized images by the
    // stored intensities reproduces the file's quantized values exactly
    const PngImage png = read_png((dir / "001.png").string());
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const size_t i = (size_t(y) * 32 + x) * 3;
            const double stored = double(png.data[i]) / 65535.0;
            const double rebuilt = back.images[0].at(x, y).x * back.calibration[0].x;
            CHECK(rebuilt == doctest::Approx(stored).epsilon(1e-12));
        }

    // normals survive the 16-bit encoding well under ground-truth needs
    REQUIRE(back.gt_normals.has_value());
    const ImageD err = angular_error_map(*back.gt_normals, *stack.gt_normals, stack.mask);
    CHECK(mean_angular_error(err, stack.mask) < 0.01);

    // oracle extras
    CHECK(fs::exists(dir / "depth_gt.pfm"));
}

TEST_CASE("loader rejects corrupted fixtures with named errors") {
    const fs::path dir = fresh_dir("corrupt");
    const ImageStack stack = synth_scene(SynthShape::Sphere, synth_lights(4, 5), 32);
    save_diligent(dir.string(), stack);

    SUBCASE("missing light file") {
        fs::remove(dir / "light_directions.txt");
        CHECK_THROWS_AS(load_diligent(dir.string()), LoadError);
    }
    SUBCASE("missing image") {
        fs::remove(dir / "003.png");
        CHECK_THROWS_WITH_AS(load_diligent(dir.string()),
                             doctest::Contains("003.png"), LoadError);
    }
    SUBCASE("row count mismatch") {
        std::ofstream f(dir / "light_directions.txt", std::ios::trunc);
        f << "0 0 1\n0.2 0 0.98\n0 0.2 0.98\n";  // 3 rows vs 4 images
        f.close();
        CHECK_THROWS_AS(load_diligent(dir.string()), FormatError);
    }
    SUBCASE("empty foreground") {
        std::vector<uint8_t> zeros(32 * 32, 0);
        write_png8((dir / "mask.png").string(), 32, 32, 1, zeros.data());
        CHECK_THROWS_WITH_AS(load_diligent(dir.string()),
                             doctest::Contains("empty foreground"), FormatError);
    }
    SUBCASE("unparsable light row") {
        std::ofstream f(dir / "light_intensities.txt", std::ios::trunc);
        f << "1 1 1\n1 x 1\n1 1 1\n1 1 1\n";
        f.close();
        CHECK_THROWS_AS(load_diligent(dir.string()), FormatError);
    }
    SUBCASE("missing directory") {
        CHECK_THROWS_AS(load_diligent((dir / "nope").string()), LoadError);
    }
}

TEST_CASE("metrics round trip on synthetic ground truth is zero") {
    const ImageStack stack = synth_scene(SynthShape::Sphere, {frontal()}, 32);
    const ImageD err = angular_error_map(*stack.gt_normals, *stack.gt_normals, stack.mask);
    CHECK(mean_angular_error(err, stack.mask) == doctest::Approx(0.0));
}

TEST_CASE("analytic splat scene sits on the true surface") {
    const AnalyticScene a = AnalyticScene::make(SynthShape::Sphere, 32);
    const SplatScene scene = analytic_splat_scene(a);
    CHECK(scene.size() > 100);
    for (const SurfelGaussian& g : scene.gaussians) {
        // the surfel normal equals the analytic normal at its center
        const Vec3 n = surfel_normal(g);
        const Vec3 expect = a.normal(g.center.x, g.center.y);
        CHECK(norm(n - expect) < 1e-9);
    }
}

TEST_SUITE_END();
