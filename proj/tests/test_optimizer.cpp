// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "gsps/errors.hpp"
#include "gsps/optimizer.hpp"
#include "gsps/scene_io.hpp"
#include "gsps/shading.hpp"
#include "test_scenes.hpp"

using namespace gsps;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("optimizer");

namespace {

bool scenes_bit_equal(const SplatScene& a, const SplatScene& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        SurfelGaussian ga = a.gaussians[i], gb = b.gaussians[i];
        for (int k = 0; k < kParamsPerGaussian; ++k) {
            const double x = *gaussian_param(ga, k), y = *gaussian_param(gb, k);
            if (std::memcmp(&x, &y, sizeof x) != 0) return false;
        }
    }
    return true;
}

OptimConfig small_config(int iters) {
    OptimConfig cfg;
    cfg.iterations = iters;
    cfg.densify_start = 0;
    cfg.densify_stop = 0;  // no densification unless a test asks
    cfg.densify_interval = 100;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    OptimConfig cfg;
    cfg.iterations = 100;
    cfg.densify_start = 50;
    cfg.densify_stop = 40;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg.densify_stop = 200;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg.densify_stop = 90;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a perfect scene is a fixed point") {
    // observations equal the scene's own renders; lambda 0, fresh moments
    testing::FdCase c = testing::make_fd_case(700, 16, 2, 2);
    const RenderBuffers rb = render(c.scene);
    for (int i = 0; i < c.stack.count(); ++i)
        c.stack.images[size_t(i)] = shade(rb, c.stack.lights[size_t(i)]);

    OptimConfig cfg = small_config(3);
    cfg.lambda = 0.0;
    AdamState state;
    state.resize(c.scene.size());
    const SplatScene before = c.scene;
    for (int i = 0; i < 3; ++i) step(c.scene, c.stack, cfg, state);
    CHECK(scenes_bit_equal(before, c.scene));
}

TEST_CASE("zero learning rate freezes a parameter class") {
    testing::FdCase c = testing::make_fd_case(701, 16, 2, 2);
    OptimConfig cfg = small_config(5);
    cfg.lr_albedo = 0.0;
    AdamState state;
    state.resize(c.scene.size());
    const SplatScene before = c.scene;
    for (int i = 0; i < 5; ++i) step(c.scene, c.stack, cfg, state);

    bool albedo_same = true, others_moved = false;
    for (size_t i = 0; i < c.scene.size(); ++i) {
        if (std::memcmp(&before.gaussians[i].albedo, &c.scene.gaussians[i].albedo,
                        sizeof(Vec3)) != 0)
            albedo_same = false;
        if (norm(before.gaussians[i].center - c.scene.gaussians[i].center) > 0.0)
            others_moved = true;
    }
    CHECK(albedo_same);
    CHECK(others_moved);
}

TEST_CASE("scene invariants hold after every step") {
    testing::FdCase c = testing::make_fd_case(702, 16, 2, 3);
    OptimConfig cfg = small_config(10);
    AdamState state;
    state.resize(c.scene.size());
    for (int i = 0; i < 10; ++i) {
        step(c.scene, c.stack, cfg, state);
        CHECK_NOTHROW(c.scene.validate());
    }
    // densify stats accumulated once per step
    CHECK(c.scene.densify_stats.update_count[0] == 10);
    CHECK(c.scene.densify_stats.grad_accum[0] >= 0.0);
}

TEST_CASE("densify: prune by opacity and by scale") {
    testing::FdCase c = testing::make_fd_case(703, 16, 2, 3);
    OptimConfig cfg = small_config(1);
    cfg.prune_opacity = 0.005;
    cfg.prune_scale = 5.0;
    AdamState state;
    state.resize(c.scene.size());

    c.scene.gaussians[1].opacity = 0.001;  // below the floor
    c.scene.gaussians[2].scale_u = 9.0;    // above the ceiling
    const size_t n = c.scene.size();
    const DensifySummary s = densify_and_prune(c.scene, state, cfg);
    CHECK(s.pruned == 2);
    CHECK(s.cloned == 0);
    CHECK(s.split == 0);
    CHECK(c.scene.size() == n - 2);
    CHECK(state.size() == c.scene.size());
    CHECK(c.scene.densify_stats.size() == c.scene.size());
}

TEST_CASE("densify: quiescent scene neither clones nor splits") {
    testing::FdCase c = testing::make_fd_case(704, 16, 2, 2);
    OptimConfig cfg = small_config(1);
    cfg.grad_threshold = 1e9;
    cfg.prune_scale = 100.0;  // the frame-covering fixtures are intentional
    AdamState state;
    state.resize(c.scene.size());
    const size_t n = c.scene.size();
    const DensifySummary s = densify_and_prune(c.scene, state, cfg);
    CHECK(s.cloned + s.split == 0);
    CHECK(c.scene.size() == n);
}

TEST_CASE("densify: high-gradient gaussians clone when small, split when large") {
    SplatScene scene;
    scene.camera = default_reconstruction_camera(32, 32);
    const double pitch = scene.camera.pixel_pitch;

    SurfelGaussian small;
    small.scale_u = small.scale_v = 0.5 * pitch;  // under the 1.5x pitch split point
    SurfelGaussian large;
    large.center = {0.5, 0, 0};
    large.scale_u = 4.0 * pitch;  // over it
    large.scale_v = 0.5 * pitch;
    scene.gaussians = {small, large};
    scene.densify_stats.resize(2);
    scene.densify_stats.grad_accum = {10.0, 10.0};
    scene.densify_stats.update_count = {1, 1};

    OptimConfig cfg = small_config(1);
    cfg.grad_threshold = 1.0;
    cfg.prune_scale = 1.0;  // large enough to keep both
    AdamState state;
    state.resize(2);

    const DensifySummary s = densify_and_prune(scene, state, cfg);
    CHECK(s.cloned == 1);
    CHECK(s.split == 1);
    CHECK(s.pruned == 0);
    // count = N - pruned + cloned + split
    CHECK(scene.size() == 4);
    CHECK(state.size() == 4);
    // split children shrink by 1.6 and sit +-0.5 sigma along the major axis
    bool found_child = false;
    for (const SurfelGaussian& g : scene.gaussians)
        if (std::abs(g.scale_u - 4.0 * pitch / 1.6) < 1e-12) {
            found_child = true;
            CHECK(std::abs(std::abs(g.center.x - 0.5) - 2.0 * pitch) < 1e-9);
        }
    CHECK(found_child);
    // stats reset
    for (double v : scene.densify_stats.grad_accum) CHECK(v == 0.0);
}

TEST_CASE("reconstruct with zero iterations returns the init render") {
    const ImageStack stack = synth_scene(SynthShape::Plane, synth_lights(4, 11), 16);
    OptimConfig cfg = small_config(0);
    const ReconstructResult r =
        reconstruct(stack, default_reconstruction_camera(16, 16), cfg);
    CHECK(r.log.empty());
    CHECK(r.scene.size() == 256);
    // the init scene renders with the camera-facing normal everywhere
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) {
            const Vec3 n = r.buffers.normal_at(x, y);
            CHECK(norm(n / norm(n) - Vec3{0, 0, 1}) < 1e-9);
        }
}

TEST_CASE("loss trend is non-increasing on the synthetic sphere (coarse)") {
    const ImageStack stack = synth_scene(SynthShape::Sphere, synth_lights(6, 13), 24);
    OptimConfig cfg = small_config(120);
    const ReconstructResult r =
        reconstruct(stack, default_reconstruction_camera(24, 24), cfg);
    REQUIRE(r.log.size() == 120);
    // median of each 40-iteration window
    auto median_of = [&](int lo, int hi) {
        std::vector<double> v;
        for (int i = lo; i < hi; ++i) v.push_back(r.log[size_t(i)].total);
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double m0 = median_of(0, 40), m1 = median_of(40, 80), m2 = median_of(80, 120);
    CHECK(m1 <= m0);
    CHECK(m2 <= m1);
}

TEST_CASE("two runs with equal seeds are bit-identical") {
    const ImageStack stack = synth_scene(SynthShape::Sphere, synth_lights(5, 17), 20);
    OptimConfig cfg = small_config(25);
    cfg.densify_start = 10;
    cfg.densify_stop = 20;
    cfg.densify_interval = 10;
    cfg.grad_threshold = 1e-6;  // force densification traffic
    const Camera cam = default_reconstruction_camera(20, 20);
    const ReconstructResult a = reconstruct(stack, cam, cfg);
    const ReconstructResult b = reconstruct(stack, cam, cfg);
    CHECK(scenes_bit_equal(a.scene, b.scene));
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].total == b.log[i].total);
}

TEST_CASE("checkpoint round trip and bit-exact resume") {
    const fs::path dir = fs::temp_directory_path() / "gsps_opt_test";
    fs::create_directories(dir);
    const std::string ck_path = (dir / "mid.ckpt").string();

    const ImageStack stack = synth_scene(SynthShape::Sphere, synth_lights(5, 19), 20);
    const Camera cam = default_reconstruction_camera(20, 20);
    OptimConfig cfg = small_config(30);
    cfg.densify_start = 8;
    cfg.densify_stop = 24;
    cfg.densify_interval = 8;
    cfg.grad_threshold = 1e-6;
    cfg.seed = 42;

    // uninterrupted run, checkpointing at iteration 15
    std::vector<double> full_losses;
    const ReconstructResult full = reconstruct(
        stack, cam, cfg,
        [&](int iter, const LossReport& rep, const SplatScene& s, const AdamState& st) {
            full_losses.push_back(rep.total);
            if (iter == 15) save_checkpoint(ck_path, s, st, cfg, iter);
        });

    // resume from 15 and compare every later iteration
    Checkpoint ck = load_checkpoint(ck_path);
    CHECK(ck.iteration == 15);
    CHECK(ck.config.seed == 42);
    std::vector<double> resumed_losses;
    const ReconstructResult resumed = reconstruct_resume(
        stack, std::move(ck.scene), std::move(ck.state), ck.iteration, cfg,
        [&](int, const LossReport& rep, const SplatScene&, const AdamState&) {
            resumed_losses.push_back(rep.total);
        });

    CHECK(scenes_bit_equal(full.scene, resumed.scene));
    REQUIRE(resumed_losses.size() == full_losses.size() - 15);
    for (size_t i = 0; i < resumed_losses.size(); ++i) {
        const double a = full_losses[i + 15], b = resumed_losses[i];
        CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), LoadError);
}

TEST_SUITE_END();
