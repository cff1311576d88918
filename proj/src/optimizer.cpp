// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "gsps/errors.hpp"
#include "gsps/kernels.hpp"

namespace gsps {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kScaleFloor = 1e-6;
constexpr double kSplitScaleShrink = 1.6;
}  // namespace

void OptimConfig::validate() const {
    if (iterations < 0) throw ParamError("iterations must be nonnegative");
    if (lambda < 0.0) throw ParamError("lambda must be nonnegative");
    if (densify_interval <= 0) throw ParamError("densify_interval must be positive");
    if (!(densify_start <= densify_stop && densify_stop <= iterations) && iterations > 0)
        throw ParamError("densification window must satisfy start <= stop <= iterations");
    if (!(prune_opacity > 0.0 && prune_opacity < 1.0))
        throw ParamError("prune_opacity must lie in (0,1)");
}

void AdamState::resize(size_t n) {
    for (auto* v : {&m_center, &v_center, &m_tangent_u, &v_tangent_u, &m_tangent_v, &v_tangent_v,
                    &m_albedo, &v_albedo})
        v->assign(3 * n, 0.0);
    for (auto* v : {&m_scale_u, &v_scale_u, &m_scale_v, &v_scale_v, &m_opacity, &v_opacity})
        v->assign(n, 0.0);
}

namespace {

// Gather one parameter class into a flat array, run the Adam kernel,
// and scatter back. Vec3 classes pass through a 3N staging buffer.
struct ClassUpdate {
    std::vector<double> params;
    std::vector<double> grads;

    void run_vec3(std::vector<SurfelGaussian>& gs, Vec3 SurfelGaussian::*field,
                  const std::vector<Vec3>& grad, std::vector<double>& m, std::vector<double>& v,
                  double lr, double bias1, double bias2) {
        const size_t n = gs.size();
        params.resize(3 * n);
        grads.resize(3 * n);
        for (size_t i = 0; i < n; ++i) {
            const Vec3& p = gs[i].*field;
            params[3 * i] = p.x;
            params[3 * i + 1] = p.y;
            params[3 * i + 2] = p.z;
            grads[3 * i] = grad[i].x;
            grads[3 * i + 1] = grad[i].y;
            grads[3 * i + 2] = grad[i].z;
        }
        kernels::table().adam_update(params.data(), grads.data(), m.data(), v.data(), 3 * n, lr,
                                     kBeta1, kBeta2, kAdamEps, bias1, bias2);
        for (size_t i = 0; i < n; ++i)
            gs[i].*field = {params[3 * i], params[3 * i + 1], params[3 * i + 2]};
    }

    void run_scalar(std::vector<SurfelGaussian>& gs, double SurfelGaussian::*field,
                    const std::vector<double>& grad, std::vector<double>& m,
                    std::vector<double>& v, double lr, double bias1, double bias2) {
        const size_t n = gs.size();
        params.resize(n);
        for (size_t i = 0; i < n; ++i) params[i] = gs[i].*field;
        kernels::table().adam_update(params.data(), grad.data(), m.data(), v.data(), n, lr,
                                     kBeta1, kBeta2, kAdamEps, bias1, bias2);
        for (size_t i = 0; i < n; ++i) gs[i].*field = params[i];
    }
};

void project_scene(SplatScene& scene) {
    // exact identity on an already-projected scene: an untouched frame
    // must not drift by ulps across steps
    constexpr double kFrameSlack = 1e-13;
    for (SurfelGaussian& g : scene.gaussians) {
        // Gram-Schmidt restores the orthonormal tangent frame
        const double lu = norm(g.tangent_u);
        if (std::abs(lu - 1.0) > kFrameSlack) g.tangent_u = g.tangent_u / lu;
        const double proj = dot(g.tangent_v, g.tangent_u);
        const double lv = norm(g.tangent_v);
        if (std::abs(proj) > kFrameSlack || std::abs(lv - 1.0) > kFrameSlack) {
            Vec3 tv = g.tangent_v - g.tangent_u * proj;
            const double l = norm(tv);
            if (l > 1e-12) {
                g.tangent_v = tv / l;
            } else {
                // degenerate frame: rebuild an arbitrary perpendicular
                Vec3 up = std::abs(g.tangent_u.y) < 0.99 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
                g.tangent_v = normalized(cross(g.tangent_u, up));
            }
        }
        g.scale_u = std::max(g.scale_u, kScaleFloor);
        g.scale_v = std::max(g.scale_v, kScaleFloor);
        g.opacity = std::clamp(g.opacity, 0.0, 1.0);
        g.albedo.x = std::max(g.albedo.x, 0.0);
        g.albedo.y = std::max(g.albedo.y, 0.0);
        g.albedo.z = std::max(g.albedo.z, 0.0);
    }
}

}  // namespace

LossReport step(SplatScene& scene, const ImageStack& stack, const OptimConfig& cfg,
                AdamState& state) {
    if (state.size() != scene.size())
        throw ParamError("optimizer state does not match the scene size");

    auto [report, grads] = backward(scene, stack, cfg.lambda, cfg.backward);

    state.step_count += 1;
    const double t = double(state.step_count);
    const double bias1 = 1.0 / (1.0 - std::pow(kBeta1, t));
    const double bias2 = 1.0 / (1.0 - std::pow(kBeta2, t));

    ClassUpdate u;
    auto& gs = scene.gaussians;
    u.run_vec3(gs, &SurfelGaussian::center, grads.d_center, state.m_center, state.v_center,
               cfg.lr_center, bias1, bias2);
    u.run_vec3(gs, &SurfelGaussian::tangent_u, grads.d_tangent_u, state.m_tangent_u,
               state.v_tangent_u, cfg.lr_tangent, bias1, bias2);
    u.run_vec3(gs, &SurfelGaussian::tangent_v, grads.d_tangent_v, state.m_tangent_v,
               state.v_tangent_v, cfg.lr_tangent, bias1, bias2);
    u.run_scalar(gs, &SurfelGaussian::scale_u, grads.d_scale_u, state.m_scale_u, state.v_scale_u,
                 cfg.lr_scale, bias1, bias2);
    u.run_scalar(gs, &SurfelGaussian::scale_v, grads.d_scale_v, state.m_scale_v, state.v_scale_v,
                 cfg.lr_scale, bias1, bias2);
    u.run_scalar(gs, &SurfelGaussian::opacity, grads.d_opacity, state.m_opacity, state.v_opacity,
                 cfg.lr_opacity, bias1, bias2);
    u.run_vec3(gs, &SurfelGaussian::albedo, grads.d_albedo, state.m_albedo, state.v_albedo,
               cfg.lr_albedo, bias1, bias2);

    project_scene(scene);

    for (size_t i = 0; i < scene.size(); ++i) {
        scene.densify_stats.grad_accum[i] += norm(grads.d_center[i]);
        scene.densify_stats.update_count[i] += 1;
    }
    return report;
}

namespace {

void append_moment_rows(std::vector<double>& v, size_t stride, const std::vector<double>& src,
                        size_t src_index, bool zero) {
    for (size_t c = 0; c < stride; ++c)
        v.push_back(zero ? 0.0 : src[src_index * stride + c]);
}

}  // namespace

DensifySummary densify_and_prune(SplatScene& scene, AdamState& state, const OptimConfig& cfg) {
    DensifySummary summary;
    const size_t n = scene.size();
    if (n == 0) return summary;

    double prune_scale = cfg.prune_scale;
    if (prune_scale <= 0.0) {
        double t0 = 1.0;
        scene.camera.project(n > 0 ? scene.gaussians[0].center : Vec3{}, nullptr, nullptr, &t0);
        prune_scale = 8.0 * scene.camera.footprint_pitch(std::max(t0, 1e-6));
    }

    std::vector<SurfelGaussian> out;
    AdamState ns;
    ns.step_count = state.step_count;
    out.reserve(n);

    struct Pending {
        SurfelGaussian g;
        size_t parent;  // moment source; SIZE_MAX = fresh
    };
    std::vector<Pending> appended;

    auto keep = [&](const SurfelGaussian& g, size_t src, bool zero_moments) {
        out.push_back(g);
        append_moment_rows(ns.m_center, 3, state.m_center, src, zero_moments);
        append_moment_rows(ns.v_center, 3, state.v_center, src, zero_moments);
        append_moment_rows(ns.m_tangent_u, 3, state.m_tangent_u, src, zero_moments);
        append_moment_rows(ns.v_tangent_u, 3, state.v_tangent_u, src, zero_moments);
        append_moment_rows(ns.m_tangent_v, 3, state.m_tangent_v, src, zero_moments);
        append_moment_rows(ns.v_tangent_v, 3, state.v_tangent_v, src, zero_moments);
        append_moment_rows(ns.m_scale_u, 1, state.m_scale_u, src, zero_moments);
        append_moment_rows(ns.v_scale_u, 1, state.v_scale_u, src, zero_moments);
        append_moment_rows(ns.m_scale_v, 1, state.m_scale_v, src, zero_moments);
        append_moment_rows(ns.v_scale_v, 1, state.v_scale_v, src, zero_moments);
        append_moment_rows(ns.m_opacity, 1, state.m_opacity, src, zero_moments);
        append_moment_rows(ns.v_opacity, 1, state.v_opacity, src, zero_moments);
        append_moment_rows(ns.m_albedo, 3, state.m_albedo, src, zero_moments);
        append_moment_rows(ns.v_albedo, 3, state.v_albedo, src, zero_moments);
    };

    for (size_t i = 0; i < n; ++i) {
        const SurfelGaussian& g = scene.gaussians[i];
        const double max_scale = std::max(g.scale_u, g.scale_v);
        if (g.opacity < cfg.prune_opacity || max_scale > prune_scale) {
            ++summary.pruned;
            continue;
        }

        const int count = scene.densify_stats.update_count[i];
        const double mean_grad = count > 0 ? scene.densify_stats.grad_accum[i] / count : 0.0;
        if (mean_grad <= cfg.grad_threshold) {
            keep(g, i, false);
            continue;
        }

        double t0 = 1.0;
        scene.camera.project(g.center, nullptr, nullptr, &t0);
        const double split_size = 1.5 * scene.camera.footprint_pitch(std::max(t0, 1e-6));

        if (max_scale <= split_size) {
            // clone: keep the original, offset the copy one step downhill
            // along the first-moment direction
            keep(g, i, false);
            ++summary.cloned;
            SurfelGaussian copy = g;
            const Vec3 m{state.m_center[3 * i], state.m_center[3 * i + 1],
                         state.m_center[3 * i + 2]};
            const double ml = norm(m);
            if (ml > 1e-12) copy.center -= m / ml * (0.5 * split_size);
            appended.push_back({copy, SIZE_MAX});
        } else {
            // split: two children along the major tangent axis
            ++summary.split;
            const bool u_major = g.scale_u >= g.scale_v;
            const Vec3 axis = u_major ? g.tangent_u : g.tangent_v;
            const double sigma = u_major ? g.scale_u : g.scale_v;
            SurfelGaussian a = g, b = g;
            a.center = g.center + axis * (0.5 * sigma);
            b.center = g.center - axis * (0.5 * sigma);
            a.scale_u = b.scale_u = std::max(g.scale_u / kSplitScaleShrink, kScaleFloor);
            a.scale_v = b.scale_v = std::max(g.scale_v / kSplitScaleShrink, kScaleFloor);
            keep(a, i, true);
            appended.push_back({b, SIZE_MAX});
        }
    }

    for (const Pending& p : appended) keep(p.g, 0, true);

    scene.gaussians = std::move(out);
    scene.densify_stats.resize(scene.gaussians.size());
    state = std::move(ns);
    return summary;
}

namespace {

ReconstructResult run_loop(const ImageStack& stack, SplatScene scene, AdamState state,
                           int start_iteration, const OptimConfig& cfg,
                           const StepCallback& callback) {
    cfg.validate();
    ReconstructResult result;
    for (int iter = start_iteration + 1; iter <= cfg.iterations; ++iter) {
        const LossReport report = step(scene, stack, cfg, state);
        if (!std::isfinite(report.total))
            throw NumericError("non-finite loss at iteration " + std::to_string(iter));
        if (iter >= cfg.densify_start && iter <= cfg.densify_stop &&
            iter % cfg.densify_interval == 0)
            densify_and_prune(scene, state, cfg);
        result.log.push_back(report);
        if (callback) callback(iter, report, scene, state);
    }
    result.buffers = render(scene, cfg.backward.render);
    result.scene = std::move(scene);
    result.state = std::move(state);
    return result;
}

}  // namespace

ReconstructResult reconstruct(const ImageStack& stack, const Camera& camera,
                              const OptimConfig& cfg, const StepCallback& callback) {
    SplatScene scene = init_scene(stack, camera);
    AdamState state;
    state.resize(scene.size());
    return run_loop(stack, std::move(scene), std::move(state), 0, cfg, callback);
}

ReconstructResult reconstruct_resume(const ImageStack& stack, SplatScene scene, AdamState state,
                                     int start_iteration, const OptimConfig& cfg,
                                     const StepCallback& callback) {
    return run_loop(stack, std::move(scene), std::move(state), start_iteration, cfg, callback);
}

// ---- checkpoint serialization -------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'S', 'P', 'S', 'C', 'K', 'P', '1'};

struct Writer {
    FILE* f;
    void raw(const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f) != n) throw LoadError("short checkpoint write");
    }
    void i64(int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void vec(const std::vector<double>& v) {
        i64(int64_t(v.size()));
        if (!v.empty()) raw(v.data(), v.size() * sizeof(double));
    }
};

struct Reader {
    FILE* f;
    void raw(void* p, size_t n) {
        if (std::fread(p, 1, n, f) != n) throw FormatError("truncated checkpoint");
    }
    int64_t i64() {
        int64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::vector<double> vec() {
        const int64_t n = i64();
        if (n < 0) throw FormatError("corrupt checkpoint vector length");
        std::vector<double> v(static_cast<size_t>(n));
        if (n) raw(v.data(), size_t(n) * sizeof(double));
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const SplatScene& scene, const AdamState& state,
                     const OptimConfig& cfg, int iteration) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw LoadError("cannot write checkpoint " + path);
    Writer w{fp.get()};
    w.raw(kMagic, sizeof kMagic);
    w.i64(iteration);
    w.i64(int64_t(scene.size()));
    w.i64(state.step_count);

    const Camera& c = scene.camera;
    w.i64(c.model == CameraModel::Orthographic ? 0 : 1);
    for (double v : {c.position.x, c.position.y, c.position.z}) w.f64(v);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) w.f64(c.orientation.m[i][j]);
    w.f64(c.focal_px);
    w.f64(c.principal_x);
    w.f64(c.principal_y);
    w.f64(c.pixel_pitch);
    w.i64(c.width);
    w.i64(c.height);

    w.i64(cfg.iterations);
    for (double v : {cfg.lr_center, cfg.lr_tangent, cfg.lr_scale, cfg.lr_opacity, cfg.lr_albedo,
                     cfg.lambda, cfg.grad_threshold, cfg.prune_opacity, cfg.prune_scale})
        w.f64(v);
    w.i64(cfg.densify_interval);
    w.i64(cfg.densify_start);
    w.i64(cfg.densify_stop);
    w.i64(int64_t(cfg.seed));

    for (const SurfelGaussian& g : scene.gaussians) {
        SurfelGaussian copy = g;
        for (int k = 0; k < kParamsPerGaussian; ++k) w.f64(*gaussian_param(copy, k));
    }
    w.vec(scene.densify_stats.grad_accum);
    std::vector<double> counts(scene.densify_stats.update_count.begin(),
                               scene.densify_stats.update_count.end());
    w.vec(counts);

    for (const std::vector<double>* v :
         {&state.m_center, &state.v_center, &state.m_tangent_u, &state.v_tangent_u,
          &state.m_tangent_v, &state.v_tangent_v, &state.m_scale_u, &state.v_scale_u,
          &state.m_scale_v, &state.v_scale_v, &state.m_opacity, &state.v_opacity,
          &state.m_albedo, &state.v_albedo})
        w.vec(*v);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw LoadError("cannot open checkpoint " + path);
    Reader r{fp.get()};
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw FormatError(path + " is not a gsps checkpoint");

    Checkpoint ck;
    ck.iteration = int(r.i64());
    const int64_t count = r.i64();
    ck.state.step_count = r.i64();

    Camera& c = ck.scene.camera;
    c.model = r.i64() == 0 ? CameraModel::Orthographic : CameraModel::Pinhole;
    c.position = {r.f64(), r.f64(), r.f64()};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c.orientation.m[i][j] = r.f64();
    c.focal_px = r.f64();
    c.principal_x = r.f64();
    c.principal_y = r.f64();
    c.pixel_pitch = r.f64();
    c.width = int(r.i64());
    c.height = int(r.i64());

    OptimConfig& cfg = ck.config;
    cfg.iterations = int(r.i64());
    cfg.lr_center = r.f64();
    cfg.lr_tangent = r.f64();
    cfg.lr_scale = r.f64();
    cfg.lr_opacity = r.f64();
    cfg.lr_albedo = r.f64();
    cfg.lambda = r.f64();
    cfg.grad_threshold = r.f64();
    cfg.prune_opacity = r.f64();
    cfg.prune_scale = r.f64();
    cfg.densify_interval = int(r.i64());
    cfg.densify_start = int(r.i64());
    cfg.densify_stop = int(r.i64());
    cfg.seed = uint64_t(r.i64());

    ck.scene.gaussians.resize(size_t(count));
    for (SurfelGaussian& g : ck.scene.gaussians)
        for (int k = 0; k < kParamsPerGaussian; ++k) *gaussian_param(g, k) = r.f64();

    ck.scene.densify_stats.grad_accum = r.vec();
    const std::vector<double> counts = r.vec();
    ck.scene.densify_stats.update_count.assign(counts.size(), 0);
    for (size_t i = 0; i < counts.size(); ++i)
        ck.scene.densify_stats.update_count[i] = int(counts[i]);

    for (std::vector<double>* v :
         {&ck.state.m_center, &ck.state.v_center, &ck.state.m_tangent_u, &ck.state.v_tangent_u,
          &ck.state.m_tangent_v, &ck.state.v_tangent_v, &ck.state.m_scale_u, &ck.state.v_scale_u,
          &ck.state.m_scale_v, &ck.state.v_scale_v, &ck.state.m_opacity, &ck.state.v_opacity,
          &ck.state.m_albedo, &ck.state.v_albedo})
        *v = r.vec();

    if (ck.scene.densify_stats.size() != size_t(count) || ck.state.size() != size_t(count))
        throw FormatError(path + ": inconsistent checkpoint arrays");
    return ck;
}

}  // namespace gsps
