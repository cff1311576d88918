// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsps/diff.hpp"
#include "gsps/ingest.hpp"
#include "gsps/loss.hpp"
#include "gsps/rasterizer.hpp"
#include "gsps/types.hpp"

namespace gsps {

struct OptimConfig {
    int iterations = 7000;
    double lr_center = 2e-4;
    double lr_tangent = 1e-3;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_albedo = 2.5e-3;
    double lambda = 0.05;

    int densify_interval = 300;
    int densify_start = 500;
    int densify_stop = 5000;
    double grad_threshold = 4e-4;   // mean |d_center| trigger
    double prune_opacity = 0.005;
    double prune_scale = 0.0;       // world ceiling; 0 = 8x pixel pitch

    uint64_t seed = 0;              // recorded for run reproduction
    BackwardOptions backward;

    void validate() const;  // densify_start <= densify_stop <= iterations
};

// First/second moment estimates, flat per parameter class and aligned
// with the Gaussian list (xyz interleaved for vector classes).
struct AdamState {
    std::vector<double> m_center, v_center;
    std::vector<double> m_tangent_u, v_tangent_u;
    std::vector<double> m_tangent_v, v_tangent_v;
    std::vector<double> m_scale_u, v_scale_u;
    std::vector<double> m_scale_v, v_scale_v;
    std::vector<double> m_opacity, v_opacity;
    std::vector<double> m_albedo, v_albedo;
    int64_t step_count = 0;

    void resize(size_t n);  // zero-initialized
    size_t size() const { return m_opacity.size(); }
};

// One backward pass + adaptive-moment update + projections
// (re-orthonormalized tangents, clamped opacity and scales), then the
// positional-gradient statistics for densification.
LossReport step(SplatScene& scene, const ImageStack& stack, const OptimConfig& cfg,
                AdamState& state);

struct DensifySummary {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
};

DensifySummary densify_and_prune(SplatScene& scene, AdamState& state, const OptimConfig& cfg);

struct ReconstructResult {
    SplatScene scene;
    AdamState state;
    RenderBuffers buffers;
    std::vector<LossReport> log;  // one entry per iteration
};

// Called after every iteration (1-based); densify events have already
// been applied for that iteration. Scene and state together are exactly
// what a checkpoint needs.
using StepCallback = std::function<void(int iteration, const LossReport& report,
                                        const SplatScene& scene, const AdamState& state)>;

ReconstructResult reconstruct(const ImageStack& stack, const Camera& camera,
                              const OptimConfig& cfg, const StepCallback& callback = {});

// As reconstruct, but continuing from a checkpointed scene/state.
ReconstructResult reconstruct_resume(const ImageStack& stack, SplatScene scene, AdamState state,
                                     int start_iteration, const OptimConfig& cfg,
                                     const StepCallback& callback = {});

// Versioned binary dump of everything the loop needs to resume
// bit-exactly: parameters, moments, densify statistics, iteration and
// config.
struct Checkpoint {
    SplatScene scene;
    AdamState state;
    OptimConfig config;
    int iteration = 0;
};

void save_checkpoint(const std::string& path, const SplatScene& scene, const AdamState& state,
                     const OptimConfig& cfg, int iteration);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gsps
