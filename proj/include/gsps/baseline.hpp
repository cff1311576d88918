// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsps/image.hpp"
#include "gsps/ingest.hpp"

namespace gsps {

struct PhotometricStereoResult {
    ImageV3 normals;  // camera space, camera-facing sign; zero where degenerate
    ImageD albedo;    // |m| of the least-squares solve
    int degenerate_count = 0;
};

// Classical least-squares photometric stereo: per foreground pixel,
// solve L m = I and split m into direction and magnitude. Color images
// are reduced to luminance first. Throws when the light directions do
// not span rank 3.
PhotometricStereoResult woodham(const ImageStack& stack);

// As woodham, but per pixel the darkest and brightest discard_fraction
// of the observations are dropped before the solve (a cheap guard
// against cast shadows and highlights).
PhotometricStereoResult woodham_robust(const ImageStack& stack, double discard_fraction);

}  // namespace gsps
