// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsps/image.hpp"
#include "gsps/ingest.hpp"
#include "gsps/types.hpp"

namespace gsps {

// Canonical orthographic reconstruction camera: identity orientation at
// z = +3 looking down -z, framing [-1.1, 1.1] along the larger image
// axis. Matches the synthetic generator's camera for square inputs.
Camera default_reconstruction_camera(int width, int height);

// Opaque normal-aligned surfels on a known depth map (one per valid
// pixel); lets shadow mapping run against ground-truth geometry.
SplatScene scene_from_depth(const ImageD& depth, const ImageV3& normals, const ImageU8& mask,
                            const Camera& camera);

}  // namespace gsps
