// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural rasters for fixtures: textured objects on plain backgrounds.

#pragma once

#include <array>
#include <cstdint>

#include "forge/raster.hpp"
#include "forge/rng.hpp"

namespace forge::synth {

using Rgb = std::array<std::uint8_t, 3>;

Rgb RandomColor(Rng& rng);

void FillBox(Raster& image, const Box& box, Rgb color);

// Scatters `shapes` random rectangles, ellipses and thick lines inside `region`.
void PaintTexture(Raster& image, const Box& region, Rng& rng, int shapes);

// Textured patch with a random background color.
Raster TexturedPatch(int width, int height, std::uint64_t seed, int shapes = 60);

// Independent per-pixel noise.
Raster NoisePatch(int width, int height, std::uint64_t seed);

// Rotation about the image center by `degrees` (counter-clockwise on screen),
// bilinear, same size; uncovered pixels take `fill`.
Raster Rotate(const Raster& image, double degrees, Rgb fill);

// Adds `delta` to every channel with saturation.
Raster Brighten(const Raster& image, int delta);

}  // namespace forge::synth
