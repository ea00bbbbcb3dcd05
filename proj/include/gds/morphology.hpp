#pragma once

// Binary morphology and smoothing on small grids.

#include "gds/grid.hpp"

namespace gds {

// Squared Euclidean distance from every pixel to the nearest pixel whose mask
// value equals `target` (0 or 1). Pixels with no such pixel in the grid get
// +infinity. Exact (separable lower-envelope transform).
ImageGrid squared_distance_to(const MaskGrid& mask, std::uint8_t target);

// Disk structuring element of real radius r: a pixel joins the dilation when
// some foreground pixel lies within distance r.
MaskGrid dilate_disk(const MaskGrid& mask, double radius);
// A pixel survives erosion when every in-grid background pixel is farther than r.
MaskGrid erode_disk(const MaskGrid& mask, double radius);

// Foreground pixels with at least one 4-neighbour in the background (or on the
// grid border).
MaskGrid inner_boundary(const MaskGrid& mask);

// Separable Gaussian smoothing with replicated borders; kernel radius ceil(3*sigma).
ImageGrid gaussian_blur(const ImageGrid& image, double sigma);

// Bilinear sample with zero outside the grid.
double sample_bilinear_zero(const ImageGrid& image, double y, double x);

}  // namespace gds
