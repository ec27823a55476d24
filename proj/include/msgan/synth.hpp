#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgan/pyramid.hpp"
#include "msgan/train.hpp"
#include "msgan/volume.hpp"

namespace msgan {

/// How a full-resolution image is assembled from the trained generators.
enum class GenMode {
    multiscale,           ///< coarse-to-fine cascade with trimmed exact tiling
    independent_overlap,  ///< edge-only patches blended by overlap averaging
};

/// Parses "multiscale" / "independent_overlap"; anything else throws
/// invalid_argument naming the offending mode.
GenMode parse_gen_mode(const std::string& s);

/// Patch producer used at the refinement scales. `network` runs the trained
/// patch generator; `passthrough` returns the upscaled previous-scale window
/// unchanged, which turns the cascade into pure resampling — useful for
/// verifying the tiling machinery end to end.
enum class HrBackend { network, passthrough };

/// Default blending overlap (voxels) for independent_overlap generation.
inline constexpr int kOverlapVoxels = 5;

/// Reassembles trimmed patch cores into a full volume. `patches` holds one
/// core per grid origin, in grid order; the core at origin o spans
/// [o, min(o + stride, extent)) per axis, so every voxel is written exactly
/// once. Throws invalid_argument on a count or shape mismatch.
Volume stitch(const std::vector<Volume>& patches, const PatchGrid& grid);

/// Blends full (untrimmed) patches placed at the origins of an overlap grid:
/// each voxel becomes the arithmetic mean of every patch value covering it.
/// `overlap` must satisfy 0 <= overlap < grid.patch_size. Throws
/// invalid_argument on a bad overlap, a count or shape mismatch, or a grid
/// that leaves voxels uncovered.
Volume stitch_overlap_average(const std::vector<Volume>& patches, const PatchGrid& grid,
                              int overlap = kOverlapVoxels);

/// Seam-artifact measure: the mean absolute finite difference over adjacent
/// voxel pairs that straddle a patch boundary, divided by the same mean over
/// all other adjacent pairs. Boundaries are the nonzero per-axis origin
/// coordinates of `grid`. 1.0 means seams are statistically invisible; when
/// the interior mean is zero (constant image) or the grid has no interior
/// boundaries, the score is defined as 1.0.
double seam_score(const Volume& v, const PatchGrid& grid);

/// Synthesizes the finest-scale image of `edge_pyramid`.
///
/// multiscale: the scale-0 checkpoint generates the whole base image from
/// (edges[0], noise); each refinement scale tiles its domain with a patch
/// grid whose margin comes from the generator's receptive field, runs the
/// patch generator on (edge window, upscaled previous-scale window, noise)
/// at every origin, trims the margins, and stitches the cores. Requires a
/// checkpoint for every scale.
///
/// independent_overlap: the finest scale is generated directly, one full
/// patch per overlap-grid origin from (edge window, noise) alone, blended
/// by overlap averaging. Requires the finest-scale checkpoint, trained
/// with hr_edge_only.
///
/// Patch noise is keyed by (seed, scale, origin), so patch evaluation order
/// cannot change the result. Throws invalid_argument for a missing scale
/// checkpoint or a checkpoint whose generator does not accept the mode's
/// conditioning channels.
Volume generate(const std::vector<Checkpoint>& models, const Pyramid& edge_pyramid,
                std::uint64_t seed, GenMode mode, HrBackend backend = HrBackend::network);

}  // namespace msgan
