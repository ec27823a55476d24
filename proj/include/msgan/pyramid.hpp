#pragma once

#include <vector>

#include "msgan/edges.hpp"
#include "msgan/volume.hpp"

namespace msgan {

/// Resolution chain: images[0] is the base resolution, each following scale
/// doubles the side. edges[i] is the binary edge map of images[i].
struct Pyramid {
    int base_size = 64;
    int n_scales = 0;  // number of doubling scales above the base
    std::vector<Volume> images;
    std::vector<Volume> edges;
};

/// Side length of the square/cubic patches used for patch-wise training
/// and generation at the refinement scales.
inline constexpr int kPatchSize = 32;

/// Tiling geometry for one scale. Each origin places the trimmed core of
/// one generated patch: the core of the patch at origin o covers
/// [o, min(o + stride, extent)) per axis, and the patch reads the input
/// window [o - margin, o - margin + patch_size) with reflection padding.
/// Cores are disjoint and cover the whole domain.
struct PatchGrid {
    int ndim = 2;
    std::array<int, 3> scale_shape{0, 0, 0};
    int patch_size = kPatchSize;
    int margin = 0;
    std::vector<std::array<int, 3>> origins;  // row-major core placements

    int stride() const { return patch_size - 2 * margin; }
};

/// Downsample chain from a cube/square whose side is base_size * 2^k;
/// edge maps are extracted per scale with cfg.
Pyramid build_pyramid(const Volume& v, int base_size, const EdgeConfig& cfg = {});

PatchGrid make_patch_grid(int ndim, const std::array<int, 3>& scale_shape, int patch_size,
                          int margin);

/// Grid for the overlapping baseline: full patches placed every
/// patch_size - overlap voxels, the last origin per axis clamped so the
/// patch stays inside the domain. margin is 0; cores are not used.
PatchGrid make_overlap_grid(int ndim, const std::array<int, 3>& shape, int patch_size,
                            int overlap);

/// Copy of the size^ndim window of v starting at start (may stick out on
/// any side; out-of-domain samples are mirror-reflected).
Volume extract_window(const Volume& v, const std::array<int, 3>& start, int size);

/// The same window geometry applied to upsample2(lower) without
/// materializing it; bit-identical to cropping the materialized upsample.
Volume upsampled_window(const Volume& lower, const std::array<int, 3>& start, int size);

/// Conditioning triple for training at scale >= 1: the patch_size window
/// at origin - margin of (edges[scale], upsample2(images[scale-1]),
/// images[scale]).
struct TrainingTriple {
    Volume edge_patch;
    Volume lowres_up_patch;
    Volume target_patch;
};
TrainingTriple extract_training_triple(const Pyramid& p, int scale,
                                       const std::array<int, 3>& origin, int patch_size,
                                       int margin);

}  // namespace msgan
