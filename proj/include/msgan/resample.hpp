#pragma once

#include "msgan/volume.hpp"

namespace msgan {

/// Treats 2D volumes as 3D with a leading singleton axis so loops can be
/// written once; linear indices are unchanged by the promotion.
inline std::array<int, 3> logical_shape(const Volume& v) {
    if (v.ndim == 3) return v.shape;
    return {1, v.shape[0], v.shape[1]};
}

/// Halves every axis by non-overlapping 2^ndim block averaging.
/// Every extent must be even.
Volume downsample2(const Volume& v);

/// Value of upsample2(v) at output coordinate c without materializing the
/// doubled volume. The whole-array overload and windowed patch extraction
/// both evaluate through this function, so they are bit-identical.
float upsample2_at(const Volume& v, const std::array<int, 3>& c);

/// Doubles every axis by multilinear interpolation. Output voxel j samples
/// input position j/2 - 1/4 (half-voxel alignment, borders clamped), so
/// constants are preserved and downsample2(upsample2(v)) = v on constants.
Volume upsample2(const Volume& v);

}  // namespace msgan
