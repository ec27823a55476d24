#pragma once

#include "msgan/volume.hpp"

namespace msgan {

struct EdgeConfig {
    /// Gradient-magnitude binarization threshold, strictly inside (0, 100).
    double percentile = 90.0;
};

/// Sobel gradient magnitude (mirror boundary): per-axis 3-tap derivative
/// with [1,2,1] smoothing along the remaining axes, combined as the
/// Euclidean norm.
Volume sobel_magnitude(const Volume& v);

/// Binary edge map: voxel = 1 iff its Sobel magnitude reaches the
/// cfg.percentile-th nearest-rank percentile of all nonzero magnitudes.
/// A gradient-free image maps to all zeros.
Volume extract_edges(const Volume& v, const EdgeConfig& cfg = {});

}  // namespace msgan
