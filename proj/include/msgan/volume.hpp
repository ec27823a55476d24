#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace msgan {

/// N-dimensional (2D or 3D) single-channel scalar grid, row-major with the
/// slowest axis first. Canonical image intensities live in [-1, 1]; edge
/// maps are binary {0, 1} stored as 0.0f/1.0f. Spacing is informational.
struct Volume {
    int ndim = 2;
    std::array<int, 3> shape{0, 0, 0};       // entries [0, ndim) are valid
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<float> data;

    Volume() = default;
    Volume(int nd, std::array<int, 3> sh) : ndim(nd), shape(sh) {
        data.assign(numel_of(nd, sh), 0.0f);
    }

    static std::size_t numel_of(int nd, const std::array<int, 3>& sh) {
        std::size_t n = 1;
        for (int a = 0; a < nd; ++a) n *= static_cast<std::size_t>(sh[a]);
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int extent(int axis) const { return shape[axis]; }

    /// Linear index of a coordinate tuple (slowest axis first).
    std::size_t linear(const std::array<int, 3>& c) const {
        std::size_t idx = 0;
        for (int a = 0; a < ndim; ++a)
            idx = idx * static_cast<std::size_t>(shape[a]) + static_cast<std::size_t>(c[a]);
        return idx;
    }

    float at(const std::array<int, 3>& c) const { return data[linear(c)]; }
    float& at(const std::array<int, 3>& c) { return data[linear(c)]; }

    bool same_shape(const Volume& o) const {
        if (ndim != o.ndim) return false;
        for (int a = 0; a < ndim; ++a)
            if (shape[a] != o.shape[a]) return false;
        return true;
    }
};

/// Mirror boundary index (edge sample not repeated): -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

inline float clamp_canonical(float v) {
    return v < -1.0f ? -1.0f : (v > 1.0f ? 1.0f : v);
}

}  // namespace msgan
