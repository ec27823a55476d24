#include "msgan/pyramid.hpp"

#include <stdexcept>
#include <string>

#include "msgan/resample.hpp"

namespace msgan {

Pyramid build_pyramid(const Volume& v, int base_size, const EdgeConfig& cfg) {
    if (base_size < 2) throw std::invalid_argument("build_pyramid: base_size must be >= 2");
    int side = v.shape[0];
    for (int a = 1; a < v.ndim; ++a)
        if (v.shape[a] != side)
            throw std::invalid_argument("build_pyramid: input must be square/cubic");
    int k = 0;
    int s = base_size;
    while (s < side) {
        s *= 2;
        ++k;
    }
    if (s != side)
        throw std::invalid_argument("build_pyramid: side " + std::to_string(side) +
                                    " is not base_size " + std::to_string(base_size) +
                                    " times a power of two");
    Pyramid p;
    p.base_size = base_size;
    p.n_scales = k;
    p.images.resize(static_cast<std::size_t>(k) + 1);
    p.images[static_cast<std::size_t>(k)] = v;
    for (int i = k; i > 0; --i)
        p.images[static_cast<std::size_t>(i) - 1] = downsample2(p.images[static_cast<std::size_t>(i)]);
    p.edges.reserve(p.images.size());
    for (const Volume& img : p.images) p.edges.push_back(extract_edges(img, cfg));
    return p;
}

PatchGrid make_patch_grid(int ndim, const std::array<int, 3>& scale_shape, int patch_size,
                          int margin) {
    if (margin < 0) throw std::invalid_argument("make_patch_grid: margin must be >= 0");
    int stride = patch_size - 2 * margin;
    if (stride <= 0)
        throw std::invalid_argument("make_patch_grid: patch " + std::to_string(patch_size) +
                                    " with margin " + std::to_string(margin) +
                                    " leaves no core");
    PatchGrid g;
    g.ndim = ndim;
    g.scale_shape = scale_shape;
    g.patch_size = patch_size;
    g.margin = margin;
    std::array<int, 3> counts{1, 1, 1};
    for (int a = 0; a < ndim; ++a) {
        if (scale_shape[a] < 1) throw std::invalid_argument("make_patch_grid: empty extent");
        counts[a] = (scale_shape[a] + stride - 1) / stride;
    }
    std::array<int, 3> c{0, 0, 0};
    for (int i = 0; i < counts[0]; ++i)
        for (int j = 0; j < (ndim >= 2 ? counts[1] : 1); ++j)
            for (int l = 0; l < (ndim == 3 ? counts[2] : 1); ++l) {
                c = {i * stride, j * stride, l * stride};
                g.origins.push_back(c);
            }
    return g;
}

PatchGrid make_overlap_grid(int ndim, const std::array<int, 3>& shape, int patch_size,
                            int overlap) {
    if (overlap < 0 || overlap >= patch_size)
        throw std::invalid_argument("make_overlap_grid: overlap must be in [0, patch_size)");
    PatchGrid g;
    g.ndim = ndim;
    g.scale_shape = shape;
    g.patch_size = patch_size;
    g.margin = 0;
    int step = patch_size - overlap;
    std::array<std::vector<int>, 3> axis_origins;
    for (int a = 0; a < ndim; ++a) {
        if (shape[a] < patch_size)
            throw std::invalid_argument("make_overlap_grid: extent smaller than patch");
        int o = 0;
        for (;;) {
            int clamped = std::min(o, shape[a] - patch_size);
            axis_origins[a].push_back(clamped);
            if (clamped == shape[a] - patch_size) break;
            o += step;
        }
    }
    for (int i : axis_origins[0])
        for (int j : ndim >= 2 ? axis_origins[1] : std::vector<int>{0})
            for (int l : ndim == 3 ? axis_origins[2] : std::vector<int>{0})
                g.origins.push_back({i, j, l});
    return g;
}

Volume extract_window(const Volume& v, const std::array<int, 3>& start, int size) {
    std::array<int, 3> sh{0, 0, 0};
    for (int a = 0; a < v.ndim; ++a) sh[a] = size;
    Volume out(v.ndim, sh);
    auto lo = logical_shape(out);
    auto ls = logical_shape(v);
    std::array<int, 3> lstart = v.ndim == 3 ? start : std::array<int, 3>{0, start[0], start[1]};
    std::size_t idx = 0;
    for (int z = 0; z < lo[0]; ++z)
        for (int y = 0; y < lo[1]; ++y)
            for (int x = 0; x < lo[2]; ++x, ++idx) {
                int cz = reflect_index(lstart[0] + z, ls[0]);
                int cy = reflect_index(lstart[1] + y, ls[1]);
                int cx = reflect_index(lstart[2] + x, ls[2]);
                out.data[idx] =
                    v.data[(static_cast<std::size_t>(cz) * ls[1] + cy) * ls[2] + cx];
            }
    return out;
}

Volume upsampled_window(const Volume& lower, const std::array<int, 3>& start, int size) {
    std::array<int, 3> sh{0, 0, 0};
    for (int a = 0; a < lower.ndim; ++a) sh[a] = size;
    Volume out(lower.ndim, sh);
    auto lo = logical_shape(out);
    std::array<int, 3> up_extent{1, 1, 1};
    for (int a = 0; a < lower.ndim; ++a) up_extent[a] = lower.shape[a] * 2;
    std::size_t idx = 0;
    for (int z = 0; z < lo[0]; ++z)
        for (int y = 0; y < lo[1]; ++y)
            for (int x = 0; x < lo[2]; ++x, ++idx) {
                std::array<int, 3> rel =
                    lower.ndim == 3 ? std::array<int, 3>{z, y, x} : std::array<int, 3>{y, x, 0};
                std::array<int, 3> c{0, 0, 0};
                for (int a = 0; a < lower.ndim; ++a)
                    c[a] = reflect_index(start[a] + rel[a], up_extent[a]);
                out.data[idx] = upsample2_at(lower, c);
            }
    return out;
}

TrainingTriple extract_training_triple(const Pyramid& p, int scale,
                                       const std::array<int, 3>& origin, int patch_size,
                                       int margin) {
    if (scale < 1 || scale > p.n_scales)
        throw std::out_of_range("extract_training_triple: scale " + std::to_string(scale) +
                                " outside [1, " + std::to_string(p.n_scales) + "]");
    const Volume& img = p.images[static_cast<std::size_t>(scale)];
    for (int a = 0; a < img.ndim; ++a)
        if (origin[a] < 0 || origin[a] >= img.shape[a])
            throw std::out_of_range("extract_training_triple: origin outside the scale domain");
    std::array<int, 3> w = origin;
    for (int a = 0; a < img.ndim; ++a) w[a] -= margin;
    TrainingTriple t;
    t.edge_patch = extract_window(p.edges[static_cast<std::size_t>(scale)], w, patch_size);
    t.lowres_up_patch =
        upsampled_window(p.images[static_cast<std::size_t>(scale) - 1], w, patch_size);
    t.target_patch = extract_window(img, w, patch_size);
    return t;
}

}  // namespace msgan
