#include "msgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "msgan/arch.hpp"
#include "msgan/net.hpp"

namespace msgan {

namespace {

std::string shape_text(const Volume& v) {
    std::string s = "(";
    for (int a = 0; a < v.ndim; ++a) {
        if (a) s += " x ";
        s += std::to_string(v.shape[a]);
    }
    s += ")";
    return s;
}

// Extents of a block loop with inactive axes collapsed to 1.
std::array<int, 3> loop_extents(int ndim, const std::array<int, 3>& sh) {
    return {sh[0], ndim >= 2 ? sh[1] : 1, ndim == 3 ? sh[2] : 1};
}

// In-bounds block copy of `size` voxels of `src` starting at `start` into a
// fresh volume.
Volume crop(const Volume& src, const std::array<int, 3>& start, const std::array<int, 3>& size) {
    std::array<int, 3> sh{0, 0, 0};
    for (int a = 0; a < src.ndim; ++a) sh[a] = size[a];
    Volume out(src.ndim, sh);
    const auto ext = loop_extents(src.ndim, sh);
    std::size_t idx = 0;
    for (int i = 0; i < ext[0]; ++i)
        for (int j = 0; j < ext[1]; ++j)
            for (int l = 0; l < ext[2]; ++l, ++idx)
                out.data[idx] = src.at({start[0] + i, start[1] + j, start[2] + l});
    return out;
}

const Checkpoint& find_model(const std::vector<Checkpoint>& models, int scale) {
    for (const Checkpoint& c : models)
        if (c.scale == scale) return c;
    throw std::invalid_argument("generate: no checkpoint for scale " + std::to_string(scale));
}

void check_model(const Checkpoint& c, int ndim, int want_in, const char* role) {
    if (c.gen.arch.ndim != ndim)
        throw std::invalid_argument("generate: checkpoint for scale " + std::to_string(c.scale) +
                                    " is " + std::to_string(c.gen.arch.ndim) +
                                    "-dimensional, pyramid is " + std::to_string(ndim) +
                                    "-dimensional");
    if (c.gen.arch.in_channels != want_in)
        throw std::invalid_argument(
            "generate: checkpoint for scale " + std::to_string(c.scale) + " takes " +
            std::to_string(c.gen.arch.in_channels) + " input channels, but " + role +
            " needs " + std::to_string(want_in));
}

}  // namespace

GenMode parse_gen_mode(const std::string& s) {
    if (s == "multiscale") return GenMode::multiscale;
    if (s == "independent_overlap") return GenMode::independent_overlap;
    throw std::invalid_argument("unknown generation mode '" + s +
                                "' (expected multiscale or independent_overlap)");
}

Volume stitch(const std::vector<Volume>& patches, const PatchGrid& grid) {
    const int stride = grid.stride();
    if (stride <= 0) throw std::invalid_argument("stitch: grid leaves no core");
    if (patches.size() != grid.origins.size())
        throw std::invalid_argument("stitch: expected " + std::to_string(grid.origins.size()) +
                                    " patches, got " + std::to_string(patches.size()));
    Volume out(grid.ndim, grid.scale_shape);
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const Volume& p = patches[k];
        const auto& o = grid.origins[k];
        std::array<int, 3> want{0, 0, 0};
        for (int a = 0; a < grid.ndim; ++a)
            want[a] = std::min(stride, grid.scale_shape[a] - o[a]);
        bool ok = p.ndim == grid.ndim;
        for (int a = 0; ok && a < grid.ndim; ++a) ok = p.shape[a] == want[a];
        if (!ok) {
            Volume expect(grid.ndim, want);
            throw std::invalid_argument("stitch: patch " + std::to_string(k) + " has shape " +
                                        shape_text(p) + ", core at its origin needs " +
                                        shape_text(expect));
        }
        const auto ext = loop_extents(grid.ndim, want);
        std::size_t idx = 0;
        for (int i = 0; i < ext[0]; ++i)
            for (int j = 0; j < ext[1]; ++j)
                for (int l = 0; l < ext[2]; ++l, ++idx)
                    out.at({o[0] + i, o[1] + j, o[2] + l}) = p.data[idx];
    }
    return out;
}

Volume stitch_overlap_average(const std::vector<Volume>& patches, const PatchGrid& grid,
                              int overlap) {
    if (overlap < 0 || overlap >= grid.patch_size)
        throw std::invalid_argument("stitch_overlap_average: overlap must be in [0, patch_size)");
    if (patches.size() != grid.origins.size())
        throw std::invalid_argument("stitch_overlap_average: expected " +
                                    std::to_string(grid.origins.size()) + " patches, got " +
                                    std::to_string(patches.size()));
    Volume out(grid.ndim, grid.scale_shape);
    std::vector<double> sum(out.numel(), 0.0);
    std::vector<int> cnt(out.numel(), 0);
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const Volume& p = patches[k];
        const auto& o = grid.origins[k];
        bool ok = p.ndim == grid.ndim;
        for (int a = 0; ok && a < grid.ndim; ++a) ok = p.shape[a] == grid.patch_size;
        if (!ok)
            throw std::invalid_argument("stitch_overlap_average: patch " + std::to_string(k) +
                                        " has shape " + shape_text(p) + ", expected side " +
                                        std::to_string(grid.patch_size));
        std::array<int, 3> sh{0, 0, 0};
        for (int a = 0; a < grid.ndim; ++a) sh[a] = grid.patch_size;
        const auto ext = loop_extents(grid.ndim, sh);
        std::size_t idx = 0;
        for (int i = 0; i < ext[0]; ++i)
            for (int j = 0; j < ext[1]; ++j)
                for (int l = 0; l < ext[2]; ++l, ++idx) {
                    const std::size_t at = out.linear({o[0] + i, o[1] + j, o[2] + l});
                    sum[at] += static_cast<double>(p.data[idx]);
                    ++cnt[at];
                }
    }
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (cnt[i] == 0)
            throw std::invalid_argument("stitch_overlap_average: grid leaves voxels uncovered");
        out.data[i] = static_cast<float>(sum[i] / cnt[i]);
    }
    return out;
}

double seam_score(const Volume& v, const PatchGrid& grid) {
    if (v.ndim != grid.ndim)
        throw std::invalid_argument("seam_score: volume dimensionality does not match grid");
    for (int a = 0; a < v.ndim; ++a)
        if (v.shape[a] != grid.scale_shape[a])
            throw std::invalid_argument("seam_score: volume shape " + shape_text(v) +
                                        " does not match the grid domain");
    // Mark, per axis, the coordinates x where the pair (x-1, x) crosses into
    // a new patch.
    std::array<std::vector<char>, 3> boundary;
    for (int a = 0; a < v.ndim; ++a)
        boundary[a].assign(static_cast<std::size_t>(v.shape[a]), 0);
    for (const auto& o : grid.origins)
        for (int a = 0; a < v.ndim; ++a)
            if (o[a] > 0) boundary[a][static_cast<std::size_t>(o[a])] = 1;

    double bsum = 0.0, isum = 0.0;
    std::size_t bn = 0, in = 0;
    const auto ext = loop_extents(v.ndim, v.shape);
    for (int axis = 0; axis < v.ndim; ++axis) {
        std::array<int, 3> c{0, 0, 0};
        for (c[0] = 0; c[0] < ext[0]; ++c[0])
            for (c[1] = 0; c[1] < ext[1]; ++c[1])
                for (c[2] = 0; c[2] < ext[2]; ++c[2]) {
                    if (c[axis] + 1 >= v.shape[axis]) continue;
                    std::array<int, 3> d = c;
                    ++d[axis];
                    const double diff =
                        std::abs(static_cast<double>(v.at(d)) - static_cast<double>(v.at(c)));
                    if (boundary[axis][static_cast<std::size_t>(d[axis])]) {
                        bsum += diff;
                        ++bn;
                    } else {
                        isum += diff;
                        ++in;
                    }
                }
    }
    if (in == 0 || bn == 0) return 1.0;  // nothing to compare against
    const double imean = isum / static_cast<double>(in);
    if (imean == 0.0) return 1.0;  // constant-image guard
    return (bsum / static_cast<double>(bn)) / imean;
}

Volume generate(const std::vector<Checkpoint>& models, const Pyramid& edge_pyramid,
                std::uint64_t seed, GenMode mode, HrBackend backend) {
    const int n = edge_pyramid.n_scales;
    if (static_cast<int>(edge_pyramid.edges.size()) != n + 1 || n < 0)
        throw std::invalid_argument("generate: pyramid must carry edge maps for scales 0.." +
                                    std::to_string(n));
    const int ndim = edge_pyramid.edges[0].ndim;
    for (int i = 1; i <= n; ++i) {
        const Volume& prev = edge_pyramid.edges[i - 1];
        const Volume& cur = edge_pyramid.edges[i];
        bool ok = cur.ndim == ndim;
        for (int a = 0; ok && a < ndim; ++a) ok = cur.shape[a] == 2 * prev.shape[a];
        if (!ok)
            throw std::invalid_argument("generate: edge maps do not double from scale " +
                                        std::to_string(i - 1) + " to " + std::to_string(i));
    }

    if (mode == GenMode::independent_overlap) {
        const Checkpoint& cn = find_model(models, n);
        check_model(cn, ndim, 2, "edge-only generation");
        const Volume& edges = edge_pyramid.edges[n];
        if (n == 0)  // base scale only: the whole-image generator covers it
            return lr_generator_forward(cn.gen, edges, make_noise(seed, 0, {0, 0, 0}, edges));
        const PatchGrid grid = make_overlap_grid(ndim, edges.shape, kPatchSize, kOverlapVoxels);
        std::vector<Volume> patches;
        patches.reserve(grid.origins.size());
        for (const auto& o : grid.origins) {
            const Volume edge_patch = extract_window(edges, o, kPatchSize);
            const Volume noise = make_noise(seed, n, o, edge_patch);
            patches.push_back(lr_generator_forward(cn.gen, edge_patch, noise));
        }
        Volume out = stitch_overlap_average(patches, grid, kOverlapVoxels);
        out.spacing = edges.spacing;
        return out;
    }

    const Checkpoint& c0 = find_model(models, 0);
    check_model(c0, ndim, 2, "whole-image generation");
    Volume y = lr_generator_forward(c0.gen, edge_pyramid.edges[0],
                                    make_noise(seed, 0, {0, 0, 0}, edge_pyramid.edges[0]));
    for (int i = 1; i <= n; ++i) {
        const Volume& edges = edge_pyramid.edges[i];
        const Checkpoint* ci = nullptr;
        int margin = 0;
        if (backend == HrBackend::network) {
            ci = &find_model(models, i);
            check_model(*ci, ndim, 3, "the refinement cascade");
            margin = trim_margin(ci->gen.arch);
        } else {
            margin = trim_margin(hr_generator_arch(ndim));
        }
        const PatchGrid grid = make_patch_grid(ndim, edges.shape, kPatchSize, margin);
        const int stride = grid.stride();
        std::vector<Volume> cores;
        cores.reserve(grid.origins.size());
        for (const auto& o : grid.origins) {
            std::array<int, 3> start{0, 0, 0};
            for (int a = 0; a < ndim; ++a) start[a] = o[a] - margin;
            Volume low = upsampled_window(y, start, kPatchSize);
            Volume full;
            if (backend == HrBackend::network) {
                const Volume edge_patch = extract_window(edges, start, kPatchSize);
                const Volume noise = make_noise(seed, i, o, edge_patch);
                full = hr_generator_forward(ci->gen, edge_patch, low, noise);
            } else {
                full = std::move(low);
            }
            std::array<int, 3> csz{0, 0, 0};
            for (int a = 0; a < ndim; ++a) csz[a] = std::min(stride, edges.shape[a] - o[a]);
            cores.push_back(crop(full, {margin, margin, margin}, csz));
        }
        y = stitch(cores, grid);
        y.spacing = edges.spacing;
    }
    return y;
}

}  // namespace msgan
