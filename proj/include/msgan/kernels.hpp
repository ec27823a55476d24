#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "msgan/tensor.hpp"

// Layer kernels, templated on the scalar so gradients can be verified in
// double while training runs in float. Parallel loops only ever split
// disjoint output slabs (output channels for convolutions, channels for
// normalization) and every per-element accumulation runs in a fixed
// serial order, so results are independent of the thread count.

namespace msgan {

enum class PadMode { zero, reflect };

struct ConvGeom {
    std::array<int, 3> k{1, 1, 1};
    std::array<int, 3> s{1, 1, 1};
    std::array<int, 3> p{0, 0, 0};
    PadMode mode = PadMode::zero;
};

inline std::array<int, 3> conv_out_shape(const std::array<int, 3>& sp, const ConvGeom& g) {
    std::array<int, 3> o{};
    for (int a = 0; a < 3; ++a) {
        int span = sp[a] + 2 * g.p[a] - g.k[a];
        if (span < 0)
            throw std::invalid_argument("conv: extent " + std::to_string(sp[a]) +
                                        " smaller than kernel " + std::to_string(g.k[a]));
        o[a] = span / g.s[a] + 1;
    }
    return o;
}

inline std::array<int, 3> tconv_out_shape(const std::array<int, 3>& sp, const ConvGeom& g) {
    std::array<int, 3> o{};
    for (int a = 0; a < 3; ++a) {
        o[a] = (sp[a] - 1) * g.s[a] - 2 * g.p[a] + g.k[a];
        if (o[a] <= 0) throw std::invalid_argument("tconv: output extent would be non-positive");
    }
    return o;
}

template <class T>
Tensor<T> pad_input(const Tensor<T>& in, const std::array<int, 3>& p, PadMode mode) {
    if (p[0] == 0 && p[1] == 0 && p[2] == 0) return in;
    std::array<int, 3> ps{in.sp[0] + 2 * p[0], in.sp[1] + 2 * p[1], in.sp[2] + 2 * p[2]};
    Tensor<T> out(in.channels, ps);
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.ch(c);
        T* dst = out.ch(c);
        for (int z = 0; z < ps[0]; ++z)
            for (int y = 0; y < ps[1]; ++y)
                for (int x = 0; x < ps[2]; ++x) {
                    int iz = z - p[0], iy = y - p[1], ix = x - p[2];
                    T v;
                    if (mode == PadMode::reflect) {
                        v = src[(static_cast<std::size_t>(reflect_index(iz, in.sp[0])) * in.sp[1] +
                                 reflect_index(iy, in.sp[1])) *
                                    in.sp[2] +
                                reflect_index(ix, in.sp[2])];
                    } else {
                        bool inside = iz >= 0 && iz < in.sp[0] && iy >= 0 && iy < in.sp[1] &&
                                      ix >= 0 && ix < in.sp[2];
                        v = inside ? src[(static_cast<std::size_t>(iz) * in.sp[1] + iy) * in.sp[2] +
                                         ix]
                                   : T(0);
                    }
                    dst[(static_cast<std::size_t>(z) * ps[1] + y) * ps[2] + x] = v;
                }
    }
    return out;
}

/// Adjoint of pad_input: folds a padded-domain gradient back onto the
/// original domain (zero padding drops the border, reflection padding
/// accumulates it onto its mirror source).
template <class T>
Tensor<T> unpad_adjoint(const Tensor<T>& gpad, const std::array<int, 3>& p, PadMode mode,
                        const std::array<int, 3>& orig) {
    if (p[0] == 0 && p[1] == 0 && p[2] == 0) return gpad;
    Tensor<T> out(gpad.channels, orig);
    for (int c = 0; c < gpad.channels; ++c) {
        const T* src = gpad.ch(c);
        T* dst = out.ch(c);
        for (int z = 0; z < gpad.sp[0]; ++z)
            for (int y = 0; y < gpad.sp[1]; ++y)
                for (int x = 0; x < gpad.sp[2]; ++x) {
                    int iz = z - p[0], iy = y - p[1], ix = x - p[2];
                    T g = src[(static_cast<std::size_t>(z) * gpad.sp[1] + y) * gpad.sp[2] + x];
                    if (mode == PadMode::reflect) {
                        dst[(static_cast<std::size_t>(reflect_index(iz, orig[0])) * orig[1] +
                             reflect_index(iy, orig[1])) *
                                orig[2] +
                            reflect_index(ix, orig[2])] += g;
                    } else if (iz >= 0 && iz < orig[0] && iy >= 0 && iy < orig[1] && ix >= 0 &&
                               ix < orig[2]) {
                        dst[(static_cast<std::size_t>(iz) * orig[1] + iy) * orig[2] + ix] += g;
                    }
                }
    }
    return out;
}

/// weight layout (oc, ic, kz, ky, kx), bias (oc).
template <class T>
Tensor<T> conv_forward(const Tensor<T>& in, const T* w, const T* b, int oc, const ConvGeom& g) {
    auto osp = conv_out_shape(in.sp, g);
    Tensor<T> pad = pad_input(in, g.p, g.mode);
    Tensor<T> out(oc, osp);
    const int ic = in.channels;
    const std::size_t ktotal = static_cast<std::size_t>(g.k[0]) * g.k[1] * g.k[2];
    const std::size_t orow = static_cast<std::size_t>(osp[2]);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        T* oslab = out.ch(o);
        for (std::size_t i = 0; i < out.spatial(); ++i) oslab[i] = b[o];
        for (int i = 0; i < ic; ++i) {
            const T* islab = pad.ch(i);
            const T* wk = w + (static_cast<std::size_t>(o) * ic + i) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T wv = wk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx];
                        for (int oz = 0; oz < osp[0]; ++oz) {
                            const T* irow;
                            T* orow_p;
                            for (int oy = 0; oy < osp[1]; ++oy) {
                                irow = islab + (static_cast<std::size_t>(oz * g.s[0] + kz) *
                                                    pad.sp[1] +
                                                (oy * g.s[1] + ky)) *
                                                   pad.sp[2] +
                                       kx;
                                orow_p = oslab + (static_cast<std::size_t>(oz) * osp[1] + oy) * orow;
                                if (g.s[2] == 1) {
                                    for (int ox = 0; ox < osp[2]; ++ox)
                                        orow_p[ox] += wv * irow[ox];
                                } else {
                                    for (int ox = 0; ox < osp[2]; ++ox)
                                        orow_p[ox] += wv * irow[static_cast<std::size_t>(ox) * g.s[2]];
                                }
                            }
                        }
                    }
        }
    }
    return out;
}

/// Accumulates (+=) into gw/gb; returns the input gradient.
template <class T>
Tensor<T> conv_backward(const Tensor<T>& in, const T* w, int oc, const ConvGeom& g,
                        const Tensor<T>& gout, T* gw, T* gb) {
    auto osp = conv_out_shape(in.sp, g);
    if (gout.channels != oc || gout.sp != osp)
        throw std::invalid_argument("conv_backward: gradient shape mismatch");
    Tensor<T> pad = pad_input(in, g.p, g.mode);
    const int ic = in.channels;
    const std::size_t ktotal = static_cast<std::size_t>(g.k[0]) * g.k[1] * g.k[2];

#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        const T* gslab = gout.ch(o);
        T acc_b = T(0);
        for (std::size_t i = 0; i < gout.spatial(); ++i) acc_b += gslab[i];
        gb[o] += acc_b;
        for (int i = 0; i < ic; ++i) {
            const T* islab = pad.ch(i);
            T* gwk = gw + (static_cast<std::size_t>(o) * ic + i) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T acc = T(0);
                        for (int oz = 0; oz < osp[0]; ++oz)
                            for (int oy = 0; oy < osp[1]; ++oy) {
                                const T* irow = islab +
                                                (static_cast<std::size_t>(oz * g.s[0] + kz) *
                                                     pad.sp[1] +
                                                 (oy * g.s[1] + ky)) *
                                                    pad.sp[2] +
                                                kx;
                                const T* grow =
                                    gslab + (static_cast<std::size_t>(oz) * osp[1] + oy) * osp[2];
                                for (int ox = 0; ox < osp[2]; ++ox)
                                    acc += grow[ox] * irow[static_cast<std::size_t>(ox) * g.s[2]];
                            }
                        gwk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx] += acc;
                    }
        }
    }

    Tensor<T> gpad(ic, pad.sp);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ic; ++i) {
        T* gslab_in = gpad.ch(i);
        for (int o = 0; o < oc; ++o) {
            const T* gslab = gout.ch(o);
            const T* wk = w + (static_cast<std::size_t>(o) * ic + i) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T wv = wk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx];
                        for (int oz = 0; oz < osp[0]; ++oz)
                            for (int oy = 0; oy < osp[1]; ++oy) {
                                T* irow = gslab_in +
                                          (static_cast<std::size_t>(oz * g.s[0] + kz) * pad.sp[1] +
                                           (oy * g.s[1] + ky)) *
                                              pad.sp[2] +
                                          kx;
                                const T* grow =
                                    gslab + (static_cast<std::size_t>(oz) * osp[1] + oy) * osp[2];
                                for (int ox = 0; ox < osp[2]; ++ox)
                                    irow[static_cast<std::size_t>(ox) * g.s[2]] += wv * grow[ox];
                            }
                    }
        }
    }
    return unpad_adjoint(gpad, g.p, g.mode, in.sp);
}

/// Transposed convolution; weight layout (ic, oc, kz, ky, kx), bias (oc).
/// The padding parameter crops the output ((sp-1)*s - 2p + k per axis).
template <class T>
Tensor<T> tconv_forward(const Tensor<T>& in, const T* w, const T* b, int oc, const ConvGeom& g) {
    auto osp = tconv_out_shape(in.sp, g);
    std::array<int, 3> psp{osp[0] + 2 * g.p[0], osp[1] + 2 * g.p[1], osp[2] + 2 * g.p[2]};
    Tensor<T> outpad(oc, psp);
    const int ic = in.channels;
    const std::size_t ktotal = static_cast<std::size_t>(g.k[0]) * g.k[1] * g.k[2];
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        T* oslab = outpad.ch(o);
        for (std::size_t i = 0; i < outpad.spatial(); ++i) oslab[i] = T(0);
        for (int i = 0; i < ic; ++i) {
            const T* islab = in.ch(i);
            const T* wk = w + (static_cast<std::size_t>(i) * oc + o) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T wv = wk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx];
                        for (int iz = 0; iz < in.sp[0]; ++iz)
                            for (int iy = 0; iy < in.sp[1]; ++iy) {
                                const T* irow =
                                    islab + (static_cast<std::size_t>(iz) * in.sp[1] + iy) * in.sp[2];
                                T* prow = oslab +
                                          (static_cast<std::size_t>(iz * g.s[0] + kz) * psp[1] +
                                           (iy * g.s[1] + ky)) *
                                              psp[2] +
                                          kx;
                                for (int ix = 0; ix < in.sp[2]; ++ix)
                                    prow[static_cast<std::size_t>(ix) * g.s[2]] += wv * irow[ix];
                            }
                    }
        }
    }
    Tensor<T> out(oc, osp);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        const T* pslab = outpad.ch(o);
        T* oslab = out.ch(o);
        for (int z = 0; z < osp[0]; ++z)
            for (int y = 0; y < osp[1]; ++y)
                for (int x = 0; x < osp[2]; ++x)
                    oslab[(static_cast<std::size_t>(z) * osp[1] + y) * osp[2] + x] =
                        b[o] + pslab[(static_cast<std::size_t>(z + g.p[0]) * psp[1] + (y + g.p[1])) *
                                         psp[2] +
                                     (x + g.p[2])];
    }
    return out;
}

template <class T>
Tensor<T> tconv_backward(const Tensor<T>& in, const T* w, int oc, const ConvGeom& g,
                         const Tensor<T>& gout, T* gw, T* gb) {
    auto osp = tconv_out_shape(in.sp, g);
    if (gout.channels != oc || gout.sp != osp)
        throw std::invalid_argument("tconv_backward: gradient shape mismatch");
    // Adjoint of the final crop: zero-extend the output gradient.
    std::array<int, 3> psp{osp[0] + 2 * g.p[0], osp[1] + 2 * g.p[1], osp[2] + 2 * g.p[2]};
    Tensor<T> gpad(oc, psp);
    for (int o = 0; o < oc; ++o) {
        const T* gs = gout.ch(o);
        T* gp = gpad.ch(o);
        for (int z = 0; z < osp[0]; ++z)
            for (int y = 0; y < osp[1]; ++y)
                for (int x = 0; x < osp[2]; ++x)
                    gp[(static_cast<std::size_t>(z + g.p[0]) * psp[1] + (y + g.p[1])) * psp[2] +
                       (x + g.p[2])] =
                        gs[(static_cast<std::size_t>(z) * osp[1] + y) * osp[2] + x];
    }

    const int ic = in.channels;
    const std::size_t ktotal = static_cast<std::size_t>(g.k[0]) * g.k[1] * g.k[2];
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        const T* gs = gout.ch(o);
        T acc_b = T(0);
        for (std::size_t i = 0; i < gout.spatial(); ++i) acc_b += gs[i];
        gb[o] += acc_b;
    }

    Tensor<T> gin(ic, in.sp);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ic; ++i) {
        T* gislab = gin.ch(i);
        for (int o = 0; o < oc; ++o) {
            const T* gp = gpad.ch(o);
            const T* wk = w + (static_cast<std::size_t>(i) * oc + o) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T wv = wk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx];
                        for (int iz = 0; iz < in.sp[0]; ++iz)
                            for (int iy = 0; iy < in.sp[1]; ++iy) {
                                T* girow = gislab +
                                           (static_cast<std::size_t>(iz) * in.sp[1] + iy) * in.sp[2];
                                const T* prow = gp +
                                                (static_cast<std::size_t>(iz * g.s[0] + kz) *
                                                     psp[1] +
                                                 (iy * g.s[1] + ky)) *
                                                    psp[2] +
                                                kx;
                                for (int ix = 0; ix < in.sp[2]; ++ix)
                                    girow[ix] += wv * prow[static_cast<std::size_t>(ix) * g.s[2]];
                            }
                    }
        }
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < ic; ++i) {
        const T* islab = in.ch(i);
        for (int o = 0; o < oc; ++o) {
            const T* gp = gpad.ch(o);
            T* gwk = gw + (static_cast<std::size_t>(i) * oc + o) * ktotal;
            for (int kz = 0; kz < g.k[0]; ++kz)
                for (int ky = 0; ky < g.k[1]; ++ky)
                    for (int kx = 0; kx < g.k[2]; ++kx) {
                        T acc = T(0);
                        for (int iz = 0; iz < in.sp[0]; ++iz)
                            for (int iy = 0; iy < in.sp[1]; ++iy) {
                                const T* irow =
                                    islab + (static_cast<std::size_t>(iz) * in.sp[1] + iy) * in.sp[2];
                                const T* prow = gp +
                                                (static_cast<std::size_t>(iz * g.s[0] + kz) *
                                                     psp[1] +
                                                 (iy * g.s[1] + ky)) *
                                                    psp[2] +
                                                kx;
                                for (int ix = 0; ix < in.sp[2]; ++ix)
                                    acc += irow[ix] * prow[static_cast<std::size_t>(ix) * g.s[2]];
                            }
                        gwk[(static_cast<std::size_t>(kz) * g.k[1] + ky) * g.k[2] + kx] += acc;
                    }
        }
    }
    return gin;
}

/// Affine-free per-channel normalization over the spatial extent.
template <class T>
Tensor<T> instance_norm_forward(const Tensor<T>& in, T eps) {
    Tensor<T> out(in.channels, in.sp);
    const std::size_t n = in.spatial();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.ch(c);
        T* dst = out.ch(c);
        T mean = T(0);
        for (std::size_t i = 0; i < n; ++i) mean += src[i];
        mean /= static_cast<T>(n);
        T var = T(0);
        for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<T>(n);
        T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * inv;
    }
    return out;
}

template <class T>
Tensor<T> instance_norm_backward(const Tensor<T>& in, const Tensor<T>& gout, T eps) {
    Tensor<T> gin(in.channels, in.sp);
    const std::size_t n = in.spatial();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.ch(c);
        const T* g = gout.ch(c);
        T* dst = gin.ch(c);
        T mean = T(0);
        for (std::size_t i = 0; i < n; ++i) mean += src[i];
        mean /= static_cast<T>(n);
        T var = T(0);
        for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<T>(n);
        T inv = T(1) / std::sqrt(var + eps);
        T gmean = T(0), gdot = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            gmean += g[i];
            gdot += g[i] * (src[i] - mean) * inv;
        }
        gmean /= static_cast<T>(n);
        gdot /= static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = (g[i] - gmean - (src[i] - mean) * inv * gdot) * inv;
    }
    return gin;
}

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& in, T slope) {
    Tensor<T> out(in.channels, in.sp);
    for (std::size_t i = 0; i < in.numel(); ++i)
        out.data[i] = in.data[i] > T(0) ? in.data[i] : slope * in.data[i];
    return out;
}

template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& in, const Tensor<T>& gout, T slope) {
    Tensor<T> gin(in.channels, in.sp);
    for (std::size_t i = 0; i < in.numel(); ++i)
        gin.data[i] = in.data[i] > T(0) ? gout.data[i] : slope * gout.data[i];
    return gin;
}

template <class T>
Tensor<T> tanh_forward(const Tensor<T>& in) {
    Tensor<T> out(in.channels, in.sp);
    for (std::size_t i = 0; i < in.numel(); ++i) out.data[i] = std::tanh(in.data[i]);
    return out;
}

/// Takes the forward OUTPUT (y), not the input.
template <class T>
Tensor<T> tanh_backward(const Tensor<T>& out, const Tensor<T>& gout) {
    Tensor<T> gin(out.channels, out.sp);
    for (std::size_t i = 0; i < out.numel(); ++i)
        gin.data[i] = gout.data[i] * (T(1) - out.data[i] * out.data[i]);
    return gin;
}

template <class T>
Tensor<T> sigmoid_forward(const Tensor<T>& in) {
    Tensor<T> out(in.channels, in.sp);
    for (std::size_t i = 0; i < in.numel(); ++i)
        out.data[i] = T(1) / (T(1) + std::exp(-in.data[i]));
    return out;
}

/// Takes the forward OUTPUT (y), not the input.
template <class T>
Tensor<T> sigmoid_backward(const Tensor<T>& out, const Tensor<T>& gout) {
    Tensor<T> gin(out.channels, out.sp);
    for (std::size_t i = 0; i < out.numel(); ++i)
        gin.data[i] = gout.data[i] * out.data[i] * (T(1) - out.data[i]);
    return gin;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.sp != b.sp) throw std::invalid_argument("concat_channels: spatial shapes differ");
    Tensor<T> out(a.channels + b.channels, a.sp);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
    return out;
}

template <class T>
void split_channels(const Tensor<T>& g, int ca, Tensor<T>& ga, Tensor<T>& gb) {
    ga = Tensor<T>(ca, g.sp);
    gb = Tensor<T>(g.channels - ca, g.sp);
    std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(ga.numel()),
              ga.data.begin());
    std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(ga.numel()), g.data.end(),
              gb.data.begin());
}

template <class T>
Tensor<T> add_tensors(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_tensors: shapes differ");
    Tensor<T> out(a.channels, a.sp);
    for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

}  // namespace msgan
