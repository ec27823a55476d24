#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msgan/arch.hpp"
#include "msgan/rng.hpp"
#include "msgan/tensor.hpp"

// Network parameters plus forward/backward evaluation. Everything is
// templated on the scalar so analytic gradients can be verified in double
// against finite differences while training runs in float.

namespace msgan {

inline constexpr double kNormEps = 1e-5;

template <class T>
struct NetParams {
    ArchSpec arch;
    ParamLayout layout;
    tracked_vector<T> flat;  // weights and biases, unit order
    std::uint64_t seed = 0;
};

/// Weights ~ N(0, 0.02), biases zero, drawn in declaration order from the
/// given seed.
template <class T>
NetParams<T> init_net(const ArchSpec& arch, std::uint64_t seed) {
    validate_arch(arch);
    NetParams<T> net;
    net.arch = arch;
    net.layout = param_layout(arch);
    net.flat.assign(net.layout.total, T(0));
    net.seed = seed;
    Rng rng(seed);
    for (const ParamSlice& u : net.layout.units) {
        T* w = net.flat.data() + u.w_off;
        for (std::size_t i = 0; i < u.w_count; ++i) w[i] = static_cast<T>(rng.normal() * 0.02);
    }
    return net;
}

/// Intermediate activations recorded by a traced forward pass, in the exact
/// order net_backward pops them. Consumed destructively by net_backward.
template <class T>
struct Trace {
    std::vector<Tensor<T>> saved;
};

template <class T>
Tensor<T> net_forward(const NetParams<T>& net, const Tensor<T>& input, Trace<T>* tr = nullptr) {
    if (input.channels != net.arch.in_channels)
        throw std::invalid_argument("net_forward: expected " +
                                    std::to_string(net.arch.in_channels) + " channels, got " +
                                    std::to_string(input.channels));
    const T eps = T(kNormEps);
    const T* flat = net.flat.data();
    std::map<int, Tensor<T>> stash;
    Tensor<T> cur = input;
    std::size_t unit = 0;
    auto push = [&](const Tensor<T>& t) {
        if (tr) tr->saved.push_back(t);
    };
    for (const LayerDesc& L : net.arch.layers) {
        switch (L.kind) {
            case LayerKind::conv: {
                const ParamSlice& u = net.layout.units[unit++];
                push(cur);
                cur = conv_forward(cur, flat + u.w_off, flat + u.b_off, u.oc, u.geom);
                break;
            }
            case LayerKind::tconv: {
                const ParamSlice& u = net.layout.units[unit++];
                push(cur);
                cur = tconv_forward(cur, flat + u.w_off, flat + u.b_off, u.oc, u.geom);
                break;
            }
            case LayerKind::instance_norm:
                push(cur);
                cur = instance_norm_forward(cur, eps);
                break;
            case LayerKind::leaky_relu:
                push(cur);
                cur = leaky_relu_forward(cur, T(L.slope));
                break;
            case LayerKind::tanh_act:
                cur = tanh_forward(cur);
                push(cur);
                break;
            case LayerKind::sigmoid_act:
                cur = sigmoid_forward(cur);
                push(cur);
                break;
            case LayerKind::resblock: {
                const ParamSlice& u1 = net.layout.units[unit++];
                const ParamSlice& u2 = net.layout.units[unit++];
                Tensor<T> x = cur;
                push(x);
                Tensor<T> h1 = conv_forward(x, flat + u1.w_off, flat + u1.b_off, u1.oc, u1.geom);
                push(h1);
                Tensor<T> act_in = h1;
                if (L.norm) {
                    act_in = instance_norm_forward(h1, eps);
                    push(act_in);
                }
                Tensor<T> a1 = leaky_relu_forward(act_in, T(L.slope));
                push(a1);
                Tensor<T> h2 = conv_forward(a1, flat + u2.w_off, flat + u2.b_off, u2.oc, u2.geom);
                Tensor<T> r = h2;
                if (L.norm) {
                    push(h2);
                    r = instance_norm_forward(h2, eps);
                }
                cur = add_tensors(x, r);
                break;
            }
            case LayerKind::skip_save:
                stash.emplace(L.skip_id, cur);
                break;
            case LayerKind::skip_concat: {
                auto it = stash.find(L.skip_id);
                if (it == stash.end())
                    throw std::logic_error("net_forward: skip id not stashed");
                cur = concat_channels(cur, it->second);
                stash.erase(it);
                break;
            }
        }
    }
    return cur;
}

/// Backpropagates gout through the traced forward pass, accumulating (+=)
/// parameter gradients into gflat (size layout.total) and returning the
/// input gradient. The trace is consumed.
template <class T>
Tensor<T> net_backward(const NetParams<T>& net, Trace<T>& tr, const Tensor<T>& gout, T* gflat) {
    const T eps = T(kNormEps);
    const T* flat = net.flat.data();
    ArchInfo info = analyze_arch(net.arch);
    std::map<int, Tensor<T>> skip_grad;
    Tensor<T> g = gout;
    std::size_t ti = tr.saved.size();
    auto pop = [&]() -> Tensor<T> {
        if (ti == 0) throw std::logic_error("net_backward: trace exhausted");
        return std::move(tr.saved[--ti]);
    };
    std::size_t unit = net.layout.units.size();
    for (std::size_t li = net.arch.layers.size(); li-- > 0;) {
        const LayerDesc& L = net.arch.layers[li];
        switch (L.kind) {
            case LayerKind::conv: {
                const ParamSlice& u = net.layout.units[--unit];
                Tensor<T> in = pop();
                g = conv_backward(in, flat + u.w_off, u.oc, u.geom, g, gflat + u.w_off,
                                  gflat + u.b_off);
                break;
            }
            case LayerKind::tconv: {
                const ParamSlice& u = net.layout.units[--unit];
                Tensor<T> in = pop();
                g = tconv_backward(in, flat + u.w_off, u.oc, u.geom, g, gflat + u.w_off,
                                   gflat + u.b_off);
                break;
            }
            case LayerKind::instance_norm: {
                Tensor<T> in = pop();
                g = instance_norm_backward(in, g, eps);
                break;
            }
            case LayerKind::leaky_relu: {
                Tensor<T> in = pop();
                g = leaky_relu_backward(in, g, T(L.slope));
                break;
            }
            case LayerKind::tanh_act: {
                Tensor<T> out = pop();
                g = tanh_backward(out, g);
                break;
            }
            case LayerKind::sigmoid_act: {
                Tensor<T> out = pop();
                g = sigmoid_backward(out, g);
                break;
            }
            case LayerKind::resblock: {
                const ParamSlice& u2 = net.layout.units[--unit];
                const ParamSlice& u1 = net.layout.units[--unit];
                Tensor<T> gr = g;  // gradient into the residual branch tail
                if (L.norm) {
                    Tensor<T> h2 = pop();
                    gr = instance_norm_backward(h2, gr, eps);
                }
                Tensor<T> a1 = pop();
                Tensor<T> ga = conv_backward(a1, flat + u2.w_off, u2.oc, u2.geom, gr,
                                             gflat + u2.w_off, gflat + u2.b_off);
                if (L.norm) {
                    Tensor<T> n1 = pop();
                    ga = leaky_relu_backward(n1, ga, T(L.slope));
                    Tensor<T> h1 = pop();
                    ga = instance_norm_backward(h1, ga, eps);
                } else {
                    Tensor<T> h1 = pop();
                    ga = leaky_relu_backward(h1, ga, T(L.slope));
                }
                Tensor<T> x = pop();
                Tensor<T> gx = conv_backward(x, flat + u1.w_off, u1.oc, u1.geom, ga,
                                             gflat + u1.w_off, gflat + u1.b_off);
                g = add_tensors(g, gx);
                break;
            }
            case LayerKind::skip_save: {
                auto it = skip_grad.find(L.skip_id);
                if (it == skip_grad.end())
                    throw std::logic_error("net_backward: missing skip gradient");
                g = add_tensors(g, it->second);
                skip_grad.erase(it);
                break;
            }
            case LayerKind::skip_concat: {
                int saved_ch = info.skip_channels.at(L.skip_id);
                Tensor<T> gcur, gsaved;
                split_channels(g, g.channels - saved_ch, gcur, gsaved);
                skip_grad.emplace(L.skip_id, std::move(gsaved));
                g = std::move(gcur);
                break;
            }
        }
    }
    if (ti != 0) throw std::logic_error("net_backward: trace not fully consumed");
    return g;
}

/// Standard-normal noise channel shaped like `like`, seeded by a fixed hash
/// of (global seed, scale, patch origin) so that evaluation order and
/// parallelism never change results.
Volume make_noise(std::uint64_t global_seed, int scale, const std::array<int, 3>& origin,
                  const Volume& like);

/// Whole-image generator on (edge image, noise): both at base size.
Volume lr_generator_forward(const NetParams<float>& p, const Volume& edge_image,
                            const Volume& noise);

/// Patch generator on the conditioning triple (edge patch, upscaled previous
/// scale, noise), all of one patch shape.
Volume hr_generator_forward(const NetParams<float>& p, const Volume& edge_patch,
                            const Volume& lowres_up_patch, const Volume& noise);

/// Realness map in (0,1); channel count must match the architecture.
Volume discriminator_forward(const NetParams<float>& p,
                             const std::vector<const Volume*>& channels);

}  // namespace msgan
