#pragma once

#include <cmath>
#include <stdexcept>

#include "msgan/tensor.hpp"
#include "msgan/volume.hpp"

// Adversarial losses on realness maps. Probabilities are clamped to
// [eps, 1-eps] before the logarithm; accumulation runs in double.
// The generator loss is the non-saturating -mean log D(fake).

namespace msgan {

inline constexpr double kProbEps = 1e-7;

struct GanLossValue {
    double loss_d = 0.0;
    double loss_g = 0.0;
};

/// loss_d = -mean(log d_real) - mean(log(1 - d_fake)); loss_g = -mean(log d_fake).
GanLossValue gan_losses(const Volume& d_real, const Volume& d_fake);

namespace detail {
template <class T>
double clamp_prob(T v) {
    double d = static_cast<double>(v);
    if (d < kProbEps) return kProbEps;
    if (d > 1.0 - kProbEps) return 1.0 - kProbEps;
    return d;
}
}  // namespace detail

/// Discriminator loss with gradients with respect to both realness maps.
/// Gradients are the analytic derivatives evaluated at the clamped
/// probabilities; chained through the sigmoid they stay bounded.
template <class T>
struct DLossGrad {
    double loss = 0.0;
    Tensor<T> g_real, g_fake;
};

template <class T>
DLossGrad<T> d_loss_grad(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
    if (!d_real.same_shape(d_fake))
        throw std::invalid_argument("d_loss_grad: realness map shapes differ");
    DLossGrad<T> r;
    r.g_real = Tensor<T>(d_real.channels, d_real.sp);
    r.g_fake = Tensor<T>(d_fake.channels, d_fake.sp);
    const double n = static_cast<double>(d_real.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < d_real.numel(); ++i) {
        double p = detail::clamp_prob(d_real.data[i]);
        acc -= std::log(p);
        r.g_real.data[i] = static_cast<T>(-1.0 / (n * p));
    }
    for (std::size_t i = 0; i < d_fake.numel(); ++i) {
        double p = detail::clamp_prob(d_fake.data[i]);
        acc -= std::log(1.0 - p);
        r.g_fake.data[i] = static_cast<T>(1.0 / (n * (1.0 - p)));
    }
    r.loss = acc / n;
    return r;
}

template <class T>
struct GLossGrad {
    double loss = 0.0;
    Tensor<T> g_fake;
};

template <class T>
GLossGrad<T> g_loss_grad(const Tensor<T>& d_fake) {
    GLossGrad<T> r;
    r.g_fake = Tensor<T>(d_fake.channels, d_fake.sp);
    const double n = static_cast<double>(d_fake.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < d_fake.numel(); ++i) {
        double p = detail::clamp_prob(d_fake.data[i]);
        acc -= std::log(p);
        r.g_fake.data[i] = static_cast<T>(-1.0 / (n * p));
    }
    r.loss = acc / n;
    return r;
}

/// Mean absolute difference with its subgradient (sign/n, 0 at ties).
template <class T>
struct PixelLossGrad {
    double loss = 0.0;
    Tensor<T> g;
};

template <class T>
PixelLossGrad<T> l1_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss_grad: shapes differ");
    PixelLossGrad<T> r;
    r.g = Tensor<T>(pred.channels, pred.sp);
    const double n = static_cast<double>(pred.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        acc += std::abs(d);
        r.g.data[i] = static_cast<T>(d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0));
    }
    r.loss = acc / n;
    return r;
}

}  // namespace msgan
