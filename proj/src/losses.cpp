#include "msgan/losses.hpp"

namespace msgan {

GanLossValue gan_losses(const Volume& d_real, const Volume& d_fake) {
    if (d_real.ndim != d_fake.ndim || d_real.shape != d_fake.shape)
        throw std::invalid_argument("gan_losses: realness map shapes differ");
    GanLossValue v;
    double acc_real = 0.0, acc_fake = 0.0, acc_gen = 0.0;
    for (float x : d_real.data) acc_real -= std::log(detail::clamp_prob(x));
    for (float x : d_fake.data) {
        double p = detail::clamp_prob(x);
        acc_fake -= std::log(1.0 - p);
        acc_gen -= std::log(p);
    }
    const double n = static_cast<double>(d_real.data.size());
    v.loss_d = acc_real / n + acc_fake / n;
    v.loss_g = acc_gen / n;
    return v;
}

}  // namespace msgan
