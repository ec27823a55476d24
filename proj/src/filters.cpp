#include "msgan/filters.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "msgan/resample.hpp"

namespace msgan {

namespace {

// One 1D convolution pass along logical axis `axis` with mirror boundary.
Volume convolve_axis(const Volume& v, int axis, const std::vector<double>& kernel, int radius) {
    Volume out(v.ndim, v.shape);
    out.spacing = v.spacing;
    auto ls = logical_shape(v);
    const std::size_t syx = static_cast<std::size_t>(ls[1]) * ls[2];
    const int n = ls[axis];
    for (int z = 0; z < ls[0]; ++z)
        for (int y = 0; y < ls[1]; ++y)
            for (int x = 0; x < ls[2]; ++x) {
                int c[3] = {z, y, x};
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    int cc[3] = {z, y, x};
                    cc[axis] = reflect_index(c[axis] + k, n);
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           v.data[cc[0] * syx + static_cast<std::size_t>(cc[1]) * ls[2] + cc[2]];
                }
                out.data[z * syx + static_cast<std::size_t>(y) * ls[2] + x] =
                    static_cast<float>(acc);
            }
    return out;
}

}  // namespace

Volume gaussian_blur(const Volume& v, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be positive");
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;

    Volume out = v;
    const int first_axis = v.ndim == 3 ? 0 : 1;
    for (int axis = first_axis; axis < 3; ++axis) out = convolve_axis(out, axis, kernel, radius);
    return out;
}

}  // namespace msgan
