#include "msgan/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msgan {

Volume downsample2(const Volume& v) {
    for (int a = 0; a < v.ndim; ++a)
        if (v.shape[a] % 2 != 0)
            throw std::invalid_argument("downsample2: axis " + std::to_string(a) + " extent " +
                                        std::to_string(v.shape[a]) + " is odd");
    std::array<int, 3> half = v.shape;
    for (int a = 0; a < v.ndim; ++a) half[a] /= 2;
    Volume out(v.ndim, half);
    out.spacing = v.spacing;
    for (int a = 0; a < v.ndim; ++a) out.spacing[a] *= 2.0;

    auto ls = logical_shape(v);
    auto lo = logical_shape(out);
    const int bz = v.ndim == 3 ? 2 : 1;  // block extent along the slowest logical axis
    const double inv = 1.0 / (bz * 4);
    const float* src = v.data.data();
    float* dst = out.data.data();
    const std::size_t syx = static_cast<std::size_t>(ls[1]) * ls[2];
    for (int oz = 0; oz < lo[0]; ++oz)
        for (int oy = 0; oy < lo[1]; ++oy)
            for (int ox = 0; ox < lo[2]; ++ox) {
                double sum = 0.0;
                for (int dz = 0; dz < bz; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            sum += src[(oz * bz + dz) * syx +
                                       static_cast<std::size_t>(oy * 2 + dy) * ls[2] +
                                       (ox * 2 + dx)];
                dst[(static_cast<std::size_t>(oz) * lo[1] + oy) * lo[2] + ox] =
                    static_cast<float>(sum * inv);
            }
    return out;
}

float upsample2_at(const Volume& v, const std::array<int, 3>& c) {
    int lo[3], hi[3];
    double whi[3];
    for (int a = 0; a < v.ndim; ++a) {
        double s = 0.5 * c[a] - 0.25;
        double f = std::floor(s);
        int i0 = static_cast<int>(f);
        int n = v.shape[a];
        lo[a] = std::clamp(i0, 0, n - 1);
        hi[a] = std::clamp(i0 + 1, 0, n - 1);
        whi[a] = s - f;  // exactly 0.25 or 0.75
    }
    double acc = 0.0;
    const int corners = 1 << v.ndim;
    for (int m = 0; m < corners; ++m) {
        std::array<int, 3> cc{0, 0, 0};
        double w = 1.0;
        for (int a = 0; a < v.ndim; ++a) {
            if ((m >> a) & 1) {
                cc[a] = hi[a];
                w *= whi[a];
            } else {
                cc[a] = lo[a];
                w *= 1.0 - whi[a];
            }
        }
        acc += w * v.at(cc);
    }
    return static_cast<float>(acc);
}

Volume upsample2(const Volume& v) {
    std::array<int, 3> dbl = v.shape;
    for (int a = 0; a < v.ndim; ++a) dbl[a] *= 2;
    Volume out(v.ndim, dbl);
    out.spacing = v.spacing;
    for (int a = 0; a < v.ndim; ++a) out.spacing[a] *= 0.5;

    auto lo = logical_shape(out);
    std::size_t idx = 0;
    std::array<int, 3> c{0, 0, 0};
    for (int z = 0; z < lo[0]; ++z)
        for (int y = 0; y < lo[1]; ++y)
            for (int x = 0; x < lo[2]; ++x) {
                if (v.ndim == 3)
                    c = {z, y, x};
                else
                    c = {y, x, 0};
                out.data[idx++] = upsample2_at(v, c);
            }
    return out;
}

}  // namespace msgan
