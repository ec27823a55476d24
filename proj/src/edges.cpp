#include "msgan/edges.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "msgan/resample.hpp"

namespace msgan {

namespace {

// Response of the 3-tap kernel along logical `axis`: taps[o+1] at offset o.
std::vector<double> pass_axis(const std::vector<double>& src, const std::array<int, 3>& ls,
                              int axis, const double taps[3]) {
    std::vector<double> out(src.size());
    const std::size_t syx = static_cast<std::size_t>(ls[1]) * ls[2];
    for (int z = 0; z < ls[0]; ++z)
        for (int y = 0; y < ls[1]; ++y)
            for (int x = 0; x < ls[2]; ++x) {
                int base[3] = {z, y, x};
                double acc = 0.0;
                for (int o = -1; o <= 1; ++o) {
                    int cc[3] = {z, y, x};
                    cc[axis] = reflect_index(base[axis] + o, ls[axis]);
                    acc += taps[o + 1] *
                           src[cc[0] * syx + static_cast<std::size_t>(cc[1]) * ls[2] + cc[2]];
                }
                out[z * syx + static_cast<std::size_t>(y) * ls[2] + x] = acc;
            }
    return out;
}

}  // namespace

Volume sobel_magnitude(const Volume& v) {
    static const double deriv[3] = {-1.0, 0.0, 1.0};
    static const double smooth[3] = {1.0, 2.0, 1.0};
    auto ls = logical_shape(v);
    std::vector<double> base(v.data.begin(), v.data.end());
    std::vector<double> mag2(v.data.size(), 0.0);
    const int first_axis = v.ndim == 3 ? 0 : 1;
    for (int da = first_axis; da < 3; ++da) {
        std::vector<double> resp = pass_axis(base, ls, da, deriv);
        for (int other = first_axis; other < 3; ++other)
            if (other != da) resp = pass_axis(resp, ls, other, smooth);
        for (std::size_t i = 0; i < mag2.size(); ++i) mag2[i] += resp[i] * resp[i];
    }
    Volume out(v.ndim, v.shape);
    out.spacing = v.spacing;
    for (std::size_t i = 0; i < mag2.size(); ++i)
        out.data[i] = static_cast<float>(std::sqrt(mag2[i]));
    return out;
}

Volume extract_edges(const Volume& v, const EdgeConfig& cfg) {
    if (!(cfg.percentile > 0.0 && cfg.percentile < 100.0))
        throw std::invalid_argument("extract_edges: percentile must be inside (0, 100)");
    Volume mag = sobel_magnitude(v);
    std::vector<float> nonzero;
    nonzero.reserve(mag.data.size());
    for (float m : mag.data)
        if (m > 0.0f) nonzero.push_back(m);

    Volume out(v.ndim, v.shape);
    out.spacing = v.spacing;
    if (nonzero.empty()) return out;

    // Nearest-rank percentile over the nonzero magnitudes.
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(cfg.percentile / 100.0 * static_cast<double>(nonzero.size())));
    if (rank == 0) rank = 1;
    std::nth_element(nonzero.begin(), nonzero.begin() + (rank - 1), nonzero.end());
    float thr = nonzero[rank - 1];
    for (std::size_t i = 0; i < mag.data.size(); ++i)
        out.data[i] = mag.data[i] >= thr ? 1.0f : 0.0f;
    return out;
}

}  // namespace msgan
