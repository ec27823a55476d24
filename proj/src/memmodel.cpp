#include "msgan/memmodel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>

namespace msgan {

namespace {

LayerDesc conv_l(int ndim, int ic, int oc, int k, int s, int p) {
    LayerDesc L{};
    L.kind = LayerKind::conv;
    L.in_ch = ic;
    L.out_ch = oc;
    L.geom = make_geom(ndim, k, s, p, PadMode::zero);
    return L;
}

LayerDesc tconv_l(int ndim, int ic, int oc, int k, int s, int p) {
    LayerDesc L{};
    L.kind = LayerKind::tconv;
    L.in_ch = ic;
    L.out_ch = oc;
    L.geom = make_geom(ndim, k, s, p, PadMode::zero);
    return L;
}

LayerDesc plain(LayerKind k) {
    LayerDesc L{};
    L.kind = k;
    return L;
}

LayerDesc lrelu(double slope) {
    LayerDesc L{};
    L.kind = LayerKind::leaky_relu;
    L.slope = slope;
    return L;
}

LayerDesc skip_l(LayerKind k, int id) {
    LayerDesc L{};
    L.kind = k;
    L.skip_id = id;
    return L;
}

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::tconv: return "tconv";
        case LayerKind::instance_norm: return "instance_norm";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::tanh_act: return "tanh";
        case LayerKind::sigmoid_act: return "sigmoid";
        case LayerKind::resblock: return "resblock";
        case LayerKind::skip_save: return "skip_save";
        case LayerKind::skip_concat: return "skip_concat";
    }
    return "?";
}

std::array<int, 3> iso_shape(int ndim, int side) {
    std::array<int, 3> sh{1, 1, 1};
    for (int a = 3 - ndim; a < 3; ++a) sh[a] = side;
    return sh;
}

std::size_t spatial_elems(const std::array<int, 3>& sp) {
    return static_cast<std::size_t>(sp[0]) * static_cast<std::size_t>(sp[1]) *
           static_cast<std::size_t>(sp[2]);
}

/// Total parameter floats of layer i (a resblock owns two convolutions).
std::size_t layer_param_floats(const ParamLayout& layout, std::size_t i) {
    if (layout.first_unit[i] < 0) return 0;
    std::size_t begin = static_cast<std::size_t>(layout.first_unit[i]);
    std::size_t end = layout.units.size();
    for (std::size_t j = i + 1; j < layout.first_unit.size(); ++j)
        if (layout.first_unit[j] >= 0) {
            end = static_cast<std::size_t>(layout.first_unit[j]);
            break;
        }
    std::size_t n = 0;
    for (std::size_t u = begin; u < end; ++u)
        n += layout.units[u].w_count + layout.units[u].b_count;
    return n;
}

/// Appends one network's per-layer records; returns its output spatial shape.
std::array<int, 3> append_net(const ArchSpec& a, const std::array<int, 3>& in_sp,
                              const char* prefix, MemoryEstimate& est, std::size_t& net_bytes) {
    const ArchInfo info = analyze_arch(a);
    const std::vector<std::array<int, 3>> shapes = propagate_shapes(a, in_sp);
    const ParamLayout layout = param_layout(a);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        MemLayer rec;
        rec.name = std::string(prefix) + "[" + std::to_string(i) + "] " +
                   kind_name(a.layers[i].kind) + " " + std::to_string(info.in_ch[i]) + "->" +
                   std::to_string(info.out_ch[i]);
        const std::size_t elems =
            static_cast<std::size_t>(info.out_ch[i]) * spatial_elems(shapes[i]);
        rec.activation_bytes = 4 * elems;
        rec.gradient_bytes = 4 * elems;
        const std::size_t pf = layer_param_floats(layout, i);
        rec.parameter_bytes = 4 * pf;
        rec.parameter_gradient_bytes = 4 * pf;
        net_bytes += rec.activation_bytes + rec.gradient_bytes + rec.parameter_bytes +
                     rec.parameter_gradient_bytes;
        est.layers.push_back(std::move(rec));
    }
    return shapes.back();
}

}  // namespace

MemoryEstimate estimate_memory(const ArchSpec& gen, const ArchSpec& disc, int input_side) {
    if (input_side < 1)
        throw std::invalid_argument("estimate_memory: input side must be positive");
    if (gen.ndim != disc.ndim)
        throw std::invalid_argument(
            "estimate_memory: generator and discriminator dimensionalities differ");
    MemoryEstimate est;
    const std::array<int, 3> g_in = iso_shape(gen.ndim, input_side);
    const std::array<int, 3> g_out = append_net(gen, g_in, "gen", est, est.generator_bytes);
    append_net(disc, g_out, "disc", est, est.discriminator_bytes);

    const std::size_t in_elems =
        static_cast<std::size_t>(gen.in_channels) * spatial_elems(g_in);
    const std::size_t out_elems =
        static_cast<std::size_t>(analyze_arch(gen).out_channels) * spatial_elems(g_out);
    est.image_bytes = 4 * (in_elems + out_elems);
    est.total_bytes = est.generator_bytes + est.discriminator_bytes + est.image_bytes;
    return est;
}

MemTemplate mem_template(const std::string& family) {
    MemTemplate t;
    t.name = family;
    const int nd = 3;
    if (family == "dcgan3d") {
        // Transposed-convolution pyramid from a latent seed; mirror-shaped
        // strided discriminator with a full-resolution entry stage.
        t.gen.ndim = nd;
        t.gen.in_channels = 4;
        auto& g = t.gen.layers;
        g.push_back(tconv_l(nd, 4, 16, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(tconv_l(nd, 16, 8, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(tconv_l(nd, 8, 8, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(conv_l(nd, 8, 1, 3, 1, 1));
        g.push_back(plain(LayerKind::tanh_act));
        t.disc.ndim = nd;
        t.disc.in_channels = 1;
        auto& d = t.disc.layers;
        d.push_back(conv_l(nd, 1, 8, 3, 1, 1));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 8, 8, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 8, 16, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 16, 1, 3, 1, 1));
        d.push_back(plain(LayerKind::sigmoid_act));
        t.shrink = 8;
    } else if (family == "pix2pix3d") {
        // Image-to-image U-Net with skip concatenations and a patch
        // discriminator that sees (condition, image) pairs.
        t.gen.ndim = nd;
        t.gen.in_channels = 1;
        auto& g = t.gen.layers;
        g.push_back(conv_l(nd, 1, 8, 3, 1, 1));
        g.push_back(lrelu(0.2));
        g.push_back(skip_l(LayerKind::skip_save, 0));
        g.push_back(conv_l(nd, 8, 16, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.2));
        g.push_back(skip_l(LayerKind::skip_save, 1));
        g.push_back(conv_l(nd, 16, 32, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.2));
        g.push_back(tconv_l(nd, 32, 16, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.2));
        g.push_back(skip_l(LayerKind::skip_concat, 1));
        g.push_back(tconv_l(nd, 32, 8, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.2));
        g.push_back(skip_l(LayerKind::skip_concat, 0));
        g.push_back(conv_l(nd, 16, 1, 3, 1, 1));
        g.push_back(plain(LayerKind::tanh_act));
        t.disc.ndim = nd;
        t.disc.in_channels = 2;
        auto& d = t.disc.layers;
        d.push_back(conv_l(nd, 2, 8, 3, 1, 1));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 8, 16, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 16, 32, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 32, 1, 3, 1, 1));
        d.push_back(plain(LayerKind::sigmoid_act));
        t.shrink = 1;
    } else if (family == "pggan3d") {
        // Deeper progressive-style pyramid: the final-resolution
        // configuration grown from a small seed.
        t.gen.ndim = nd;
        t.gen.in_channels = 8;
        auto& g = t.gen.layers;
        g.push_back(tconv_l(nd, 8, 16, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(tconv_l(nd, 16, 16, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(tconv_l(nd, 16, 8, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(tconv_l(nd, 8, 8, 4, 2, 1));
        g.push_back(plain(LayerKind::instance_norm));
        g.push_back(lrelu(0.0));
        g.push_back(conv_l(nd, 8, 1, 3, 1, 1));
        g.push_back(plain(LayerKind::tanh_act));
        t.disc.ndim = nd;
        t.disc.in_channels = 1;
        auto& d = t.disc.layers;
        d.push_back(conv_l(nd, 1, 8, 3, 1, 1));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 8, 8, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 8, 16, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 16, 16, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 16, 16, 4, 2, 1));
        d.push_back(plain(LayerKind::instance_norm));
        d.push_back(lrelu(0.2));
        d.push_back(conv_l(nd, 16, 1, 3, 1, 1));
        d.push_back(plain(LayerKind::sigmoid_act));
        t.shrink = 16;
    } else if (family == "lr") {
        // Whole-image network: always trained at its fixed base resolution.
        t.gen = lr_generator_arch(nd);
        t.disc = discriminator_arch(nd, 2);
        t.fixed_side = 64;
    } else if (family == "hr") {
        // Patch network: always trained on fixed-size patches.
        t.gen = hr_generator_arch(nd);
        t.disc = discriminator_arch(nd, 3);
        t.fixed_side = 32;
    } else {
        throw std::invalid_argument("unknown memory template '" + family +
                                    "' (expected dcgan3d, pix2pix3d, pggan3d, lr, or hr)");
    }
    validate_arch(t.gen);
    validate_arch(t.disc);
    return t;
}

std::vector<std::string> mem_template_names() {
    return {"dcgan3d", "pix2pix3d", "pggan3d", "lr", "hr"};
}

std::vector<SweepRow> sweep_sizes(const std::string& family, std::vector<int> sides) {
    const MemTemplate t = mem_template(family);
    std::sort(sides.begin(), sides.end());
    std::vector<SweepRow> rows;
    rows.reserve(sides.size());
    for (int side : sides) {
        if (side < 1)
            throw std::invalid_argument("sweep_sizes: sides must be positive");
        int input_side = side;
        if (t.fixed_side > 0) {
            input_side = t.fixed_side;
        } else if (t.shrink > 1) {
            if (side % t.shrink != 0)
                throw std::invalid_argument("sweep_sizes: side " + std::to_string(side) +
                                            " is incompatible with template '" + family +
                                            "' (needs a multiple of " +
                                            std::to_string(t.shrink) + ")");
            input_side = side / t.shrink;
        }
        rows.push_back({side, estimate_memory(t.gen, t.disc, input_side).total_bytes});
    }
    return rows;
}

std::string sweep_csv(const std::string& family, const std::vector<SweepRow>& rows) {
    std::string out = "side,template,bytes\n";
    for (const SweepRow& r : rows)
        out += std::to_string(r.side) + "," + family + "," + std::to_string(r.bytes) + "\n";
    return out;
}

CubicFit cubic_fit(const std::vector<std::pair<double, double>>& points) {
    std::set<double> distinct;
    double scale = 0.0;
    for (const auto& p : points) {
        distinct.insert(p.first);
        scale = std::max(scale, std::abs(p.first));
    }
    if (distinct.size() < 4)
        throw std::invalid_argument("cubic_fit: need at least 4 distinct abscissae, got " +
                                    std::to_string(distinct.size()));
    // Normal equations on the basis {u^3, u^2, u, 1} with u = s / max|s|;
    // the rescaled basis keeps the system well conditioned for large sides,
    // and the coefficients map back exactly to the {s^3, s^2, s, 1} basis.
    const long double S = scale;
    long double m[4][5] = {};
    for (const auto& p : points) {
        const long double u = p.first / S;
        const long double y = p.second;
        const long double b[4] = {u * u * u, u * u, u, 1.0L};
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) m[i][j] += b[i] * b[j];
            m[i][4] += b[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (m[piv][col] == 0.0L)
            throw std::invalid_argument("cubic_fit: rank-deficient system");
        if (piv != col)
            for (int j = 0; j < 5; ++j) std::swap(m[piv][j], m[col][j]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const long double f = m[r][col] / m[col][col];
            for (int j = col; j < 5; ++j) m[r][j] -= f * m[col][j];
        }
    }
    CubicFit fit;
    fit.a3 = static_cast<double>(m[0][4] / m[0][0] / (S * S * S));
    fit.a2 = static_cast<double>(m[1][4] / m[1][1] / (S * S));
    fit.a1 = static_cast<double>(m[2][4] / m[2][2] / S);
    fit.a0 = static_cast<double>(m[3][4] / m[3][3]);
    long double rss = 0.0L;
    for (const auto& p : points) {
        const long double s = p.first;
        const long double r =
            ((static_cast<long double>(fit.a3) * s + fit.a2) * s + fit.a1) * s + fit.a0 -
            p.second;
        rss += r * r;
    }
    fit.residual = static_cast<double>(std::sqrt(static_cast<double>(rss)));
    return fit;
}

double extrapolate(const CubicFit& fit, double s) {
    return ((fit.a3 * s + fit.a2) * s + fit.a1) * s + fit.a0;
}

}  // namespace msgan
