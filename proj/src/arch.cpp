#include "msgan/arch.hpp"

#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace msgan {

namespace {

void check_geom_matches_ndim(const ConvGeom& g, int ndim, const char* what) {
    if (ndim == 2 && (g.k[0] != 1 || g.s[0] != 1 || g.p[0] != 0))
        throw std::invalid_argument(std::string(what) + ": depth axis must be degenerate for 2D");
    for (int a = 0; a < 3; ++a) {
        if (g.k[a] < 1 || g.s[a] < 1 || g.p[a] < 0)
            throw std::invalid_argument(std::string(what) + ": non-positive kernel or stride");
        if (g.p[a] >= g.k[a] && !(a == 0 && g.k[a] == 1 && g.p[a] == 0))
            throw std::invalid_argument(std::string(what) + ": padding must be smaller than kernel");
    }
}

}  // namespace

ArchInfo analyze_arch(const ArchSpec& a) {
    if (a.ndim != 2 && a.ndim != 3) throw std::invalid_argument("arch: ndim must be 2 or 3");
    if (a.in_channels <= 0) throw std::invalid_argument("arch: in_channels must be positive");
    if (a.layers.empty()) throw std::invalid_argument("arch: no layers");
    ArchInfo info;
    info.in_ch.reserve(a.layers.size());
    info.out_ch.reserve(a.layers.size());
    std::map<int, int> open;  // skip id -> channels, awaiting concat
    int cur = a.in_channels;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const LayerDesc& L = a.layers[i];
        info.in_ch.push_back(cur);
        switch (L.kind) {
            case LayerKind::conv:
            case LayerKind::tconv:
                check_geom_matches_ndim(L.geom, a.ndim,
                                        L.kind == LayerKind::conv ? "conv" : "tconv");
                if (L.in_ch != cur)
                    throw std::invalid_argument("arch: layer " + std::to_string(i) + " expects " +
                                                std::to_string(L.in_ch) + " channels but gets " +
                                                std::to_string(cur));
                if (L.out_ch <= 0) throw std::invalid_argument("arch: non-positive out channels");
                cur = L.out_ch;
                break;
            case LayerKind::resblock:
                check_geom_matches_ndim(L.geom, a.ndim, "resblock");
                if (L.geom.s != std::array<int, 3>{1, 1, 1})
                    throw std::invalid_argument("arch: resblock stride must be 1");
                if (L.in_ch != cur)
                    throw std::invalid_argument("arch: resblock channel mismatch at layer " +
                                                std::to_string(i));
                break;
            case LayerKind::instance_norm:
            case LayerKind::leaky_relu:
            case LayerKind::tanh_act:
            case LayerKind::sigmoid_act:
                break;
            case LayerKind::skip_save:
                if (open.count(L.skip_id))
                    throw std::invalid_argument("arch: skip id " + std::to_string(L.skip_id) +
                                                " saved twice");
                open[L.skip_id] = cur;
                info.skip_channels[L.skip_id] = cur;
                break;
            case LayerKind::skip_concat: {
                auto it = open.find(L.skip_id);
                if (it == open.end())
                    throw std::invalid_argument("arch: skip id " + std::to_string(L.skip_id) +
                                                " concatenated without a save");
                cur += it->second;
                open.erase(it);
                break;
            }
        }
        info.out_ch.push_back(cur);
    }
    if (!open.empty())
        throw std::invalid_argument("arch: skip id " + std::to_string(open.begin()->first) +
                                    " saved but never concatenated");
    info.out_channels = cur;
    return info;
}

std::vector<std::array<int, 3>> propagate_shapes(const ArchSpec& a,
                                                 const std::array<int, 3>& in_sp) {
    validate_arch(a);
    std::vector<std::array<int, 3>> out;
    out.reserve(a.layers.size());
    std::map<int, std::array<int, 3>> saved;
    std::array<int, 3> cur = in_sp;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const LayerDesc& L = a.layers[i];
        switch (L.kind) {
            case LayerKind::conv:
                cur = conv_out_shape(cur, L.geom);
                break;
            case LayerKind::tconv:
                cur = tconv_out_shape(cur, L.geom);
                break;
            case LayerKind::resblock:
                if (conv_out_shape(cur, L.geom) != cur)
                    throw std::invalid_argument("arch: resblock geometry does not preserve shape");
                break;
            case LayerKind::skip_save:
                saved[L.skip_id] = cur;
                break;
            case LayerKind::skip_concat:
                if (saved.at(L.skip_id) != cur)
                    throw std::invalid_argument(
                        "arch: skip concat joins mismatched spatial shapes at layer " +
                        std::to_string(i));
                break;
            default:
                break;
        }
        out.push_back(cur);
    }
    return out;
}

ParamLayout param_layout(const ArchSpec& a) {
    ArchInfo info = analyze_arch(a);
    ParamLayout lay;
    lay.first_unit.assign(a.layers.size(), -1);
    std::size_t off = 0;
    auto add_unit = [&](int ic, int oc, const ConvGeom& g, bool transposed) {
        ParamSlice s;
        s.ic = ic;
        s.oc = oc;
        s.geom = g;
        s.transposed = transposed;
        s.w_off = off;
        s.w_count = static_cast<std::size_t>(ic) * oc * g.k[0] * g.k[1] * g.k[2];
        off += s.w_count;
        s.b_off = off;
        s.b_count = static_cast<std::size_t>(oc);
        off += s.b_count;
        lay.units.push_back(s);
    };
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const LayerDesc& L = a.layers[i];
        if (L.kind == LayerKind::conv || L.kind == LayerKind::tconv) {
            lay.first_unit[i] = static_cast<int>(lay.units.size());
            add_unit(info.in_ch[i], L.out_ch, L.geom, L.kind == LayerKind::tconv);
        } else if (L.kind == LayerKind::resblock) {
            lay.first_unit[i] = static_cast<int>(lay.units.size());
            add_unit(info.in_ch[i], info.in_ch[i], L.geom, false);
            add_unit(info.in_ch[i], info.in_ch[i], L.geom, false);
        }
    }
    lay.total = off;
    return lay;
}

std::array<int, 3> compute_receptive_field(const ArchSpec& a) {
    validate_arch(a);
    std::array<int, 3> rf{1, 1, 1};
    for (const LayerDesc& L : a.layers) {
        switch (L.kind) {
            case LayerKind::conv:
                if (L.geom.s != std::array<int, 3>{1, 1, 1})
                    throw std::invalid_argument(
                        "receptive field: defined only for stride-1 architectures");
                for (int x = 0; x < 3; ++x) rf[x] += L.geom.k[x] - 1;
                break;
            case LayerKind::resblock:
                if (L.norm)
                    throw std::invalid_argument(
                        "receptive field: normalization has global support");
                for (int x = 0; x < 3; ++x) rf[x] += 2 * (L.geom.k[x] - 1);
                break;
            case LayerKind::leaky_relu:
            case LayerKind::tanh_act:
            case LayerKind::sigmoid_act:
                break;
            case LayerKind::tconv:
                throw std::invalid_argument(
                    "receptive field: transposed convolutions change resolution");
            case LayerKind::instance_norm:
                throw std::invalid_argument("receptive field: normalization has global support");
            case LayerKind::skip_save:
            case LayerKind::skip_concat:
                throw std::invalid_argument("receptive field: skip topologies unsupported");
        }
    }
    return rf;
}

int trim_margin(const ArchSpec& a) {
    std::array<int, 3> rf = compute_receptive_field(a);
    int first = a.ndim == 3 ? 0 : 1;
    for (int x = first + 1; x < 3; ++x)
        if (rf[x] != rf[first])
            throw std::invalid_argument("trim margin: receptive field is anisotropic");
    if (rf[first] % 2 == 0) throw std::invalid_argument("trim margin: receptive field is even");
    return (rf[first] - 1) / 2;
}

namespace {

const char* pad_name(PadMode m) { return m == PadMode::zero ? "zero" : "reflect"; }

PadMode pad_from(const std::string& s) {
    if (s == "zero") return PadMode::zero;
    if (s == "reflect") return PadMode::reflect;
    throw std::invalid_argument("arch: unknown padding mode '" + s + "'");
}

int active_scalar(const ConvGeom& g, int ndim, const std::array<int, 3>& v, const char* what) {
    (void)g;
    int first = ndim == 3 ? 0 : 1;
    for (int x = first + 1; x < 3; ++x)
        if (v[x] != v[first])
            throw std::invalid_argument(std::string("arch: anisotropic ") + what +
                                        " cannot be serialized");
    return v[first];
}

std::string format_slope(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string arch_to_text(const ArchSpec& a, const std::string& prefix) {
    validate_arch(a);
    std::ostringstream os;
    os << prefix << "ndim = " << a.ndim << "\n";
    os << prefix << "in_channels = " << a.in_channels << "\n";
    os << prefix << "layers = " << a.layers.size() << "\n";
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const LayerDesc& L = a.layers[i];
        os << prefix << "layer_" << i << " = ";
        switch (L.kind) {
            case LayerKind::conv:
            case LayerKind::tconv:
                os << (L.kind == LayerKind::conv ? "conv" : "tconv") << " in " << L.in_ch
                   << " out " << L.out_ch << " k "
                   << active_scalar(L.geom, a.ndim, L.geom.k, "kernel") << " s "
                   << active_scalar(L.geom, a.ndim, L.geom.s, "stride") << " p "
                   << active_scalar(L.geom, a.ndim, L.geom.p, "padding") << " pad "
                   << pad_name(L.geom.mode);
                break;
            case LayerKind::instance_norm:
                os << "instance_norm";
                break;
            case LayerKind::leaky_relu:
                os << "leaky_relu slope " << format_slope(L.slope);
                break;
            case LayerKind::tanh_act:
                os << "tanh";
                break;
            case LayerKind::sigmoid_act:
                os << "sigmoid";
                break;
            case LayerKind::resblock:
                os << "resblock ch " << L.in_ch << " k "
                   << active_scalar(L.geom, a.ndim, L.geom.k, "kernel") << " p "
                   << active_scalar(L.geom, a.ndim, L.geom.p, "padding") << " pad "
                   << pad_name(L.geom.mode) << " norm " << (L.norm ? 1 : 0);
                break;
            case LayerKind::skip_save:
                os << "skip_save id " << L.skip_id;
                break;
            case LayerKind::skip_concat:
                os << "skip_concat id " << L.skip_id;
                break;
        }
        os << "\n";
    }
    return os.str();
}

namespace {

long parse_long(const std::string& s, const std::string& what) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument("arch: bad integer for " + what + ": '" + s + "'");
    return v;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("arch: missing key '" + key + "'");
    return it->second;
}

// Tokenized layer value: "<kind> [field value]...".
std::map<std::string, std::string> parse_fields(std::istringstream& is, const std::string& kind) {
    std::map<std::string, std::string> f;
    std::string key, val;
    while (is >> key) {
        if (!(is >> val))
            throw std::invalid_argument("arch: dangling field '" + key + "' in " + kind);
        if (!f.emplace(key, val).second)
            throw std::invalid_argument("arch: duplicate field '" + key + "' in " + kind);
    }
    return f;
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& name,
                         const std::string& kind) {
    auto it = f.find(name);
    if (it == f.end())
        throw std::invalid_argument("arch: " + kind + " is missing field '" + name + "'");
    return it->second;
}

void reject_extras(const std::map<std::string, std::string>& f, const std::set<std::string>& known,
                   const std::string& kind) {
    for (const auto& [k, v] : f)
        if (!known.count(k))
            throw std::invalid_argument("arch: unknown field '" + k + "' in " + kind);
}

}  // namespace

ArchSpec arch_from_kv(const std::map<std::string, std::string>& kv, const std::string& prefix) {
    ArchSpec a;
    a.ndim = static_cast<int>(parse_long(require(kv, prefix + "ndim"), "ndim"));
    a.in_channels = static_cast<int>(parse_long(require(kv, prefix + "in_channels"), "in_channels"));
    long n = parse_long(require(kv, prefix + "layers"), "layers");
    if (n <= 0 || n > 10000) throw std::invalid_argument("arch: implausible layer count");
    for (long i = 0; i < n; ++i) {
        std::istringstream is(require(kv, prefix + "layer_" + std::to_string(i)));
        std::string kind;
        if (!(is >> kind)) throw std::invalid_argument("arch: empty layer descriptor");
        LayerDesc L{};
        if (kind == "conv" || kind == "tconv") {
            L.kind = kind == "conv" ? LayerKind::conv : LayerKind::tconv;
            auto f = parse_fields(is, kind);
            reject_extras(f, {"in", "out", "k", "s", "p", "pad"}, kind);
            L.in_ch = static_cast<int>(parse_long(field(f, "in", kind), "in"));
            L.out_ch = static_cast<int>(parse_long(field(f, "out", kind), "out"));
            L.geom = make_geom(a.ndim, static_cast<int>(parse_long(field(f, "k", kind), "k")),
                               static_cast<int>(parse_long(field(f, "s", kind), "s")),
                               static_cast<int>(parse_long(field(f, "p", kind), "p")),
                               pad_from(field(f, "pad", kind)));
        } else if (kind == "instance_norm") {
            L.kind = LayerKind::instance_norm;
            parse_fields(is, kind);
        } else if (kind == "leaky_relu") {
            L.kind = LayerKind::leaky_relu;
            auto f = parse_fields(is, kind);
            reject_extras(f, {"slope"}, kind);
            L.slope = std::stod(field(f, "slope", kind));
        } else if (kind == "tanh") {
            L.kind = LayerKind::tanh_act;
        } else if (kind == "sigmoid") {
            L.kind = LayerKind::sigmoid_act;
        } else if (kind == "resblock") {
            L.kind = LayerKind::resblock;
            auto f = parse_fields(is, kind);
            reject_extras(f, {"ch", "k", "p", "pad", "norm"}, kind);
            L.in_ch = static_cast<int>(parse_long(field(f, "ch", kind), "ch"));
            L.out_ch = L.in_ch;
            L.geom = make_geom(a.ndim, static_cast<int>(parse_long(field(f, "k", kind), "k")), 1,
                               static_cast<int>(parse_long(field(f, "p", kind), "p")),
                               pad_from(field(f, "pad", kind)));
            L.norm = parse_long(field(f, "norm", kind), "norm") != 0;
        } else if (kind == "skip_save" || kind == "skip_concat") {
            L.kind = kind == "skip_save" ? LayerKind::skip_save : LayerKind::skip_concat;
            auto f = parse_fields(is, kind);
            reject_extras(f, {"id"}, kind);
            L.skip_id = static_cast<int>(parse_long(field(f, "id", kind), "id"));
        } else {
            throw std::invalid_argument("arch: unknown layer kind '" + kind + "'");
        }
        a.layers.push_back(L);
    }
    validate_arch(a);
    return a;
}

ConvGeom make_geom(int ndim, int k, int s, int p, PadMode mode) {
    if (ndim != 2 && ndim != 3) throw std::invalid_argument("make_geom: ndim must be 2 or 3");
    ConvGeom g;
    g.k = {ndim == 3 ? k : 1, k, k};
    g.s = {ndim == 3 ? s : 1, s, s};
    g.p = {ndim == 3 ? p : 0, p, p};
    g.mode = mode;
    return g;
}

namespace {

LayerDesc conv_l(int ndim, int ic, int oc, int k, int s, int p, PadMode m) {
    LayerDesc L{};
    L.kind = LayerKind::conv;
    L.in_ch = ic;
    L.out_ch = oc;
    L.geom = make_geom(ndim, k, s, p, m);
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

LayerDesc skip_l(LayerKind k, int id) {
    LayerDesc L{};
    L.kind = k;
    L.skip_id = id;
    return L;
}

}  // namespace

ArchSpec lr_generator_arch(int ndim) {
    ArchSpec a;
    a.ndim = ndim;
    a.in_channels = 2;
    auto& ls = a.layers;
    int ch[5] = {2, 32, 64, 128, 256};
    for (int lvl = 0; lvl < 4; ++lvl) {
        ls.push_back(conv_l(ndim, ch[lvl], ch[lvl + 1], 4, 2, 1, PadMode::zero));
        ls.push_back(plain(LayerKind::instance_norm));
        ls.push_back(plain(LayerKind::leaky_relu));
        if (lvl < 3) ls.push_back(skip_l(LayerKind::skip_save, lvl));
    }
    ls.push_back(tconv_l(ndim, 256, 128, 4, 2, 1));
    ls.push_back(plain(LayerKind::instance_norm));
    ls.push_back(plain(LayerKind::leaky_relu));
    ls.push_back(skip_l(LayerKind::skip_concat, 2));
    ls.push_back(tconv_l(ndim, 256, 64, 4, 2, 1));
    ls.push_back(plain(LayerKind::instance_norm));
    ls.push_back(plain(LayerKind::leaky_relu));
    ls.push_back(skip_l(LayerKind::skip_concat, 1));
    ls.push_back(tconv_l(ndim, 128, 32, 4, 2, 1));
    ls.push_back(plain(LayerKind::instance_norm));
    ls.push_back(plain(LayerKind::leaky_relu));
    ls.push_back(skip_l(LayerKind::skip_concat, 0));
    ls.push_back(tconv_l(ndim, 64, 1, 4, 2, 1));
    ls.push_back(plain(LayerKind::tanh_act));
    validate_arch(a);
    return a;
}

ArchSpec hr_generator_arch(int ndim, int in_channels) {
    if (in_channels < 1) throw std::invalid_argument("hr_generator_arch: in_channels must be positive");
    ArchSpec a;
    a.ndim = ndim;
    a.in_channels = in_channels;
    auto& ls = a.layers;
    ls.push_back(conv_l(ndim, in_channels, 32, 7, 1, 3, PadMode::reflect));
    ls.push_back(plain(LayerKind::leaky_relu));
    for (int i = 0; i < 2; ++i) {
        LayerDesc L{};
        L.kind = LayerKind::resblock;
        L.in_ch = 32;
        L.out_ch = 32;
        L.geom = make_geom(ndim, 3, 1, 1, PadMode::reflect);
        L.norm = false;
        ls.push_back(L);
    }
    ls.push_back(conv_l(ndim, 32, 1, 3, 1, 1, PadMode::reflect));
    ls.push_back(plain(LayerKind::tanh_act));
    validate_arch(a);
    return a;
}

ArchSpec discriminator_arch(int ndim, int in_channels) {
    ArchSpec a;
    a.ndim = ndim;
    a.in_channels = in_channels;
    auto& ls = a.layers;
    int ch[5] = {in_channels, 32, 64, 128, 256};
    for (int lvl = 0; lvl < 4; ++lvl) {
        ls.push_back(conv_l(ndim, ch[lvl], ch[lvl + 1], 4, 2, 1, PadMode::zero));
        if (lvl > 0) ls.push_back(plain(LayerKind::instance_norm));
        ls.push_back(plain(LayerKind::leaky_relu));
    }
    ls.push_back(conv_l(ndim, 256, 1, 3, 1, 1, PadMode::zero));
    ls.push_back(plain(LayerKind::sigmoid_act));
    validate_arch(a);
    return a;
}

}  // namespace msgan
