#include "msgan/synthdata.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "msgan/filters.hpp"
#include "msgan/ndimg.hpp"
#include "msgan/rng.hpp"

namespace msgan {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBackground = -0.6;
constexpr int kTextureModes = 6;
constexpr double kTextureStd = 0.03;
constexpr double kEdgeWidthVoxMin = 1.3;   // logistic transition floor, voxels
constexpr double kEdgeWidthSlope = 0.012;  // transition width as fraction of side
constexpr double kSharpenAmount = 0.15;
constexpr double kNoiseStd = 0.002;
constexpr double kSigmaSharp = 0.8;   // voxels
constexpr double kSigmaSmooth = 0.45;  // voxels
constexpr double kDomainGain = 0.93;  // intensity calibration offset between domains

struct TextureMode {
    std::array<double, 3> freq{0, 0, 0};
    double phase = 0.0;
    double amp = 0.0;
};

struct Ellipse {
    std::array<double, 3> center{0, 0, 0};
    std::array<double, 3> semi{1, 1, 1};
    double intensity = 0.0;
    double edge_rate = 1.0;  // converts (1 - r) to unit-box distance, roughly
};

void check_side(int side, int base) {
    if (base <= 0) throw std::invalid_argument("gen_phantom: base must be positive");
    int s = side;
    while (s > base && s % 2 == 0) s /= 2;
    if (s != base)
        throw std::invalid_argument("gen_phantom: side " + std::to_string(side) +
                                    " is not " + std::to_string(base) + " * 2^k");
}

}  // namespace

PhantomPair gen_phantom(std::uint64_t seed, int side, int ndim, int base) {
    if (ndim != 2 && ndim != 3) throw std::invalid_argument("gen_phantom: ndim must be 2 or 3");
    check_side(side, base);

    Rng geo(hash_combine(seed, 0x67656fULL));
    const int first_axis = ndim == 3 ? 0 : 1;

    std::vector<TextureMode> modes(kTextureModes);
    for (auto& m : modes) {
        for (int a = first_axis; a < 3; ++a) m.freq[a] = 2 + geo.uniform_int(5);
        m.phase = geo.uniform(0.0, 2.0 * kPi);
        m.amp = kTextureStd * std::sqrt(2.0 / kTextureModes) * geo.uniform(0.7, 1.3);
    }

    int n_ell = 2 + geo.uniform_int(3);
    std::vector<Ellipse> ells(n_ell);
    for (auto& e : ells) {
        double prod = 1.0;
        for (int a = first_axis; a < 3; ++a) e.center[a] = geo.uniform(0.35, 0.65);
        for (int a = first_axis; a < 3; ++a) {
            e.semi[a] = geo.uniform(0.16, 0.27);
            prod *= e.semi[a];
        }
        e.intensity = geo.uniform(0.35, 0.45);
        // Geometric-mean semi-axis: makes the logistic transition width roughly
        // uniform in box coordinates instead of shrinking for small ellipses.
        e.edge_rate = std::pow(prod, 1.0 / ndim);
    }

    const double edge_width =
        std::max(kEdgeWidthVoxMin, kEdgeWidthSlope * side) / side;  // unit coords

    std::array<int, 3> sh = ndim == 3 ? std::array<int, 3>{side, side, side}
                                      : std::array<int, 3>{side, side, 1};
    Volume geom(ndim, sh);
    Volume tex_field(ndim, sh);
    std::array<int, 3> logical{ndim == 3 ? side : 1, side, side};
    std::size_t idx = 0;
    for (int z = 0; z < logical[0]; ++z)
        for (int y = 0; y < logical[1]; ++y)
            for (int x = 0; x < logical[2]; ++x, ++idx) {
                std::array<double, 3> u{(z + 0.5) / side, (y + 0.5) / side, (x + 0.5) / side};
                if (ndim == 2) u[0] = 0.0;
                double tex = 0.0;
                for (const auto& m : modes) {
                    double arg = m.phase;
                    for (int a = first_axis; a < 3; ++a) arg += 2.0 * kPi * m.freq[a] * u[a];
                    tex += m.amp * std::cos(arg);
                }
                double v = kBackground;
                for (const auto& e : ells) {
                    double r2 = 0.0;
                    for (int a = first_axis; a < 3; ++a) {
                        double d = (u[a] - e.center[a]) / e.semi[a];
                        r2 += d * d;
                    }
                    double r = std::sqrt(r2);
                    double s = 1.0 / (1.0 + std::exp(-(1.0 - r) * e.edge_rate / edge_width));
                    v = v + s * (e.intensity - v);
                }
                geom.data[idx] = static_cast<float>(v);
                tex_field.data[idx] = static_cast<float>(tex);
            }

    // Both appearances are built from the same painted geometry and carry the
    // identical fine-texture field; only the boundary treatment and the noise
    // differ between them, so edge maps stay a function of the shared shapes.
    Volume blurred = gaussian_blur(geom, kSigmaSharp);
    Volume a = geom;
    Rng noise(hash_combine(seed, 0x6e6f6973ULL));
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double sharp = geom.data[i] + kSharpenAmount * (geom.data[i] - blurred.data[i]);
        a.data[i] = clamp_canonical(
            static_cast<float>(sharp + tex_field.data[i] + kNoiseStd * noise.normal()));
    }

    Volume b = gaussian_blur(geom, kSigmaSmooth);
    for (std::size_t i = 0; i < b.data.size(); ++i)
        b.data[i] = clamp_canonical(
            static_cast<float>(kDomainGain * (b.data[i] + tex_field.data[i])));

    return PhantomPair{std::move(a), std::move(b)};
}

namespace {

std::string item_name(int index, char domain) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "phantom_%04d_%c.ndimg", index, domain);
    return buf;
}

}  // namespace

Manifest gen_dataset(std::uint64_t seed, int count, int side, int ndim,
                     const std::string& out_dir, int base) {
    if (count <= 0) throw std::invalid_argument("gen_dataset: count must be positive");
    std::filesystem::create_directories(out_dir);
    Manifest m;
    m.path = (std::filesystem::path(out_dir) / "manifest.csv").string();
    std::string csv = "index,seed,path_a,path_b\n";
    for (int i = 0; i < count; ++i) {
        ManifestItem it;
        it.index = i;
        it.seed = hash_combine(seed, static_cast<std::uint64_t>(i));
        it.path_a = item_name(i, 'A');
        it.path_b = item_name(i, 'B');
        PhantomPair pair = gen_phantom(it.seed, side, ndim, base);
        save_volume(pair.domain_a, (std::filesystem::path(out_dir) / it.path_a).string());
        save_volume(pair.domain_b, (std::filesystem::path(out_dir) / it.path_b).string());
        csv += std::to_string(it.index) + "," + std::to_string(it.seed) + "," + it.path_a + "," +
               it.path_b + "\n";
        m.items.push_back(std::move(it));
    }
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(m.path.c_str(), "wb"),
                                                      &std::fclose);
    if (!f) throw std::runtime_error("gen_dataset: cannot write " + m.path);
    if (std::fwrite(csv.data(), 1, csv.size(), f.get()) != csv.size())
        throw std::runtime_error("gen_dataset: short write on " + m.path);
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f.get())) > 0) text.append(buf, got);

    Manifest m;
    m.path = path;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "index,seed,path_a,path_b")
                throw std::runtime_error("manifest: unexpected header '" + line + "'");
            continue;
        }
        std::array<std::string, 4> cols;
        std::size_t start = 0;
        for (int c = 0; c < 4; ++c) {
            std::size_t comma = c < 3 ? line.find(',', start) : line.size();
            if (comma == std::string::npos)
                throw std::runtime_error("manifest: malformed row '" + line + "'");
            cols[c] = line.substr(start, comma - start);
            start = comma + 1;
        }
        ManifestItem it;
        auto [p1, e1] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), it.index);
        auto [p2, e2] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), it.seed);
        if (e1 != std::errc{} || e2 != std::errc{} || cols[2].empty() || cols[3].empty())
            throw std::runtime_error("manifest: malformed row '" + line + "'");
        it.path_a = cols[2];
        it.path_b = cols[3];
        m.items.push_back(std::move(it));
    }
    return m;
}

}  // namespace msgan
