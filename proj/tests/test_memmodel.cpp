#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "msgan/memmodel.hpp"

using namespace msgan;

namespace {

ArchSpec single_conv(int ndim, int ic, int oc) {
    ArchSpec a;
    a.ndim = ndim;
    a.in_channels = ic;
    LayerDesc L{};
    L.kind = LayerKind::conv;
    L.in_ch = ic;
    L.out_ch = oc;
    L.geom = make_geom(ndim, 3, 1, 1, PadMode::zero);
    a.layers.push_back(L);
    return a;
}

// Raw normal-equations solve on the unscaled {s^3, s^2, s, 1} basis via
// Cramer's rule in extended precision; independent of the implementation's
// elimination and abscissa rescaling.
long double det3(const long double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

long double det4(const long double m[4][4]) {
    long double d = 0.0L;
    for (int c = 0; c < 4; ++c) {
        long double sub[3][3];
        for (int r = 1; r < 4; ++r) {
            int cc = 0;
            for (int j = 0; j < 4; ++j) {
                if (j == c) continue;
                sub[r - 1][cc++] = m[r][j];
            }
        }
        const long double term = m[0][c] * det3(sub);
        d += (c % 2 == 0) ? term : -term;
    }
    return d;
}

std::vector<double> cramer_cubic(const std::vector<std::pair<double, double>>& pts) {
    long double A[4][4] = {};
    long double r[4] = {};
    for (const auto& p : pts) {
        const long double s = p.first;
        const long double b[4] = {s * s * s, s * s, s, 1.0L};
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) A[i][j] += b[i] * b[j];
            r[i] += b[i] * p.second;
        }
    }
    const long double d = det4(A);
    std::vector<double> c(4);
    for (int i = 0; i < 4; ++i) {
        long double Ai[4][4];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) Ai[a][b] = (b == i) ? r[a] : A[a][b];
        c[i] = static_cast<double>(det4(Ai) / d);
    }
    return c;
}

}  // namespace

TEST_CASE("per-layer byte arithmetic matches hand counts") {
    // Generator: one 3^3 convolution, 1 -> 8 channels, 3D, side 64.
    // Parameters: 8 * 27 + 8 = 224 floats = 896 bytes.
    // Activations: 8 * 64^3 floats = 8,388,608 bytes.
    const ArchSpec gen = single_conv(3, 1, 8);
    const ArchSpec disc = single_conv(3, 8, 1);
    const MemoryEstimate est = estimate_memory(gen, disc, 64);

    REQUIRE(est.layers.size() == 2);
    CHECK(est.layers[0].name == "gen[0] conv 1->8");
    CHECK(est.layers[0].activation_bytes == 8388608U);
    CHECK(est.layers[0].gradient_bytes == 8388608U);
    CHECK(est.layers[0].parameter_bytes == 896U);
    CHECK(est.layers[0].parameter_gradient_bytes == 896U);

    CHECK(est.layers[1].name == "disc[0] conv 8->1");
    CHECK(est.layers[1].activation_bytes == 1048576U);  // 1 * 64^3 * 4
    CHECK(est.layers[1].parameter_bytes == 868U);       // (8*27 + 1) * 4

    CHECK(est.generator_bytes == 2U * 8388608U + 2U * 896U);
    CHECK(est.discriminator_bytes == 2U * 1048576U + 2U * 868U);
    // Images: generator input (1 channel) + output (8 channels) at side 64.
    CHECK(est.image_bytes == 4U * (1U + 8U) * 64U * 64U * 64U);
    CHECK(est.total_bytes ==
          est.generator_bytes + est.discriminator_bytes + est.image_bytes);
}

TEST_CASE("doubling the side multiplies every activation byte count by 8") {
    const MemTemplate t = mem_template("pix2pix3d");
    const MemoryEstimate small = estimate_memory(t.gen, t.disc, 32);
    const MemoryEstimate big = estimate_memory(t.gen, t.disc, 64);
    REQUIRE(small.layers.size() == big.layers.size());
    for (std::size_t i = 0; i < small.layers.size(); ++i) {
        CHECK(big.layers[i].activation_bytes == 8U * small.layers[i].activation_bytes);
        CHECK(big.layers[i].gradient_bytes == 8U * small.layers[i].gradient_bytes);
        CHECK(big.layers[i].parameter_bytes == small.layers[i].parameter_bytes);
        CHECK(big.layers[i].parameter_gradient_bytes ==
              small.layers[i].parameter_gradient_bytes);
    }
    CHECK(big.image_bytes == 8U * small.image_bytes);
}

TEST_CASE("estimate totals are sums of their parts") {
    const MemTemplate t = mem_template("hr");
    const MemoryEstimate est = estimate_memory(t.gen, t.disc, 32);
    REQUIRE(est.layers.size() == t.gen.layers.size() + t.disc.layers.size());

    std::size_t gen_sum = 0, disc_sum = 0;
    for (const MemLayer& L : est.layers) {
        const std::size_t all = L.activation_bytes + L.gradient_bytes + L.parameter_bytes +
                                L.parameter_gradient_bytes;
        if (L.name.rfind("gen[", 0) == 0)
            gen_sum += all;
        else if (L.name.rfind("disc[", 0) == 0)
            disc_sum += all;
        else
            FAIL("unexpected layer record name: " << L.name);
    }
    CHECK(est.generator_bytes == gen_sum);
    CHECK(est.discriminator_bytes == disc_sum);
    CHECK(est.total_bytes == gen_sum + disc_sum + est.image_bytes);
    CHECK(est.image_bytes > 0U);
}

TEST_CASE("concatenating architectures adds their layer records") {
    // Appending a second discriminator copy as extra generator layers must
    // add exactly the discriminator's per-layer bytes (images counted once).
    const ArchSpec gen = single_conv(3, 1, 8);
    const ArchSpec tail = single_conv(3, 8, 8);
    ArchSpec joined = gen;
    joined.layers.push_back(tail.layers[0]);

    const ArchSpec disc = single_conv(3, 8, 1);
    const MemoryEstimate base = estimate_memory(gen, disc, 32);
    const MemoryEstimate more = estimate_memory(joined, disc, 32);

    REQUIRE(more.layers.size() == base.layers.size() + 1);
    const MemLayer& extra = more.layers[1];
    CHECK(extra.name == "gen[1] conv 8->8");
    CHECK(more.generator_bytes ==
          base.generator_bytes + extra.activation_bytes + extra.gradient_bytes +
              extra.parameter_bytes + extra.parameter_gradient_bytes);
    CHECK(more.discriminator_bytes == base.discriminator_bytes);
    // Output channel count is unchanged (8), so image bytes are too.
    CHECK(more.image_bytes == base.image_bytes);
}

TEST_CASE("fixed-input templates cost the same at every target size") {
    for (const std::string family : {"lr", "hr"}) {
        CAPTURE(family);
        const std::vector<SweepRow> rows = sweep_sizes(family, {512, 64, 256, 128});
        REQUIRE(rows.size() == 4);
        CHECK(rows[0].side == 64);
        CHECK(rows[1].side == 128);
        CHECK(rows[2].side == 256);
        CHECK(rows[3].side == 512);
        for (const SweepRow& r : rows) CHECK(r.bytes == rows[0].bytes);
    }
}

TEST_CASE("monolithic 3D templates grow nearly cubically from side 32 to 64") {
    for (const std::string family : {"dcgan3d", "pix2pix3d", "pggan3d"}) {
        CAPTURE(family);
        const std::vector<SweepRow> rows = sweep_sizes(family, {32, 64, 128});
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].bytes < rows[1].bytes);
        CHECK(rows[1].bytes < rows[2].bytes);
        const double ratio =
            static_cast<double>(rows[1].bytes) / static_cast<double>(rows[0].bytes);
        CHECK(ratio >= 7.5);
        CHECK(ratio <= 8.0);  // never more than pure voxel scaling
    }
}

TEST_CASE("sweep and template validation") {
    CHECK_THROWS_WITH_AS(sweep_sizes("dcgan3d", {36}), doctest::Contains("multiple of 8"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(sweep_sizes("pggan3d", {40}), doctest::Contains("multiple of 16"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(sweep_sizes("lr", {0}), doctest::Contains("positive"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(mem_template("vaegan"), doctest::Contains("unknown memory template"),
                         std::invalid_argument);

    const MemTemplate t = mem_template("pix2pix3d");
    // Odd sides break the U-Net's skip concatenation after down/up sampling.
    CHECK_THROWS_WITH_AS(estimate_memory(t.gen, t.disc, 33), doctest::Contains("skip concat"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(estimate_memory(t.gen, t.disc, 0), doctest::Contains("positive"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(estimate_memory(t.gen, discriminator_arch(2, 2), 32),
                         doctest::Contains("dimensionalities differ"), std::invalid_argument);
}

TEST_CASE("every advertised template constructs and estimates quickly") {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> names = mem_template_names();
    REQUIRE(names.size() == 5);
    for (const std::string& family : names) {
        CAPTURE(family);
        const std::vector<SweepRow> rows = sweep_sizes(family, {64, 128, 256, 512});
        REQUIRE(rows.size() == 4);
        for (const SweepRow& r : rows) CHECK(r.bytes > 0U);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 1.0);
}

TEST_CASE("csv dump lists one row per side") {
    const std::vector<SweepRow> rows = sweep_sizes("lr", {64, 128});
    const std::string csv = sweep_csv("lr", rows);
    CHECK(csv.rfind("side,template,bytes\n", 0) == 0);
    CHECK(csv.find("\n64,lr," + std::to_string(rows[0].bytes) + "\n") != std::string::npos);
    CHECK(csv.find("\n128,lr," + std::to_string(rows[1].bytes) + "\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("cubic fit recovers an exact cubic") {
    SUBCASE("unit coefficients on small sides") {
        const CubicFit fit = cubic_fit({{1, 1}, {2, 8}, {3, 27}, {4, 64}});
        CHECK(std::abs(fit.a3 - 1.0) <= 1e-9);
        CHECK(std::abs(fit.a2) <= 1e-9);
        CHECK(std::abs(fit.a1) <= 1e-9);
        CHECK(std::abs(fit.a0) <= 1e-9);
        CHECK(fit.residual <= 1e-9);
    }
    SUBCASE("unit coefficients on realistic sweep sides") {
        std::vector<std::pair<double, double>> pts;
        for (double s : {32.0, 64.0, 128.0, 256.0, 512.0}) pts.push_back({s, s * s * s});
        const CubicFit fit = cubic_fit(pts);
        CHECK(std::abs(fit.a3 - 1.0) <= 1e-9);
        CHECK(std::abs(fit.a2) <= 1e-9);
        CHECK(std::abs(fit.a1) <= 1e-9);
        CHECK(std::abs(fit.a0) <= 1e-9);
        CHECK(fit.residual <= 1e-9);
    }
    SUBCASE("full cubic") {
        std::vector<std::pair<double, double>> pts;
        for (double s = 1.0; s <= 6.0; s += 1.0)
            pts.push_back({s, ((2.0 * s + 3.0) * s + 5.0) * s + 7.0});
        const CubicFit fit = cubic_fit(pts);
        CHECK(fit.a3 == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.a2 == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(fit.a1 == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(fit.a0 == doctest::Approx(7.0).epsilon(1e-12));
        CHECK(fit.residual <= 1e-9);
        CHECK(extrapolate(fit, 10.0) == doctest::Approx(2357.0));
    }
}

TEST_CASE("cubic fit on constant data finds only the constant term") {
    const CubicFit fit = cubic_fit({{1, 5.5}, {2, 5.5}, {3, 5.5}, {4, 5.5}, {7, 5.5}});
    CHECK(std::abs(fit.a3) <= 1e-9);
    CHECK(std::abs(fit.a2) <= 1e-9);
    CHECK(std::abs(fit.a1) <= 1e-9);
    CHECK(fit.a0 == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(fit.residual <= 1e-9);
}

TEST_CASE("cubic fit matches an independent least-squares oracle on noisy data") {
    // Deterministic noise pattern around y = 2 s^3 - 3 s^2 + 0.5 s + 7.
    std::vector<std::pair<double, double>> pts;
    double wiggle = 1e-3;
    for (double s = 1.0; s <= 9.0; s += 0.5) {
        const double y = ((2.0 * s - 3.0) * s + 0.5) * s + 7.0 + wiggle;
        pts.push_back({s, y});
        wiggle = -wiggle * 0.9;
    }
    const CubicFit fit = cubic_fit(pts);
    const std::vector<double> oracle = cramer_cubic(pts);
    const double got[4] = {fit.a3, fit.a2, fit.a1, fit.a0};
    for (int i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(std::abs(got[i] - oracle[i]) <= 1e-6 * std::max(1.0, std::abs(oracle[i])));
    }
    // The reported residual is achieved by the reported coefficients.
    long double rss = 0.0L;
    for (const auto& p : pts) {
        const long double r =
            ((static_cast<long double>(fit.a3) * p.first + fit.a2) * p.first + fit.a1) *
                p.first + fit.a0 - p.second;
        rss += r * r;
    }
    CHECK(fit.residual ==
          doctest::Approx(std::sqrt(static_cast<double>(rss))).epsilon(1e-9));
}

TEST_CASE("cubic fit requires four distinct abscissae") {
    CHECK_THROWS_WITH_AS(cubic_fit({{1, 1}, {1, 2}, {2, 8}, {2, 9}, {3, 27}}),
                         doctest::Contains("distinct"), std::invalid_argument);
    CHECK_NOTHROW(cubic_fit({{1, 1}, {1, 2}, {2, 8}, {3, 27}, {4, 64}}));
}
