#include <doctest.h>

#include <vector>

#include "msgan/kernels.hpp"
#include "msgan/rng.hpp"
#include "ref/serial_kernels.hpp"

using msgan::ConvGeom;
using msgan::PadMode;
using msgan::Rng;
using msgan::Tensor;

namespace {

template <class T>
Tensor<T> random_tensor(int c, std::array<int, 3> sp, std::uint64_t seed) {
    Tensor<T> t(c, sp);
    Rng rng(seed);
    for (auto& x : t.data) x = static_cast<T>(rng.normal());
    return t;
}

template <class T>
std::vector<T> random_params(std::size_t n, std::uint64_t seed) {
    std::vector<T> v(n);
    Rng rng(seed);
    for (auto& x : v) x = static_cast<T>(rng.normal() * 0.1);
    return v;
}

template <class T>
void check_equal(const Tensor<T>& a, const Tensor<T>& b) {
    REQUIRE(a.channels == b.channels);
    REQUIRE(a.sp == b.sp);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a.data[i] != b.data[i]) {
            CHECK(a.data[i] == b.data[i]);
            return;
        }
    }
    CHECK(true);
}

template <class T>
void compare_conv(int ic, int oc, std::array<int, 3> sp, const ConvGeom& g, std::uint64_t seed) {
    Tensor<T> in = random_tensor<T>(ic, sp, seed);
    std::size_t nw = static_cast<std::size_t>(oc) * ic * g.k[0] * g.k[1] * g.k[2];
    auto w = random_params<T>(nw, seed + 1);
    auto b = random_params<T>(static_cast<std::size_t>(oc), seed + 2);
    check_equal(msgan::conv_forward(in, w.data(), b.data(), oc, g),
                ref::conv_forward(in, w.data(), b.data(), oc, g));
}

template <class T>
void compare_tconv(int ic, int oc, std::array<int, 3> sp, const ConvGeom& g, std::uint64_t seed) {
    Tensor<T> in = random_tensor<T>(ic, sp, seed);
    std::size_t nw = static_cast<std::size_t>(ic) * oc * g.k[0] * g.k[1] * g.k[2];
    auto w = random_params<T>(nw, seed + 1);
    auto b = random_params<T>(static_cast<std::size_t>(oc), seed + 2);
    check_equal(msgan::tconv_forward(in, w.data(), b.data(), oc, g),
                ref::tconv_forward(in, w.data(), b.data(), oc, g));
}

}  // namespace

TEST_CASE("conv output shapes follow the floor formula") {
    ConvGeom halve{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    CHECK(msgan::conv_out_shape({1, 64, 64}, halve) == std::array<int, 3>{1, 32, 32});
    ConvGeom keep{{1, 3, 3}, {1, 1, 1}, {0, 1, 1}, PadMode::reflect};
    CHECK(msgan::conv_out_shape({1, 17, 33}, keep) == std::array<int, 3>{1, 17, 33});
    ConvGeom odd{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    CHECK(msgan::conv_out_shape({1, 5, 5}, odd)[1] == 2);  // floor((5+2-4)/2)+1
    ConvGeom big{{9, 9, 9}, {1, 1, 1}, {0, 0, 0}, PadMode::zero};
    CHECK_THROWS_AS(msgan::conv_out_shape({4, 64, 64}, big), std::invalid_argument);
}

TEST_CASE("tconv doubles extents with the 4/2/1 geometry") {
    ConvGeom up{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    CHECK(msgan::tconv_out_shape({1, 16, 16}, up) == std::array<int, 3>{1, 32, 32});
    ConvGeom up3{{4, 4, 4}, {2, 2, 2}, {1, 1, 1}, PadMode::zero};
    CHECK(msgan::tconv_out_shape({8, 8, 8}, up3) == std::array<int, 3>{16, 16, 16});
}

TEST_CASE("parallel conv matches the serial reference exactly") {
    ConvGeom g2_s1{{1, 3, 3}, {1, 1, 1}, {0, 1, 1}, PadMode::zero};
    ConvGeom g2_s1r{{1, 3, 3}, {1, 1, 1}, {0, 1, 1}, PadMode::reflect};
    ConvGeom g2_s2{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    ConvGeom g2_k7{{1, 7, 7}, {1, 1, 1}, {0, 3, 3}, PadMode::reflect};
    ConvGeom g3_s1{{3, 3, 3}, {1, 1, 1}, {1, 1, 1}, PadMode::reflect};
    ConvGeom g3_s2{{4, 4, 4}, {2, 2, 2}, {1, 1, 1}, PadMode::zero};

    compare_conv<float>(2, 3, {1, 12, 13}, g2_s1, 11);
    compare_conv<float>(2, 3, {1, 12, 13}, g2_s1r, 12);
    compare_conv<float>(3, 4, {1, 12, 14}, g2_s2, 13);
    compare_conv<float>(3, 2, {1, 16, 16}, g2_k7, 14);
    compare_conv<float>(2, 2, {5, 6, 7}, g3_s1, 15);
    compare_conv<float>(2, 3, {6, 8, 8}, g3_s2, 16);
    compare_conv<double>(2, 3, {1, 12, 13}, g2_s1, 17);
    compare_conv<double>(2, 2, {5, 6, 7}, g3_s1, 18);
}

TEST_CASE("parallel tconv matches the serial reference exactly") {
    ConvGeom g2{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    ConvGeom g3{{4, 4, 4}, {2, 2, 2}, {1, 1, 1}, PadMode::zero};
    ConvGeom g2_p0{{1, 3, 3}, {1, 2, 2}, {0, 0, 0}, PadMode::zero};
    compare_tconv<float>(3, 2, {1, 9, 10}, g2, 21);
    compare_tconv<float>(2, 2, {4, 5, 6}, g3, 22);
    compare_tconv<float>(2, 3, {1, 7, 7}, g2_p0, 23);
    compare_tconv<double>(3, 2, {1, 9, 10}, g2, 24);
}

TEST_CASE("instance norm matches the reference and normalizes") {
    Tensor<float> in = random_tensor<float>(3, {1, 9, 11}, 31);
    for (std::size_t i = 0; i < in.numel(); ++i) in.data[i] = in.data[i] * 2.0f + 0.7f;
    Tensor<float> got = msgan::instance_norm_forward(in, 1e-5f);
    check_equal(got, ref::instance_norm_forward(in, 1e-5f));
    for (int c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        const float* p = got.ch(c);
        for (std::size_t i = 0; i < got.spatial(); ++i) m += p[i];
        m /= static_cast<double>(got.spatial());
        for (std::size_t i = 0; i < got.spatial(); ++i) v += (p[i] - m) * (p[i] - m);
        v /= static_cast<double>(got.spatial());
        CHECK(m == doctest::Approx(0.0).epsilon(1e-5));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("activation values and ranges") {
    Tensor<float> in(1, {1, 1, 4});
    in.data = {-2.0f, -0.5f, 0.0f, 3.0f};
    Tensor<float> lr = msgan::leaky_relu_forward(in, 0.2f);
    CHECK(lr.data[0] == -0.4f);
    CHECK(lr.data[1] == -0.1f);
    CHECK(lr.data[2] == 0.0f);
    CHECK(lr.data[3] == 3.0f);
    Tensor<float> th = msgan::tanh_forward(in);
    for (float x : th.data) CHECK((x > -1.0f && x < 1.0f));
    Tensor<float> sg = msgan::sigmoid_forward(in);
    for (float x : sg.data) CHECK((x > 0.0f && x < 1.0f));
    CHECK(msgan::sigmoid_forward(Tensor<float>(1, {1, 1, 1})).data[0] == 0.5f);
}

TEST_CASE("concat and split are inverse") {
    Tensor<float> a = random_tensor<float>(2, {1, 4, 5}, 41);
    Tensor<float> b = random_tensor<float>(3, {1, 4, 5}, 42);
    Tensor<float> cat = msgan::concat_channels(a, b);
    CHECK(cat.channels == 5);
    Tensor<float> ra, rb;
    msgan::split_channels(cat, 2, ra, rb);
    check_equal(ra, a);
    check_equal(rb, b);
}

TEST_CASE("tensor allocations are tracked with a high-water mark") {
    msgan::memstat::reset_high_water();
    std::size_t before = msgan::memstat::current();
    {
        Tensor<float> t(4, {1, 10, 10});
        CHECK(msgan::memstat::current() == before + 4 * 100 * sizeof(float));
        {
            Tensor<double> u(2, {1, 10, 10});
            CHECK(msgan::memstat::current() == before + 1600 + 1600);
        }
        CHECK(msgan::memstat::current() == before + 1600);
        CHECK(msgan::memstat::high_water() >= before + 3200);
    }
    CHECK(msgan::memstat::current() == before);
    msgan::memstat::reset_high_water();
    CHECK(msgan::memstat::high_water() == before);
}
