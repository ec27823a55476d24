// Benchmarks the OpenMP convolution kernels against the serial reference
// implementation used by the test suite.  Reports throughput for layer shapes
// that dominate the training workload and verifies that both implementations
// produce identical bits while measuring.
#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "msgan/kernels.hpp"
#include "msgan/rng.hpp"
#include "ref/serial_kernels.hpp"

using msgan::ConvGeom;
using msgan::PadMode;
using msgan::Rng;
using msgan::Tensor;

namespace {

struct Case {
    std::string name;
    int ic, oc;
    std::array<int, 3> sp;
    ConvGeom geom;
    bool transposed;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double flops_of(const Case& c) {
    std::array<int, 3> out = c.transposed ? msgan::tconv_out_shape(c.sp, c.geom)
                                          : msgan::conv_out_shape(c.sp, c.geom);
    double vox = c.transposed
                     ? static_cast<double>(c.sp[0]) * c.sp[1] * c.sp[2]
                     : static_cast<double>(out[0]) * out[1] * out[2];
    double kprod = static_cast<double>(c.geom.k[0]) * c.geom.k[1] * c.geom.k[2];
    return 2.0 * vox * c.ic * c.oc * kprod;
}

template <class F>
double time_best(F&& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void run_case(const Case& c, int reps) {
    Tensor<float> in(c.ic, c.sp);
    Rng rng(7);
    for (auto& x : in.data) x = static_cast<float>(rng.normal());
    std::size_t nw = static_cast<std::size_t>(c.ic) * c.oc * c.geom.k[0] * c.geom.k[1] * c.geom.k[2];
    std::vector<float> w(nw), b(static_cast<std::size_t>(c.oc));
    for (auto& x : w) x = static_cast<float>(rng.normal() * 0.05);
    for (auto& x : b) x = static_cast<float>(rng.normal() * 0.05);

    Tensor<float> out_par(1, {1, 1, 1}), out_ser(1, {1, 1, 1});
    double t_par = time_best(
        [&] {
            out_par = c.transposed ? msgan::tconv_forward(in, w.data(), b.data(), c.oc, c.geom)
                                   : msgan::conv_forward(in, w.data(), b.data(), c.oc, c.geom);
        },
        reps);
    double t_ser = time_best(
        [&] {
            out_ser = c.transposed ? ref::tconv_forward(in, w.data(), b.data(), c.oc, c.geom)
                                   : ref::conv_forward(in, w.data(), b.data(), c.oc, c.geom);
        },
        reps);

    bool identical = out_par.numel() == out_ser.numel() &&
                     std::memcmp(out_par.data.data(), out_ser.data.data(),
                                 out_par.numel() * sizeof(float)) == 0;
    double gf = flops_of(c) * 1e-9;
    std::printf("%-28s  parallel %8.3f ms (%6.2f GFLOP/s)   serial %8.3f ms (%6.2f GFLOP/s)   speedup %5.2fx   bits %s\n",
                c.name.c_str(), t_par * 1e3, gf / t_par, t_ser * 1e3, gf / t_ser,
                t_ser / t_par, identical ? "equal" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
    }

    ConvGeom down{{1, 4, 4}, {1, 2, 2}, {0, 1, 1}, PadMode::zero};
    ConvGeom keep3{{1, 3, 3}, {1, 1, 1}, {0, 1, 1}, PadMode::reflect};
    ConvGeom entry7{{1, 7, 7}, {1, 1, 1}, {0, 3, 3}, PadMode::reflect};
    ConvGeom down3d{{4, 4, 4}, {2, 2, 2}, {1, 1, 1}, PadMode::zero};

    std::vector<Case> cases = {
        {"enc 2->32 k4s2 64^2", 2, 32, {1, 64, 64}, down, false},
        {"enc 32->64 k4s2 32^2", 32, 64, {1, 32, 32}, down, false},
        {"enc 64->128 k4s2 16^2", 64, 128, {1, 16, 16}, down, false},
        {"enc 128->256 k4s2 8^2", 128, 256, {1, 8, 8}, down, false},
        {"res 32->32 k3 32^2", 32, 32, {1, 32, 32}, keep3, false},
        {"entry 3->32 k7 32^2", 3, 32, {1, 32, 32}, entry7, false},
        {"dec 256->128 k4s2 8^2", 256, 128, {1, 8, 8}, down, true},
        {"dec 64->32 k4s2 32^2", 64, 32, {1, 32, 32}, down, true},
        {"enc3d 8->16 k4s2 16^3", 8, 16, {16, 16, 16}, down3d, false},
    };

    std::printf("kernel benchmark: best of %d reps per implementation\n", reps);
    double total = 0.0;
    for (const auto& c : cases) {
        run_case(c, reps);
        total += flops_of(c);
    }
    std::printf("total work across cases: %.3f GFLOP\n", total * 1e-9);
    return 0;
}
