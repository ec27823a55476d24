#include "msgan/tensor.hpp"

#include <atomic>
#include <stdexcept>

#include "msgan/resample.hpp"

namespace msgan::memstat {

namespace {
std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_high{0};
}  // namespace

std::size_t current() { return g_current.load(std::memory_order_relaxed); }
std::size_t high_water() { return g_high.load(std::memory_order_relaxed); }
void reset_high_water() { g_high.store(g_current.load(), std::memory_order_relaxed); }

namespace detail {
void add(std::size_t bytes) {
    std::size_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::size_t high = g_high.load(std::memory_order_relaxed);
    while (now > high && !g_high.compare_exchange_weak(high, now, std::memory_order_relaxed)) {
    }
}
void sub(std::size_t bytes) { g_current.fetch_sub(bytes, std::memory_order_relaxed); }
}  // namespace detail

}  // namespace msgan::memstat

namespace msgan {

Tensor<float> tensor_from_volumes(const std::vector<const Volume*>& chans) {
    if (chans.empty()) throw std::invalid_argument("tensor_from_volumes: no channels");
    auto ls = logical_shape(*chans[0]);
    for (const Volume* v : chans)
        if (!v->same_shape(*chans[0]))
            throw std::invalid_argument("tensor_from_volumes: channel shapes differ");
    Tensor<float> t(static_cast<int>(chans.size()), ls);
    for (std::size_t c = 0; c < chans.size(); ++c)
        std::copy(chans[c]->data.begin(), chans[c]->data.end(), t.ch(static_cast<int>(c)));
    return t;
}

Volume volume_from_channel(const Tensor<float>& t, int c, int ndim) {
    if (c < 0 || c >= t.channels) throw std::out_of_range("volume_from_channel: bad channel");
    std::array<int, 3> sh =
        ndim == 3 ? t.sp : std::array<int, 3>{t.sp[1], t.sp[2], 0};
    if (ndim == 2 && t.sp[0] != 1)
        throw std::invalid_argument("volume_from_channel: tensor has depth but ndim is 2");
    Volume v(ndim, sh);
    const float* src = t.ch(c);
    std::copy(src, src + t.spatial(), v.data.begin());
    return v;
}

}  // namespace msgan
