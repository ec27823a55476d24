#pragma once

#include <array>
#include <cstddef>
#include <new>
#include <vector>

#include "msgan/volume.hpp"

namespace msgan {

/// Global byte accounting for every Tensor allocation. Images (Volume) are
/// deliberately not tracked: the high-water mark measures what a training
/// step keeps resident — activations, gradients, parameters, optimizer
/// state — which is the quantity that must stay flat as image size grows.
namespace memstat {
std::size_t current();
std::size_t high_water();
void reset_high_water();
namespace detail {
void add(std::size_t bytes);
void sub(std::size_t bytes);
}  // namespace detail
}  // namespace memstat

template <class T>
struct tracking_allocator {
    using value_type = T;
    tracking_allocator() = default;
    template <class U>
    tracking_allocator(const tracking_allocator<U>&) {}
    T* allocate(std::size_t n) {
        memstat::detail::add(n * sizeof(T));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }
    void deallocate(T* p, std::size_t n) {
        memstat::detail::sub(n * sizeof(T));
        ::operator delete(p);
    }
    bool operator==(const tracking_allocator&) const { return true; }
};

template <class T>
using tracked_vector = std::vector<T, tracking_allocator<T>>;

/// Channels-first activation block: data[(c * Z + z) * Y * X + y * X + x].
/// 2D data uses Z = 1; kernels are written once against the logical 3D
/// layout. There is no batch axis — training accumulates per-sample
/// gradients, which is exact here because normalization is per-instance.
template <class T>
struct Tensor {
    int channels = 0;
    std::array<int, 3> sp{1, 1, 1};  // z, y, x extents
    tracked_vector<T> data;

    Tensor() = default;
    Tensor(int c, const std::array<int, 3>& s)
        : channels(c), sp(s),
          data(static_cast<std::size_t>(c) * s[0] * s[1] * s[2], T(0)) {}

    std::size_t spatial() const {
        return static_cast<std::size_t>(sp[0]) * sp[1] * sp[2];
    }
    std::size_t numel() const { return data.size(); }
    T* ch(int c) { return data.data() + static_cast<std::size_t>(c) * spatial(); }
    const T* ch(int c) const { return data.data() + static_cast<std::size_t>(c) * spatial(); }
    bool same_shape(const Tensor& o) const { return channels == o.channels && sp == o.sp; }
};

/// Stacks single-channel volumes into one channels-first tensor.
Tensor<float> tensor_from_volumes(const std::vector<const Volume*>& chans);

/// Extracts channel c as a Volume of dimensionality ndim.
Volume volume_from_channel(const Tensor<float>& t, int c, int ndim);

}  // namespace msgan
