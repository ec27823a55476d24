#include "msgan/net.hpp"

#include <stdexcept>
#include <string>

namespace msgan {

namespace {

void require_same_shape(const Volume& a, const Volume& b, const char* what) {
    if (a.ndim != b.ndim || a.shape != b.shape)
        throw std::invalid_argument(std::string(what) + ": input shapes differ");
}

Volume run_net(const NetParams<float>& p, const std::vector<const Volume*>& chans) {
    Tensor<float> in = tensor_from_volumes(chans);
    Tensor<float> out = net_forward(p, in);
    Volume v = volume_from_channel(out, 0, chans[0]->ndim);
    v.spacing = chans[0]->spacing;
    return v;
}

}  // namespace

Volume make_noise(std::uint64_t global_seed, int scale, const std::array<int, 3>& origin,
                  const Volume& like) {
    std::uint64_t key = hash_combine(global_seed, static_cast<std::uint64_t>(scale));
    for (int a = 0; a < 3; ++a) key = hash_combine(key, static_cast<std::uint64_t>(origin[a]));
    Volume v = like;
    Rng rng(key);
    for (auto& x : v.data) x = static_cast<float>(rng.normal());
    return v;
}

Volume lr_generator_forward(const NetParams<float>& p, const Volume& edge_image,
                            const Volume& noise) {
    require_same_shape(edge_image, noise, "lr_generator_forward");
    if (p.arch.in_channels != 2)
        throw std::invalid_argument("lr_generator_forward: params expect " +
                                    std::to_string(p.arch.in_channels) + " input channels, not 2");
    return run_net(p, {&edge_image, &noise});
}

Volume hr_generator_forward(const NetParams<float>& p, const Volume& edge_patch,
                            const Volume& lowres_up_patch, const Volume& noise) {
    require_same_shape(edge_patch, lowres_up_patch, "hr_generator_forward");
    require_same_shape(edge_patch, noise, "hr_generator_forward");
    if (p.arch.in_channels != 3)
        throw std::invalid_argument("hr_generator_forward: params expect " +
                                    std::to_string(p.arch.in_channels) + " input channels, not 3");
    return run_net(p, {&edge_patch, &lowres_up_patch, &noise});
}

Volume discriminator_forward(const NetParams<float>& p,
                             const std::vector<const Volume*>& channels) {
    if (channels.empty()) throw std::invalid_argument("discriminator_forward: no channels");
    for (const Volume* v : channels) require_same_shape(*channels[0], *v, "discriminator_forward");
    if (static_cast<int>(channels.size()) != p.arch.in_channels)
        throw std::invalid_argument("discriminator_forward: params expect " +
                                    std::to_string(p.arch.in_channels) + " channels, got " +
                                    std::to_string(channels.size()));
    return run_net(p, channels);
}

}  // namespace msgan
