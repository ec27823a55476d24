#pragma once

#include <map>
#include <string>
#include <vector>

#include "msgan/kernels.hpp"

// Declarative network descriptions. An ArchSpec is an ordered layer list;
// everything else (parameter shapes, activation shapes, receptive fields,
// the checkpoint text header) is derived from it, so a checkpoint is fully
// self-describing.

namespace msgan {

enum class LayerKind {
    conv,
    tconv,
    instance_norm,
    leaky_relu,
    tanh_act,
    sigmoid_act,
    resblock,
    skip_save,
    skip_concat,
};

struct LayerDesc {
    LayerKind kind;
    int in_ch = 0;        // conv / tconv / resblock
    int out_ch = 0;       // conv / tconv (resblock keeps its channel count)
    ConvGeom geom;        // conv / tconv / resblock (resblock: stride 1)
    double slope = 0.2;   // leaky_relu
    bool norm = false;    // resblock: instance norm after each convolution
    int skip_id = -1;     // skip_save / skip_concat
};

struct ArchSpec {
    int ndim = 2;
    int in_channels = 0;
    std::vector<LayerDesc> layers;
};

/// Static analysis computed while checking the invariants: channel counts
/// chain, skip saves/concats pair one-to-one, geometry matches ndim.
struct ArchInfo {
    std::vector<int> in_ch;               // per layer
    std::vector<int> out_ch;              // per layer
    std::map<int, int> skip_channels;     // skip id -> saved channel count
    int out_channels = 0;
};

ArchInfo analyze_arch(const ArchSpec& a);
inline void validate_arch(const ArchSpec& a) { analyze_arch(a); }

/// Per-layer output spatial shapes for a given input shape; also checks that
/// every skip concatenation joins equal spatial shapes.
std::vector<std::array<int, 3>> propagate_shapes(const ArchSpec& a, const std::array<int, 3>& in_sp);

/// One entry per convolution; a resblock contributes two.
struct ParamSlice {
    std::size_t w_off = 0, w_count = 0;
    std::size_t b_off = 0, b_count = 0;
    int ic = 0, oc = 0;
    ConvGeom geom;
    bool transposed = false;
};

struct ParamLayout {
    std::vector<ParamSlice> units;
    std::vector<int> first_unit;  // per layer; -1 for parameter-free layers
    std::size_t total = 0;
};

ParamLayout param_layout(const ArchSpec& a);

/// Per-axis receptive field of one output voxel, defined only for stride-1,
/// normalization-free, skip-free architectures: rf = 1 + sum(kernel - 1).
/// Throws for strided layers, transposed convolutions, instance norm (global
/// support), or skip markers.
std::array<int, 3> compute_receptive_field(const ArchSpec& a);

/// (rf - 1) / 2 on the active axes; requires an odd, isotropic receptive
/// field.
int trim_margin(const ArchSpec& a);

/// `key = value` serialization; keys are `<prefix>ndim`, `<prefix>in_channels`,
/// `<prefix>layers`, `<prefix>layer_<i>`.
std::string arch_to_text(const ArchSpec& a, const std::string& prefix);
ArchSpec arch_from_kv(const std::map<std::string, std::string>& kv, const std::string& prefix);

/// Isotropic geometry on the active axes (z axis degenerate for 2D).
ConvGeom make_geom(int ndim, int k, int s, int p, PadMode mode);

/// U-Net generator: 4 stride-2 levels, 32 channels doubling per level,
/// instance norm + leaky rectifier, skip concatenations, tanh head.
/// Input channels: edge map + noise.
ArchSpec lr_generator_arch(int ndim);

/// Patch generator: 7-kernel reflection-padded entry convolution to 32
/// channels, two normalization-free residual blocks, 3-kernel exit
/// convolution, tanh. Stride 1 throughout; receptive field 17, margin 8.
/// Default input channels: edge patch + upscaled previous scale + noise.
/// Pass in_channels = 2 for the edge-only variant (edge patch + noise).
ArchSpec hr_generator_arch(int ndim, int in_channels = 3);

/// Fully-convolutional realness map: 4 stride-2 4-kernel convolutions
/// (32..256 channels, instance norm after all but the first), 3-kernel
/// sigmoid head.
ArchSpec discriminator_arch(int ndim, int in_channels);

}  // namespace msgan
