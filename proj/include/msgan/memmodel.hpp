#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "msgan/arch.hpp"

namespace msgan {

// Analytic lower-bound estimator for the memory a GAN training step needs:
// per-layer activations and their gradients, parameters and their gradients,
// and the input/output images, all 32-bit floats at batch size one.
// Optimizer state and kernel workspaces are deliberately out of scope.

/// One architecture layer's contribution to the training footprint.
struct MemLayer {
    std::string name;                         ///< e.g. "gen[2] conv 8->16"
    std::size_t activation_bytes = 0;         ///< forward output tensor
    std::size_t gradient_bytes = 0;           ///< activation gradients (same size)
    std::size_t parameter_bytes = 0;
    std::size_t parameter_gradient_bytes = 0;
};

struct MemoryEstimate {
    std::vector<MemLayer> layers;        ///< generator layers, then discriminator
    std::size_t generator_bytes = 0;     ///< sum over the generator's records
    std::size_t discriminator_bytes = 0;
    std::size_t image_bytes = 0;         ///< generator input + output tensors
    std::size_t total_bytes = 0;
};

/// Estimates one adversarial training step of the (generator, discriminator)
/// pair. `input_side` is the side of the generator's (isotropic) input; the
/// discriminator is evaluated at the generator's output resolution, where it
/// consumes the stored images. Throws invalid_argument when the side is not
/// positive, the dimensionalities differ, or a stride chain cannot process
/// the side.
MemoryEstimate estimate_memory(const ArchSpec& gen, const ArchSpec& disc, int input_side);

/// A named architecture pair for size sweeps. The three monolithic baselines
/// (dcgan3d, pix2pix3d, pggan3d) are documented desk-scale stand-ins for
/// common GAN families translated to 3D: their layer structure follows the
/// family (transposed-convolution pyramid from a latent seed; U-Net with a
/// patch discriminator; deeper progressive-style pyramid) while channel
/// widths are thinned to match this project's scale. The lr and hr templates
/// are this project's own networks, whose inputs never grow with the target
/// image.
struct MemTemplate {
    std::string name;
    ArchSpec gen, disc;
    int fixed_side = 0;  ///< nonzero: generator input side regardless of target
    int shrink = 1;      ///< otherwise: input side = target side / shrink
};

/// Template by family name in {dcgan3d, pix2pix3d, pggan3d, lr, hr};
/// anything else throws invalid_argument.
MemTemplate mem_template(const std::string& family);

std::vector<std::string> mem_template_names();

struct SweepRow {
    int side = 0;            ///< target image side
    std::size_t bytes = 0;   ///< estimated total for one training step
};

/// Estimates the family's total at every side, sorted ascending by side.
/// Sides must be positive and, for seed-based templates, divisible by the
/// seed shrink factor; a side the template cannot process is an error.
std::vector<SweepRow> sweep_sizes(const std::string& family, std::vector<int> sides);

/// "side,template,bytes" CSV of a sweep, one row per entry.
std::string sweep_csv(const std::string& family, const std::vector<SweepRow>& rows);

/// Least-squares cubic in the side length.
struct CubicFit {
    double a3 = 0, a2 = 0, a1 = 0, a0 = 0;
    double residual = 0;  ///< Euclidean norm of the fit residuals
};

/// Ordinary least squares on the basis {s^3, s^2, s, 1}. Requires at least
/// four distinct abscissae (throws invalid_argument otherwise); reproduces
/// exact cubics exactly up to rounding.
CubicFit cubic_fit(const std::vector<std::pair<double, double>>& points);

/// Evaluates the fitted polynomial at s.
double extrapolate(const CubicFit& fit, double s);

}  // namespace msgan
