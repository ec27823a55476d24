#pragma once

#include "msgan/volume.hpp"

namespace msgan {

/// Separable Gaussian blur, mirror boundary, kernel radius ceil(3*sigma).
/// sigma must be positive.
Volume gaussian_blur(const Volume& v, double sigma);

}  // namespace msgan
