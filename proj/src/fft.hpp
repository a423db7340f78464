#pragma once

#include "camfuse/imaging.hpp"

#include <complex>
#include <vector>

namespace camfuse::detail {

/// Half-spectrum of a real plane: height x (width/2 + 1) complex values.
struct Spectrum {
    int width = 0;
    int height = 0;
    std::vector<std::complex<double>> bins;

    int columns() const { return width / 2 + 1; }
};

Spectrum fft2(const Plane& plane);
/// Inverse including the 1/(w*h) normalization.
Plane ifft2(const Spectrum& spectrum);

}  // namespace camfuse::detail
