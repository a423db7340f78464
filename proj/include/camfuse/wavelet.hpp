#pragma once

#include "camfuse/imaging.hpp"

#include <array>
#include <span>
#include <vector>

namespace camfuse {

inline constexpr int kDefaultWaveletLevels = 4;
inline constexpr double kDefaultSigma0 = 5.0;

/// Detail subbands of one decomposition level.
struct DetailBands {
    Plane lh;  // horizontal detail
    Plane hl;  // vertical detail
    Plane hh;  // diagonal detail
};

/// Orthonormal separable decomposition. details[0] is the finest level.
struct WaveletPyramid {
    int width = 0;
    int height = 0;
    std::vector<DetailBands> details;
    Plane approx;

    int levels() const { return static_cast<int>(details.size()); }
    double energy() const;
};

/// Zero-centered noise estimate N = I - denoiser(I).
struct NoiseResidual : Plane {
    using Plane::Plane;
    NoiseResidual() = default;
    explicit NoiseResidual(Plane p) : Plane(std::move(p)) {}

    bool low_texture = false;
};

/// 8-tap Daubechies lowpass (4 vanishing moments).
const std::array<double, 8>& daubechies8_lowpass();

/// Forward transform with periodic boundary. Width and height must be
/// divisible by 2^levels.
WaveletPyramid dwt2(const Plane& img, int levels = kDefaultWaveletLevels);
Plane idwt2(const WaveletPyramid& pyr);

/// Local adaptive Wiener shrinkage of every detail band; approximation band is
/// left unchanged.
WaveletPyramid wiener_shrink(WaveletPyramid pyr, double sigma0);

/// Shrinkage gain per coefficient: var / (var + sigma0^2), where var is the
/// minimum over windows {3,5,7,9} of max(0, mean(c^2) - sigma0^2). Windows are
/// clipped at the band edges.
std::vector<double> wiener_gain(const Plane& band, double sigma0);

/// Mirror-extends to the next multiple of `multiple` on each axis.
Plane pad_symmetric(const Plane& img, int multiple);

NoiseResidual extract_residual(const Plane& img, double sigma0 = kDefaultSigma0,
                               int levels = kDefaultWaveletLevels);

}  // namespace camfuse
