#pragma once

#include "camfuse/imaging.hpp"
#include "camfuse/wavelet.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace camfuse {

/// Estimated PRNU pattern of one device.
struct Fingerprint : Plane {
    using Plane::Plane;
    Fingerprint() = default;
    Fingerprint(Plane p, int num_images, std::string device_id)
        : Plane(std::move(p)), num_images(num_images), device_id(std::move(device_id))
    {
    }

    int num_images = 0;
    std::string device_id;
};

struct FingerprintOptions {
    /// Subtract row means, then column means.
    bool zero_mean = true;
    /// Suppress spectral peaks (periodic, non-unique artifacts).
    bool fourier_wiener = true;
};

/// Running sums for F = sum(N*I) / sum(I^2). Accumulators over disjoint image
/// subsets can be merged; the sums are elementwise so order only matters at
/// the rounding level.
class FingerprintAccumulator {
public:
    FingerprintAccumulator(int width, int height);

    void add(const Plane& image, const Plane& residual);
    void merge(const FingerprintAccumulator& other);

    int count() const { return count_; }
    /// Raw elementwise ratio; pixels with zero denominator map to 0.
    Plane ratio() const;
    Fingerprint finish(std::string device_id, const FingerprintOptions& options = {}) const;

private:
    int width_;
    int height_;
    int count_ = 0;
    std::vector<double> numerator_;
    std::vector<double> denominator_;
};

Fingerprint estimate_fingerprint(std::span<const GrayImage> images, std::span<const NoiseResidual> residuals,
                                 std::string device_id = {}, const FingerprintOptions& options = {});

/// Subtracts row means and then column means.
Plane zero_mean(const Plane& p);

/// Fourier-domain Wiener cleanup: keeps the noise-like (flat) part of the
/// magnitude spectrum and attenuates peaks. sigma <= 0 uses the plane's own
/// standard deviation.
Plane wiener_dft(const Plane& p, double sigma = 0.0);

struct CorrelationScore {
    double rho = 0.0;
    bool degenerate = false;
};

/// Pearson correlation of the residual against image * fingerprint.
CorrelationScore correlate(const Plane& residual, const Plane& image, const Plane& fingerprint);

/// Plain Pearson correlation of two equally shaped rasters.
CorrelationScore pearson(std::span<const double> a, std::span<const double> b);

struct PceScore {
    double pce = 0.0;
    int peak_row = 0;
    int peak_col = 0;
    bool degenerate = false;
};

inline constexpr int kPceExclusion = 11;
inline constexpr double kPceGate = 50.0;

/// Signed peak-to-correlation energy over all circular shifts, with an 11x11
/// neighbourhood of the peak excluded from the energy estimate.
PceScore pce(const Plane& residual, const Plane& image, const Plane& fingerprint);

struct GateResult {
    std::vector<std::size_t> accepted;
    std::vector<std::size_t> rejected;
    std::vector<double> scores;
};

/// Rejects images whose PCE against their own claimed fingerprint falls below
/// the threshold.
GateResult quality_gate(std::span<const GrayImage> images, std::span<const NoiseResidual> residuals,
                        const Fingerprint& fp, double threshold = kPceGate);

Fingerprint crop(const Fingerprint& fp, const BlockRef& ref);

void save_fingerprint(const std::filesystem::path& path, const Fingerprint& fp);
Fingerprint load_fingerprint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_fingerprint(const Fingerprint& fp);
Fingerprint decode_fingerprint(std::span<const std::uint8_t> bytes);

}  // namespace camfuse
