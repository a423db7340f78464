#pragma once

#include "camfuse/imaging.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace camfuse {

enum class CfaLayout { rggb, bggr, grbg, gbrg };
enum class DemosaicMethod { bilinear, smooth_hue, gradient_corrected };
enum class SceneKind { flat, natural };

std::string_view to_string(CfaLayout v);
std::string_view to_string(DemosaicMethod v);
std::string_view to_string(SceneKind v);
CfaLayout parse_cfa(std::string_view s);
DemosaicMethod parse_demosaic(std::string_view s);

/// In-camera processing that is shared by every device of one model.
struct CameraModelSpec {
    std::string model_id;
    CfaLayout cfa = CfaLayout::rggb;
    DemosaicMethod demosaic = DemosaicMethod::bilinear;
    /// 1 is lossless; larger values quantize DCT coefficients more coarsely.
    double quant_table_scale = 1.0;
    double sharpen_amount = 0.0;
};

/// One physical sensor: PRNU pattern F and temporal noise level.
struct DeviceSpec {
    std::string device_id;
    std::string model_id;
    Plane prnu_pattern;
    double sigma_f = 0.02;
    double sensor_noise_std = 2.0;
    std::uint64_t seed = 0;
};

/// Draws a zero-mean Gaussian PRNU pattern with standard deviation sigma_f.
DeviceSpec make_device(std::string device_id, std::string model_id, int width, int height, std::uint64_t seed,
                       double sigma_f = 0.02, double sensor_noise_std = 2.0);

struct SceneSpec {
    SceneKind kind = SceneKind::natural;
    int width = 256;
    int height = 256;
    std::uint64_t seed = 0;
};

/// Noise-free scene radiance I0 on [0,255].
RgbImage render_scene(const SceneSpec& scene);

/// Full pipeline for a rendered scene: CFA sampling, I0(1+F)+Gamma, demosaic,
/// sharpen, in-camera DCT quantization, clamp and round to 8-bit levels.
RgbImage capture(const SceneSpec& scene, const DeviceSpec& device, const CameraModelSpec& model);
RgbImage capture_radiance(const RgbImage& radiance, const DeviceSpec& device, const CameraModelSpec& model,
                          std::uint64_t noise_seed);

/// CFA colour index (0=R, 1=G, 2=B) of a photosite.
int cfa_color(CfaLayout layout, int row, int col);
Plane mosaic(const RgbImage& radiance, CfaLayout layout);
RgbImage demosaic(const Plane& raw, CfaLayout layout, DemosaicMethod method);
RgbImage sharpen(const RgbImage& img, double amount);

using QuantTable = std::array<double, 64>;

const QuantTable& jpeg_luma_base();
const QuantTable& jpeg_chroma_base();
/// Libjpeg quality scaling: 5000/q below 50, 200-2q otherwise; entries
/// clamped to [1,255].
QuantTable scaled_table(const QuantTable& base, int quality);

/// 8x8 DCT quantize/dequantize round trip in YCbCr. A step of 0 leaves that
/// coefficient untouched.
RgbImage dct_roundtrip(const RgbImage& img, const QuantTable& luma, const QuantTable& chroma,
                       bool subsample_chroma);

/// Qualities at or above this keep full-resolution chroma, as common encoders do.
inline constexpr int kFullChromaQuality = 90;

/// In-memory JPEG-style recompression at the given quality; 4:2:0 chroma
/// below kFullChromaQuality.
RgbImage recompress(const RgbImage& img, int quality);

struct Forgery {
    RgbImage image;
    BinaryMask mask;
};

/// Pastes donor[row:row+size, col:col+size] into the same place in the host.
Forgery make_forgery(const RgbImage& host, const RgbImage& donor, int size, int row, int col);

}  // namespace camfuse
