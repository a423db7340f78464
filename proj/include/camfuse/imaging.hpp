#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace camfuse {

/// Real-valued single-channel raster, row-major.
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, double fill = 0.0);
    Plane(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double operator()(int row, int col) const { return values_[index(row, col)]; }
    double& operator()(int row, int col) { return values_[index(row, col)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::span<const double> row(int r) const
    {
        return std::span<const double>(values_).subspan(static_cast<std::size_t>(r) * width_, width_);
    }

    bool same_shape(const Plane& other) const
    {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

/// Luminance image on the [0,255] scale.
class GrayImage : public Plane {
public:
    using Plane::Plane;
};

/// Three-channel image, channel-interleaved, samples on [0,255].
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, double fill = 0.0);
    RgbImage(int width, int height, std::vector<double> samples);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return samples_.size(); }

    double operator()(int row, int col, int ch) const { return samples_[index(row, col, ch)]; }
    double& operator()(int row, int col, int ch) { return samples_[index(row, col, ch)]; }

    std::span<const double> samples() const { return samples_; }
    std::span<double> samples() { return samples_; }

    Plane channel(int ch) const;
    void set_channel(int ch, const Plane& plane);

    /// Clamps every sample to [0,255].
    void clamp();
    /// Clamps and rounds half-up to integer levels.
    void quantize();

private:
    std::size_t index(int row, int col, int ch) const
    {
        return (static_cast<std::size_t>(row) * width_ + col) * 3 + ch;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> samples_;
};

/// Location of a square block inside source image `image`.
struct BlockRef {
    int row = 0;
    int col = 0;
    int image = 0;
    int size = 96;

    bool operator==(const BlockRef&) const = default;
};

/// Per-pixel {0,1} annotation.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, std::uint8_t fill = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return bits_.size(); }

    std::uint8_t operator()(int row, int col) const { return bits_[index(row, col)]; }
    std::uint8_t& operator()(int row, int col) { return bits_[index(row, col)]; }

    std::span<const std::uint8_t> bits() const { return bits_; }
    std::span<std::uint8_t> bits() { return bits_; }
    std::size_t count() const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

using AnyImage = std::variant<GrayImage, RgbImage>;

/// Reads binary netpbm P5 (gray) or P6 (color), maxval 255.
AnyImage read_image(const std::filesystem::path& path);
AnyImage decode_netpbm(std::span<const std::uint8_t> bytes);
GrayImage read_gray(const std::filesystem::path& path);
/// Reads P6 directly; a P5 file is expanded to three equal channels.
RgbImage read_rgb(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_netpbm(const GrayImage& img);
std::vector<std::uint8_t> encode_netpbm(const RgbImage& img);
void write_image(const std::filesystem::path& path, const GrayImage& img);
void write_image(const std::filesystem::path& path, const RgbImage& img);

/// Masks are stored as P5 with 0/255; any nonzero sample reads as 1.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// Round-half-up to an 8-bit level, clamped to [0,255].
std::uint8_t to_level(double v);

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const RgbImage& img);

void check_block(const BlockRef& ref, int width, int height);
GrayImage extract_block(const GrayImage& img, const BlockRef& ref);
RgbImage extract_block(const RgbImage& img, const BlockRef& ref);
Plane crop(const Plane& plane, const BlockRef& ref);

}  // namespace camfuse
