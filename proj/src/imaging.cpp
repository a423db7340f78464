#include "camfuse/imaging.hpp"

#include "camfuse/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace camfuse {

namespace {

void check_dims(int width, int height)
{
    if (width <= 0 || height <= 0) {
        fail(Errc::dimension, "image dimensions must be positive, got " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
}

}  // namespace

Plane::Plane(int width, int height, double fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill)
{
    if (width < 0 || height < 0) fail(Errc::dimension, "negative plane dimensions");
}

Plane::Plane(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values))
{
    if (width < 0 || height < 0) fail(Errc::dimension, "negative plane dimensions");
    if (values_.size() != static_cast<std::size_t>(width) * height) {
        fail(Errc::dimension, "plane data length " + std::to_string(values_.size()) + " does not match " +
                                  std::to_string(width) + "x" + std::to_string(height));
    }
}

RgbImage::RgbImage(int width, int height, double fill)
    : width_(width), height_(height), samples_(static_cast<std::size_t>(width) * height * 3, fill)
{
    check_dims(width, height);
}

RgbImage::RgbImage(int width, int height, std::vector<double> samples)
    : width_(width), height_(height), samples_(std::move(samples))
{
    check_dims(width, height);
    if (samples_.size() != static_cast<std::size_t>(width) * height * 3) {
        fail(Errc::dimension, "rgb data length " + std::to_string(samples_.size()) + " does not match " +
                                  std::to_string(width) + "x" + std::to_string(height) + "x3");
    }
    for (double v : samples_) {
        if (!std::isfinite(v) || v < 0.0 || v > 255.0) fail(Errc::argument, "rgb sample outside [0,255]");
    }
}

Plane RgbImage::channel(int ch) const
{
    Plane out(width_, height_);
    auto dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = samples_[i * 3 + ch];
    return out;
}

void RgbImage::set_channel(int ch, const Plane& plane)
{
    if (plane.width() != width_ || plane.height() != height_) {
        fail(Errc::dimension, "channel plane does not match image dimensions");
    }
    auto src = plane.values();
    for (std::size_t i = 0; i < src.size(); ++i) samples_[i * 3 + ch] = src[i];
}

void RgbImage::clamp()
{
    for (double& v : samples_) v = std::clamp(v, 0.0, 255.0);
}

void RgbImage::quantize()
{
    for (double& v : samples_) v = to_level(v);
}

BinaryMask::BinaryMask(int width, int height, std::uint8_t fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0)
{
    check_dims(width, height);
}

std::size_t BinaryMask::count() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::uint8_t to_level(double v)
{
    const double r = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// --- netpbm -----------------------------------------------------------------

namespace {

class HeaderParser {
public:
    explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    int read_int(const char* what)
    {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1L << 24)) fail(Errc::format, std::string("netpbm ") + what + " too large");
            ++pos_;
        }
        if (pos_ == start) {
            fail(Errc::format, std::string("malformed netpbm header: expected ") + what + " at byte " +
                                   std::to_string(start));
        }
        return static_cast<int>(value);
    }

    void expect_single_whitespace()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            fail(Errc::format, "malformed netpbm header: expected whitespace after maxval at byte " +
                                   std::to_string(pos_));
        }
        ++pos_;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> header_bytes(const char* magic, int width, int height)
{
    const std::string header = std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    return std::vector<std::uint8_t>(header.begin(), header.end());
}

}  // namespace

AnyImage decode_netpbm(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        fail(Errc::format, "not a binary netpbm file (expected magic P5 or P6)");
    }
    const bool color = bytes[1] == '6';
    HeaderParser parser(bytes.subspan(2));
    const int width = parser.read_int("width");
    const int height = parser.read_int("height");
    const int maxval = parser.read_int("maxval");
    if (width <= 0 || height <= 0) fail(Errc::format, "netpbm dimensions must be positive");
    if (maxval != 255) fail(Errc::format, "unsupported netpbm maxval " + std::to_string(maxval) + " (only 255)");
    parser.expect_single_whitespace();

    const std::size_t offset = 2 + parser.pos();
    const std::size_t channels = color ? 3 : 1;
    const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - offset < expected) {
        fail(Errc::truncation, "netpbm payload truncated at byte offset " + std::to_string(bytes.size()) +
                                   " (payload starts at " + std::to_string(offset) + ", needs " +
                                   std::to_string(expected) + " bytes)");
    }
    std::vector<double> values(expected);
    for (std::size_t i = 0; i < expected; ++i) values[i] = bytes[offset + i];
    if (color) return RgbImage(width, height, std::move(values));
    return GrayImage(width, height, std::move(values));
}

AnyImage read_image(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    try {
        return decode_netpbm(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

GrayImage read_gray(const std::filesystem::path& path)
{
    auto img = read_image(path);
    if (auto* gray = std::get_if<GrayImage>(&img)) return std::move(*gray);
    return to_gray(std::get<RgbImage>(img));
}

RgbImage read_rgb(const std::filesystem::path& path)
{
    auto img = read_image(path);
    if (auto* rgb = std::get_if<RgbImage>(&img)) return std::move(*rgb);
    const auto& gray = std::get<GrayImage>(img);
    RgbImage out(gray.width(), gray.height());
    for (int ch = 0; ch < 3; ++ch) out.set_channel(ch, gray);
    return out;
}

std::vector<std::uint8_t> encode_netpbm(const GrayImage& img)
{
    auto out = header_bytes("P5", img.width(), img.height());
    out.reserve(out.size() + img.size());
    for (double v : img.values()) out.push_back(to_level(v));
    return out;
}

std::vector<std::uint8_t> encode_netpbm(const RgbImage& img)
{
    auto out = header_bytes("P6", img.width(), img.height());
    out.reserve(out.size() + img.size());
    for (double v : img.samples()) out.push_back(to_level(v));
    return out;
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    write_file_atomic(path, [&](std::ostream& os) {
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
}

}  // namespace

void write_image(const std::filesystem::path& path, const GrayImage& img)
{
    write_bytes(path, encode_netpbm(img));
}

void write_image(const std::filesystem::path& path, const RgbImage& img)
{
    write_bytes(path, encode_netpbm(img));
}

BinaryMask read_mask(const std::filesystem::path& path)
{
    auto img = read_image(path);
    const auto* gray = std::get_if<GrayImage>(&img);
    if (!gray) fail(Errc::format, path.string() + ": masks must be P5");
    BinaryMask mask(gray->width(), gray->height());
    auto src = gray->values();
    auto dst = mask.bits();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? 1 : 0;
    return mask;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask)
{
    GrayImage img(mask.width(), mask.height());
    auto src = mask.bits();
    auto dst = img.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255.0 : 0.0;
    write_image(path, img);
}

// --- conversions and blocks -------------------------------------------------

GrayImage to_gray(const RgbImage& img)
{
    GrayImage out(img.width(), img.height());
    auto src = img.samples();
    auto dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
        dst[i] = std::clamp(y, 0.0, 255.0);
    }
    return out;
}

void check_block(const BlockRef& ref, int width, int height)
{
    if (ref.size < 1) fail(Errc::bounds, "block size must be positive");
    if (ref.row < 0) fail(Errc::bounds, "block top edge " + std::to_string(ref.row) + " is above the image");
    if (ref.col < 0) fail(Errc::bounds, "block left edge " + std::to_string(ref.col) + " is left of the image");
    if (ref.row + ref.size > height) {
        fail(Errc::bounds, "block bottom edge " + std::to_string(ref.row + ref.size) + " exceeds image height " +
                               std::to_string(height));
    }
    if (ref.col + ref.size > width) {
        fail(Errc::bounds, "block right edge " + std::to_string(ref.col + ref.size) + " exceeds image width " +
                               std::to_string(width));
    }
}

Plane crop(const Plane& plane, const BlockRef& ref)
{
    check_block(ref, plane.width(), plane.height());
    Plane out(ref.size, ref.size);
    for (int r = 0; r < ref.size; ++r) {
        auto src = plane.row(ref.row + r).subspan(ref.col, ref.size);
        std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(r) * ref.size);
    }
    return out;
}

GrayImage extract_block(const GrayImage& img, const BlockRef& ref)
{
    Plane p = crop(img, ref);
    return GrayImage(p.width(), p.height(), std::vector<double>(p.values().begin(), p.values().end()));
}

RgbImage extract_block(const RgbImage& img, const BlockRef& ref)
{
    check_block(ref, img.width(), img.height());
    RgbImage out(ref.size, ref.size);
    auto src = img.samples();
    auto dst = out.samples();
    for (int r = 0; r < ref.size; ++r) {
        const std::size_t from = (static_cast<std::size_t>(ref.row + r) * img.width() + ref.col) * 3;
        const std::size_t to = static_cast<std::size_t>(r) * ref.size * 3;
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), ref.size * 3,
                    dst.begin() + static_cast<std::ptrdiff_t>(to));
    }
    return out;
}

}  // namespace camfuse
