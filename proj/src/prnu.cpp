#include "camfuse/prnu.hpp"

#include "camfuse/common.hpp"
#include "fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace camfuse {

namespace {

void require_same_shape(const Plane& a, const Plane& b, const char* what)
{
    if (!a.same_shape(b)) {
        fail(Errc::dimension, std::string(what) + ": raster " + std::to_string(b.width()) + "x" +
                                  std::to_string(b.height()) + " does not match " + std::to_string(a.width()) + "x" +
                                  std::to_string(a.height()));
    }
}

}  // namespace

// --- estimation -------------------------------------------------------------

FingerprintAccumulator::FingerprintAccumulator(int width, int height)
    : width_(width),
      height_(height),
      numerator_(static_cast<std::size_t>(width) * height, 0.0),
      denominator_(static_cast<std::size_t>(width) * height, 0.0)
{
    if (width <= 0 || height <= 0) fail(Errc::dimension, "fingerprint dimensions must be positive");
}

void FingerprintAccumulator::add(const Plane& image, const Plane& residual)
{
    if (image.width() != width_ || image.height() != height_) {
        fail(Errc::dimension, "image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                                  " does not match fingerprint " + std::to_string(width_) + "x" +
                                  std::to_string(height_));
    }
    require_same_shape(image, residual, "residual");
    auto img = image.values();
    auto res = residual.values();
    for (std::size_t i = 0; i < img.size(); ++i) {
        numerator_[i] += res[i] * img[i];
        denominator_[i] += img[i] * img[i];
    }
    ++count_;
}

void FingerprintAccumulator::merge(const FingerprintAccumulator& other)
{
    if (other.width_ != width_ || other.height_ != height_) fail(Errc::dimension, "accumulator shape mismatch");
    for (std::size_t i = 0; i < numerator_.size(); ++i) {
        numerator_[i] += other.numerator_[i];
        denominator_[i] += other.denominator_[i];
    }
    count_ += other.count_;
}

Plane FingerprintAccumulator::ratio() const
{
    Plane out(width_, height_);
    auto dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = denominator_[i] > 0.0 ? numerator_[i] / denominator_[i] : 0.0;
    }
    return out;
}

Fingerprint FingerprintAccumulator::finish(std::string device_id, const FingerprintOptions& options) const
{
    if (count_ < 1) fail(Errc::argument, "fingerprint needs at least one image");
    Plane f = ratio();
    if (options.zero_mean) f = zero_mean(f);
    if (options.fourier_wiener) f = wiener_dft(f);
    return Fingerprint(std::move(f), count_, std::move(device_id));
}

Fingerprint estimate_fingerprint(std::span<const GrayImage> images, std::span<const NoiseResidual> residuals,
                                 std::string device_id, const FingerprintOptions& options)
{
    if (images.empty()) fail(Errc::argument, "fingerprint estimation needs at least one image");
    if (images.size() != residuals.size()) {
        fail(Errc::argument, "got " + std::to_string(images.size()) + " images but " +
                                 std::to_string(residuals.size()) + " residuals");
    }
    FingerprintAccumulator acc(images[0].width(), images[0].height());
    for (std::size_t k = 0; k < images.size(); ++k) acc.add(images[k], residuals[k]);
    return acc.finish(std::move(device_id), options);
}

Plane zero_mean(const Plane& p)
{
    const int w = p.width();
    const int h = p.height();
    Plane out = p;
    for (int r = 0; r < h; ++r) {
        double mean = 0.0;
        for (int c = 0; c < w; ++c) mean += out(r, c);
        mean /= w;
        for (int c = 0; c < w; ++c) out(r, c) -= mean;
    }
    for (int c = 0; c < w; ++c) {
        double mean = 0.0;
        for (int r = 0; r < h; ++r) mean += out(r, c);
        mean /= h;
        for (int r = 0; r < h; ++r) out(r, c) -= mean;
    }
    return out;
}

Plane wiener_dft(const Plane& p, double sigma)
{
    if (sigma <= 0.0) {
        double mean = 0.0;
        for (double v : p.values()) mean += v;
        mean /= static_cast<double>(p.size());
        double var = 0.0;
        for (double v : p.values()) var += (v - mean) * (v - mean);
        sigma = std::sqrt(var / static_cast<double>(p.size()));
        if (sigma == 0.0) return p;
    }
    auto spec = detail::fft2(p);
    const double norm = 1.0 / std::sqrt(static_cast<double>(p.size()));
    Plane magnitude(spec.columns(), spec.height);
    auto mag = magnitude.values();
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec.bins[i]) * norm;

    const auto signal_gain = wiener_gain(magnitude, sigma);
    for (std::size_t i = 0; i < mag.size(); ++i) spec.bins[i] *= 1.0 - signal_gain[i];
    return detail::ifft2(spec);
}

// --- detectors --------------------------------------------------------------

CorrelationScore pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) fail(Errc::dimension, "correlation operands differ in length");
    const std::size_t n = a.size();
    if (n == 0) return {0.0, true};
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return {0.0, true};
    const double rho = sab / std::sqrt(saa * sbb);
    return {std::clamp(rho, -1.0, 1.0), false};
}

namespace {

std::vector<double> modulated(const Plane& image, const Plane& fingerprint)
{
    std::vector<double> out(image.size());
    auto img = image.values();
    auto fp = fingerprint.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = img[i] * fp[i];
    return out;
}

}  // namespace

CorrelationScore correlate(const Plane& residual, const Plane& image, const Plane& fingerprint)
{
    require_same_shape(residual, image, "image");
    require_same_shape(residual, fingerprint, "fingerprint");
    const auto b = modulated(image, fingerprint);
    return pearson(residual.values(), b);
}

PceScore pce(const Plane& residual, const Plane& image, const Plane& fingerprint)
{
    require_same_shape(residual, image, "image");
    require_same_shape(residual, fingerprint, "fingerprint");
    const int w = residual.width();
    const int h = residual.height();
    if (w < kPceExclusion + 2 || h < kPceExclusion + 2) {
        fail(Errc::dimension, "PCE needs rasters of at least 13x13");
    }

    auto centered = [](std::vector<double> v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double& x : v) {
            x -= mean;
            ss += x * x;
        }
        return std::pair{std::move(v), ss};
    };
    auto [a, saa] = centered(std::vector<double>(residual.values().begin(), residual.values().end()));
    auto [b, sbb] = centered(modulated(image, fingerprint));
    if (saa <= 0.0 || sbb <= 0.0) return {0.0, 0, 0, true};

    auto fa = detail::fft2(Plane(w, h, std::move(a)));
    const auto fb = detail::fft2(Plane(w, h, std::move(b)));
    for (std::size_t i = 0; i < fa.bins.size(); ++i) fa.bins[i] *= std::conj(fb.bins[i]);
    const Plane xcorr = detail::ifft2(fa);

    int peak_r = 0;
    int peak_c = 0;
    double peak = xcorr(0, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (xcorr(r, c) > peak) {
                peak = xcorr(r, c);
                peak_r = r;
                peak_c = c;
            }
        }
    }

    const int half = kPceExclusion / 2;
    auto excluded = [&](int r, int c) {
        int dr = std::abs(r - peak_r);
        int dc = std::abs(c - peak_c);
        dr = std::min(dr, h - dr);
        dc = std::min(dc, w - dc);
        return dr <= half && dc <= half;
    };
    double energy = 0.0;
    std::size_t count = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (excluded(r, c)) continue;
            energy += xcorr(r, c) * xcorr(r, c);
            ++count;
        }
    }
    if (count == 0 || energy <= 0.0) return {0.0, peak_r, peak_c, true};
    energy /= static_cast<double>(count);
    const double signed_sq = (peak < 0 ? -1.0 : 1.0) * peak * peak;
    return {signed_sq / energy, peak_r, peak_c, false};
}

GateResult quality_gate(std::span<const GrayImage> images, std::span<const NoiseResidual> residuals,
                        const Fingerprint& fp, double threshold)
{
    if (images.size() != residuals.size()) fail(Errc::argument, "images and residuals differ in count");
    GateResult result;
    result.scores.resize(images.size());
    parallel_for(images.size(), [&](std::size_t i) { result.scores[i] = pce(residuals[i], images[i], fp).pce; });
    for (std::size_t i = 0; i < images.size(); ++i) {
        (result.scores[i] < threshold ? result.rejected : result.accepted).push_back(i);
    }
    return result;
}

Fingerprint crop(const Fingerprint& fp, const BlockRef& ref)
{
    return Fingerprint(crop(static_cast<const Plane&>(fp), ref), fp.num_images, fp.device_id);
}

// --- persistence ------------------------------------------------------------
//
// "PRNUFP1" | u32 width | u32 height | u32 num_images | u32 id_len | id bytes |
// width*height f64, all little-endian, row-major.

namespace {

constexpr char kMagic[] = "PRNUFP1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v)
{
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::size_t n)
    {
        if (bytes_.size() - pos_ < n) {
            fail(Errc::truncation, "fingerprint file truncated at byte offset " + std::to_string(bytes_.size()) +
                                       " (needed " + std::to_string(pos_ + n) + ")");
        }
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32()
    {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
        return v;
    }
    double f64()
    {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_fingerprint(const Fingerprint& fp)
{
    std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
    put_u32(out, static_cast<std::uint32_t>(fp.width()));
    put_u32(out, static_cast<std::uint32_t>(fp.height()));
    put_u32(out, static_cast<std::uint32_t>(fp.num_images));
    put_u32(out, static_cast<std::uint32_t>(fp.device_id.size()));
    out.insert(out.end(), fp.device_id.begin(), fp.device_id.end());
    for (double v : fp.values()) put_f64(out, v);
    return out;
}

Fingerprint decode_fingerprint(std::span<const std::uint8_t> bytes)
{
    Reader in(bytes);
    auto magic = in.take(kMagicLen);
    if (std::memcmp(magic.data(), kMagic, kMagicLen) != 0) fail(Errc::format, "not a PRNUFP1 fingerprint file");
    const auto w = in.u32();
    const auto h = in.u32();
    const auto n = in.u32();
    const auto id_len = in.u32();
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) fail(Errc::format, "invalid fingerprint dimensions");
    if (n < 1) fail(Errc::format, "fingerprint records zero contributing images");
    auto id = in.take(id_len);
    std::vector<double> values(static_cast<std::size_t>(w) * h);
    for (double& v : values) {
        v = in.f64();
        if (!std::isfinite(v)) fail(Errc::format, "non-finite fingerprint value");
    }
    return Fingerprint(Plane(static_cast<int>(w), static_cast<int>(h), std::move(values)), static_cast<int>(n),
                       std::string(id.begin(), id.end()));
}

void save_fingerprint(const std::filesystem::path& path, const Fingerprint& fp)
{
    const auto bytes = encode_fingerprint(fp);
    write_file_atomic(path, [&](std::ostream& os) {
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
}

Fingerprint load_fingerprint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::dependency, "missing fingerprint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_fingerprint(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

}  // namespace camfuse
