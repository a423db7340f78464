#include "camfuse/wavelet.hpp"

#include "camfuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace camfuse {

const std::array<double, 8>& daubechies8_lowpass()
{
    static const std::array<double, 8> h = {
        0.2303778133088965008632912,   0.714846570552915647089922,   0.6308807679298589078817163,
        -0.02798376941685985421141375, -0.1870348117190930840795707, 0.03084138183556076362721936,
        0.03288301166688519973540751,  -0.01059740178506903210488321,
    };
    return h;
}

namespace {

constexpr int kTaps = 8;

std::array<double, kTaps> highpass()
{
    const auto& h = daubechies8_lowpass();
    std::array<double, kTaps> g{};
    for (int k = 0; k < kTaps; ++k) g[k] = ((k % 2) ? -1.0 : 1.0) * h[kTaps - 1 - k];
    return g;
}

// One periodic analysis step on a strided 1-D signal of even length n.
void analyze(const double* x, std::size_t stride, int n, double* lo, double* hi, std::size_t out_stride)
{
    const auto& h = daubechies8_lowpass();
    static const auto g = highpass();
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
        double a = 0.0;
        double d = 0.0;
        for (int k = 0; k < kTaps; ++k) {
            const double v = x[static_cast<std::size_t>((2 * i + k) % n) * stride];
            a += h[k] * v;
            d += g[k] * v;
        }
        lo[static_cast<std::size_t>(i) * out_stride] = a;
        hi[static_cast<std::size_t>(i) * out_stride] = d;
    }
}

void synthesize(const double* lo, const double* hi, std::size_t in_stride, int n, double* x, std::size_t stride)
{
    const auto& h = daubechies8_lowpass();
    static const auto g = highpass();
    const int half = n / 2;
    for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j) * stride] = 0.0;
    for (int i = 0; i < half; ++i) {
        const double a = lo[static_cast<std::size_t>(i) * in_stride];
        const double d = hi[static_cast<std::size_t>(i) * in_stride];
        for (int k = 0; k < kTaps; ++k) {
            x[static_cast<std::size_t>((2 * i + k) % n) * stride] += h[k] * a + g[k] * d;
        }
    }
}

// Splits `in` (w x h) into four quadrants of size w/2 x h/2.
void analyze2(const Plane& in, Plane& ll, DetailBands& bands)
{
    const int w = in.width();
    const int h = in.height();
    const int hw = w / 2;
    const int hh = h / 2;

    // rows: [low | high]
    Plane rows(w, h);
    for (int r = 0; r < h; ++r) {
        const double* src = in.values().data() + static_cast<std::size_t>(r) * w;
        double* dst = rows.values().data() + static_cast<std::size_t>(r) * w;
        analyze(src, 1, w, dst, dst + hw, 1);
    }
    // columns: [low ; high]
    Plane cols(w, h);
    for (int c = 0; c < w; ++c) {
        const double* src = rows.values().data() + c;
        double* dst = cols.values().data() + c;
        analyze(src, w, h, dst, dst + static_cast<std::size_t>(hh) * w, w);
    }

    ll = Plane(hw, hh);
    bands.lh = Plane(hw, hh);
    bands.hl = Plane(hw, hh);
    bands.hh = Plane(hw, hh);
    for (int r = 0; r < hh; ++r) {
        for (int c = 0; c < hw; ++c) {
            ll(r, c) = cols(r, c);
            bands.lh(r, c) = cols(r + hh, c);       // low along rows, high along columns
            bands.hl(r, c) = cols(r, c + hw);       // high along rows
            bands.hh(r, c) = cols(r + hh, c + hw);
        }
    }
}

Plane synthesize2(const Plane& ll, const DetailBands& bands)
{
    const int hw = ll.width();
    const int hh = ll.height();
    const int w = hw * 2;
    const int h = hh * 2;

    Plane cols(w, h);
    for (int r = 0; r < hh; ++r) {
        for (int c = 0; c < hw; ++c) {
            cols(r, c) = ll(r, c);
            cols(r + hh, c) = bands.lh(r, c);
            cols(r, c + hw) = bands.hl(r, c);
            cols(r + hh, c + hw) = bands.hh(r, c);
        }
    }
    Plane rows(w, h);
    for (int c = 0; c < w; ++c) {
        const double* src = cols.values().data() + c;
        synthesize(src, src + static_cast<std::size_t>(hh) * w, w, h, rows.values().data() + c, w);
    }
    Plane out(w, h);
    for (int r = 0; r < h; ++r) {
        const double* src = rows.values().data() + static_cast<std::size_t>(r) * w;
        synthesize(src, src + hw, 1, w, out.values().data() + static_cast<std::size_t>(r) * w, 1);
    }
    return out;
}

double sum_squares(const Plane& p)
{
    double s = 0.0;
    for (double v : p.values()) s += v * v;
    return s;
}

}  // namespace

double WaveletPyramid::energy() const
{
    double e = sum_squares(approx);
    for (const auto& d : details) e += sum_squares(d.lh) + sum_squares(d.hl) + sum_squares(d.hh);
    return e;
}

WaveletPyramid dwt2(const Plane& img, int levels)
{
    if (levels < 1) fail(Errc::argument, "wavelet levels must be >= 1");
    const int multiple = 1 << levels;
    if (img.width() % multiple != 0 || img.height() % multiple != 0 || img.empty()) {
        fail(Errc::dimension, "wavelet transform needs dimensions divisible by " + std::to_string(multiple) +
                                  ", got " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    WaveletPyramid pyr;
    pyr.width = img.width();
    pyr.height = img.height();
    pyr.details.resize(levels);
    Plane current = img;
    for (int level = 0; level < levels; ++level) {
        Plane ll;
        analyze2(current, ll, pyr.details[level]);
        current = std::move(ll);
    }
    pyr.approx = std::move(current);
    return pyr;
}

Plane idwt2(const WaveletPyramid& pyr)
{
    Plane current = pyr.approx;
    for (int level = pyr.levels() - 1; level >= 0; --level) {
        current = synthesize2(current, pyr.details[level]);
    }
    return current;
}

std::vector<double> wiener_gain(const Plane& band, double sigma0)
{
    const int w = band.width();
    const int h = band.height();
    const double noise_var = sigma0 * sigma0;

    // summed-area table of squared coefficients
    std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    auto at = [&](int r, int c) -> double& { return sat[static_cast<std::size_t>(r) * (w + 1) + c]; };
    for (int r = 0; r < h; ++r) {
        double run = 0.0;
        for (int c = 0; c < w; ++c) {
            const double v = band(r, c);
            run += v * v;
            at(r + 1, c + 1) = at(r, c + 1) + run;
        }
    }

    std::vector<double> gain(band.size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double var = std::numeric_limits<double>::infinity();
            for (int win : {3, 5, 7, 9}) {
                const int half = win / 2;
                const int r0 = std::max(0, r - half);
                const int r1 = std::min(h, r + half + 1);
                const int c0 = std::max(0, c - half);
                const int c1 = std::min(w, c + half + 1);
                const double sum = at(r1, c1) - at(r0, c1) - at(r1, c0) + at(r0, c0);
                const double mean = sum / ((r1 - r0) * (c1 - c0));
                var = std::min(var, std::max(0.0, mean - noise_var));
            }
            const double denom = var + noise_var;
            gain[static_cast<std::size_t>(r) * w + c] = denom > 0.0 ? var / denom : 1.0;
        }
    }
    return gain;
}

namespace {

void shrink_band(Plane& band, double sigma0)
{
    const auto gain = wiener_gain(band, sigma0);
    auto v = band.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= gain[i];
}

}  // namespace

WaveletPyramid wiener_shrink(WaveletPyramid pyr, double sigma0)
{
    if (!(sigma0 > 0.0)) fail(Errc::argument, "sigma0 must be positive");
    for (auto& d : pyr.details) {
        shrink_band(d.lh, sigma0);
        shrink_band(d.hl, sigma0);
        shrink_band(d.hh, sigma0);
    }
    return pyr;
}

Plane pad_symmetric(const Plane& img, int multiple)
{
    const int w = img.width();
    const int h = img.height();
    const int pw = (w + multiple - 1) / multiple * multiple;
    const int ph = (h + multiple - 1) / multiple * multiple;
    if (pw == w && ph == h) return img;
    auto reflect = [](int i, int n) {
        // half-sample symmetric: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) x(n-2) ...
        const int period = 2 * n;
        i %= period;
        if (i < 0) i += period;
        return i < n ? i : period - 1 - i;
    };
    Plane out(pw, ph);
    for (int r = 0; r < ph; ++r) {
        const int sr = reflect(r, h);
        for (int c = 0; c < pw; ++c) out(r, c) = img(sr, reflect(c, w));
    }
    return out;
}

NoiseResidual extract_residual(const Plane& img, double sigma0, int levels)
{
    const int multiple = 1 << levels;
    if (img.width() < multiple || img.height() < multiple) {
        fail(Errc::dimension, "residual extraction needs at least " + std::to_string(multiple) + " pixels per side");
    }
    const auto values = img.values();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) {
        NoiseResidual flat(img.width(), img.height());
        flat.low_texture = true;
        return flat;
    }

    const Plane padded = pad_symmetric(img, multiple);
    const Plane denoised = idwt2(wiener_shrink(dwt2(padded, levels), sigma0));
    NoiseResidual out(img.width(), img.height());
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) out(r, c) = img(r, c) - denoised(r, c);
    }
    return out;
}

}  // namespace camfuse
