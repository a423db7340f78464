#include "camfuse/camsim.hpp"

#include "camfuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace camfuse {

std::string_view to_string(CfaLayout v)
{
    switch (v) {
        case CfaLayout::rggb: return "RGGB";
        case CfaLayout::bggr: return "BGGR";
        case CfaLayout::grbg: return "GRBG";
        case CfaLayout::gbrg: return "GBRG";
    }
    return "?";
}

std::string_view to_string(DemosaicMethod v)
{
    switch (v) {
        case DemosaicMethod::bilinear: return "bilinear";
        case DemosaicMethod::smooth_hue: return "smooth-hue";
        case DemosaicMethod::gradient_corrected: return "gradient-corrected";
    }
    return "?";
}

std::string_view to_string(SceneKind v)
{
    return v == SceneKind::flat ? "flat" : "natural";
}

CfaLayout parse_cfa(std::string_view s)
{
    for (auto v : {CfaLayout::rggb, CfaLayout::bggr, CfaLayout::grbg, CfaLayout::gbrg}) {
        if (s == to_string(v)) return v;
    }
    fail(Errc::plan, "unknown CFA layout '" + std::string(s) + "'");
}

DemosaicMethod parse_demosaic(std::string_view s)
{
    for (auto v : {DemosaicMethod::bilinear, DemosaicMethod::smooth_hue, DemosaicMethod::gradient_corrected}) {
        if (s == to_string(v)) return v;
    }
    fail(Errc::plan, "unknown demosaic method '" + std::string(s) + "'");
}

// --- devices and scenes -----------------------------------------------------

DeviceSpec make_device(std::string device_id, std::string model_id, int width, int height, std::uint64_t seed,
                       double sigma_f, double sensor_noise_std)
{
    if (sigma_f < 0.0 || sensor_noise_std < 0.0) fail(Errc::argument, "noise levels must be non-negative");
    DeviceSpec dev;
    dev.device_id = std::move(device_id);
    dev.model_id = std::move(model_id);
    dev.sigma_f = sigma_f;
    dev.sensor_noise_std = sensor_noise_std;
    dev.seed = seed;
    dev.prnu_pattern = Plane(width, height);

    std::mt19937_64 rng(derive_seed(seed, "prnu"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto f = dev.prnu_pattern.values();
    for (double& v : f) v = gauss(rng);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    const double scale = var > 0.0 ? sigma_f / std::sqrt(var / static_cast<double>(f.size())) : 0.0;
    for (double& v : f) v = (v - mean) * scale;
    return dev;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Smoothly interpolated lattice noise in [-1,1].
Plane value_noise(int w, int h, double spacing, std::mt19937_64& rng)
{
    const int gw = static_cast<int>(std::ceil(w / spacing)) + 2;
    const int gh = static_cast<int>(std::ceil(h / spacing)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = uniform(rng, -1.0, 1.0);
    const double ox = uniform(rng, 0.0, 1.0);
    const double oy = uniform(rng, 0.0, 1.0);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    Plane out(w, h);
    for (int r = 0; r < h; ++r) {
        const double y = r / spacing + oy;
        const int y0 = static_cast<int>(y);
        const double ty = smooth(y - y0);
        for (int c = 0; c < w; ++c) {
            const double x = c / spacing + ox;
            const int x0 = static_cast<int>(x);
            const double tx = smooth(x - x0);
            auto L = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
            const double top = L(y0, x0) * (1 - tx) + L(y0, x0 + 1) * tx;
            const double bot = L(y0 + 1, x0) * (1 - tx) + L(y0 + 1, x0 + 1) * tx;
            out(r, c) = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

// Multi-octave texture with roughly 1/f falloff, starting at `finest` pixels.
Plane fractal_texture(int w, int h, double finest, int octaves, std::mt19937_64& rng)
{
    Plane out(w, h);
    double spacing = finest;
    double amp = 1.0;
    double total = 0.0;
    for (int o = 0; o < octaves; ++o) {
        const Plane layer = value_noise(w, h, spacing, rng);
        auto dst = out.values();
        auto src = layer.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += amp * src[i];
        total += amp;
        spacing *= 2.0;
        amp *= 1.3;
    }
    for (double& v : out.values()) v /= total;
    return out;
}

RgbImage render_flat(const SceneSpec& scene, std::mt19937_64& rng)
{
    const int w = scene.width;
    const int h = scene.height;
    const double base = uniform(rng, 110.0, 190.0);
    std::array<double, 3> color{};
    for (double& c : color) c = base + uniform(rng, -15.0, 15.0);
    // total excursion of 3 gray levels per axis keeps the variance near 1.5
    const double gx = uniform(rng, -1.5, 1.5) / w;
    const double gy = uniform(rng, -1.5, 1.5) / h;
    RgbImage img(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double ramp = gx * (c - w / 2.0) + gy * (r - h / 2.0);
            for (int ch = 0; ch < 3; ++ch) img(r, c, ch) = color[ch] + ramp;
        }
    }
    img.clamp();
    return img;
}

struct Shape {
    bool ellipse;
    double cy, cx, ry, rx, angle;
    std::array<double, 3> color;
    double texture_amp;
    double texture_scale;
};

RgbImage render_natural(const SceneSpec& scene, std::mt19937_64& rng)
{
    const int w = scene.width;
    const int h = scene.height;
    std::array<Plane, 3> ch;

    // Background: tilted gradient plus slow luminance and colour variation.
    const double base = uniform(rng, 80.0, 170.0);
    const double gx = uniform(rng, -60.0, 60.0) / w;
    const double gy = uniform(rng, -60.0, 60.0) / h;
    const Plane slow = value_noise(w, h, 96.0, rng);
    for (int k = 0; k < 3; ++k) {
        ch[k] = Plane(w, h);
        const double tint = uniform(rng, -25.0, 25.0);
        const Plane hue = value_noise(w, h, 128.0, rng);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                ch[k](r, c) = base + tint + gx * (c - w / 2.0) + gy * (r - h / 2.0) + 30.0 * slow(r, c) +
                              10.0 * hue(r, c);
            }
        }
    }

    // Objects with hard edges and their own surface texture.
    const int shapes = std::uniform_int_distribution<int>(4, 9)(rng);
    for (int s = 0; s < shapes; ++s) {
        Shape sh{};
        sh.ellipse = uniform(rng, 0.0, 1.0) < 0.5;
        sh.cy = uniform(rng, 0.0, h);
        sh.cx = uniform(rng, 0.0, w);
        sh.ry = uniform(rng, 0.06, 0.3) * h;
        sh.rx = uniform(rng, 0.06, 0.3) * w;
        sh.angle = uniform(rng, 0.0, std::numbers::pi);
        const double lum = uniform(rng, 40.0, 215.0);
        for (double& col : sh.color) col = lum + uniform(rng, -30.0, 30.0);
        sh.texture_amp = uniform(rng, 0.0, 18.0);
        sh.texture_scale = std::array{1.5, 2.0, 3.0, 4.0, 6.0}[std::uniform_int_distribution<int>(0, 4)(rng)];
        const Plane tex = fractal_texture(w, h, sh.texture_scale, 4, rng);
        const double ca = std::cos(sh.angle);
        const double sa = std::sin(sh.angle);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const double dy = r - sh.cy;
                const double dx = c - sh.cx;
                const double u = (ca * dx + sa * dy) / sh.rx;
                const double v = (-sa * dx + ca * dy) / sh.ry;
                const bool inside = sh.ellipse ? (u * u + v * v <= 1.0) : (std::abs(u) <= 1.0 && std::abs(v) <= 1.0);
                if (!inside) continue;
                const double t = sh.texture_amp * tex(r, c);
                for (int k = 0; k < 3; ++k) ch[k](r, c) = sh.color[k] + t;
            }
        }
    }

    // Fine, mostly achromatic surface texture over the whole frame.
    const double grain = uniform(rng, 2.0, 8.0);
    const Plane fine = fractal_texture(w, h, 2.0, 5, rng);
    RgbImage img(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            for (int k = 0; k < 3; ++k) {
                // keep away from the clipping rails
                img(r, c, k) = std::clamp(ch[k](r, c) + grain * fine(r, c), 12.0, 243.0);
            }
        }
    }
    return img;
}

}  // namespace

RgbImage render_scene(const SceneSpec& scene)
{
    if (scene.width < 8 || scene.height < 8) fail(Errc::dimension, "scene must be at least 8x8");
    std::mt19937_64 rng(derive_seed(scene.seed, "scene"));
    return scene.kind == SceneKind::flat ? render_flat(scene, rng) : render_natural(scene, rng);
}

// --- sensor and pipeline ----------------------------------------------------

int cfa_color(CfaLayout layout, int row, int col)
{
    const int pr = row & 1;
    const int pc = col & 1;
    static constexpr int table[4][2][2] = {
        {{0, 1}, {1, 2}},  // RGGB
        {{2, 1}, {1, 0}},  // BGGR
        {{1, 0}, {2, 1}},  // GRBG
        {{1, 2}, {0, 1}},  // GBRG
    };
    return table[static_cast<int>(layout)][pr][pc];
}

Plane mosaic(const RgbImage& radiance, CfaLayout layout)
{
    Plane raw(radiance.width(), radiance.height());
    for (int r = 0; r < raw.height(); ++r) {
        for (int c = 0; c < raw.width(); ++c) raw(r, c) = radiance(r, c, cfa_color(layout, r, c));
    }
    return raw;
}

namespace {

// Whole-sample mirror; keeps CFA parity.
inline int mirror(int i, int n)
{
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline double raw_at(const Plane& raw, int r, int c)
{
    return raw(mirror(r, raw.height()), mirror(c, raw.width()));
}

Plane bilinear_channel(const Plane& raw, CfaLayout layout, int ch)
{
    Plane out(raw.width(), raw.height());
    for (int r = 0; r < raw.height(); ++r) {
        for (int c = 0; c < raw.width(); ++c) {
            if (cfa_color(layout, r, c) == ch) {
                out(r, c) = raw(r, c);
                continue;
            }
            double sum = 0.0;
            int n = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (cfa_color(layout, r + dr, c + dc) != ch) continue;
                    sum += raw_at(raw, r + dr, c + dc);
                    ++n;
                }
            }
            out(r, c) = sum / n;
        }
    }
    return out;
}

RgbImage demosaic_bilinear(const Plane& raw, CfaLayout layout)
{
    RgbImage out(raw.width(), raw.height());
    for (int ch = 0; ch < 3; ++ch) out.set_channel(ch, bilinear_channel(raw, layout, ch));
    return out;
}

// Green bilinear, red/blue by interpolating colour differences against green.
RgbImage demosaic_smooth_hue(const Plane& raw, CfaLayout layout)
{
    const int w = raw.width();
    const int h = raw.height();
    const Plane green = bilinear_channel(raw, layout, 1);
    RgbImage out(w, h);
    out.set_channel(1, green);
    for (int ch : {0, 2}) {
        Plane diff(w, h);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (cfa_color(layout, r, c) == ch) diff(r, c) = raw(r, c) - green(r, c);
            }
        }
        Plane plane(w, h);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                double sum = 0.0;
                int n = 0;
                if (cfa_color(layout, r, c) == ch) {
                    sum = diff(r, c);
                    n = 1;
                } else {
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            if (cfa_color(layout, r + dr, c + dc) != ch) continue;
                            sum += diff(mirror(r + dr, h), mirror(c + dc, w));
                            ++n;
                        }
                    }
                }
                plane(r, c) = green(r, c) + sum / n;
            }
        }
        out.set_channel(ch, plane);
    }
    return out;
}

using Kernel5 = std::array<std::array<double, 5>, 5>;

// Malvar-He-Cutler gradient-corrected kernels, scaled by 1/8.
constexpr Kernel5 kGreenAtRedBlue = {{{0, 0, -1, 0, 0}, {0, 0, 2, 0, 0}, {-1, 2, 4, 2, -1}, {0, 0, 2, 0, 0},
                                      {0, 0, -1, 0, 0}}};
constexpr Kernel5 kAtGreenRowNeighbours = {{{0, 0, 0.5, 0, 0}, {0, -1, 0, -1, 0}, {-1, 4, 5, 4, -1},
                                            {0, -1, 0, -1, 0}, {0, 0, 0.5, 0, 0}}};
constexpr Kernel5 kAtGreenColNeighbours = {{{0, 0, -1, 0, 0}, {0, -1, 4, -1, 0}, {0.5, 0, 5, 0, 0.5},
                                            {0, -1, 4, -1, 0}, {0, 0, -1, 0, 0}}};
constexpr Kernel5 kAtOpposite = {{{0, 0, -1.5, 0, 0}, {0, 2, 0, 2, 0}, {-1.5, 0, 6, 0, -1.5}, {0, 2, 0, 2, 0},
                                  {0, 0, -1.5, 0, 0}}};

double apply5(const Plane& raw, int r, int c, const Kernel5& k)
{
    double s = 0.0;
    for (int dr = -2; dr <= 2; ++dr) {
        for (int dc = -2; dc <= 2; ++dc) {
            const double kv = k[dr + 2][dc + 2];
            if (kv != 0.0) s += kv * raw_at(raw, r + dr, c + dc);
        }
    }
    return s / 8.0;
}

RgbImage demosaic_gradient_corrected(const Plane& raw, CfaLayout layout)
{
    RgbImage out(raw.width(), raw.height());
    for (int r = 0; r < raw.height(); ++r) {
        for (int c = 0; c < raw.width(); ++c) {
            const int site = cfa_color(layout, r, c);
            for (int ch = 0; ch < 3; ++ch) {
                double v;
                if (ch == site) {
                    v = raw(r, c);
                } else if (ch == 1) {
                    v = apply5(raw, r, c, kGreenAtRedBlue);
                } else if (site == 1) {
                    const bool row_has = cfa_color(layout, r, c + 1) == ch;
                    v = apply5(raw, r, c, row_has ? kAtGreenRowNeighbours : kAtGreenColNeighbours);
                } else {
                    v = apply5(raw, r, c, kAtOpposite);
                }
                out(r, c, ch) = v;
            }
        }
    }
    return out;
}

}  // namespace

RgbImage demosaic(const Plane& raw, CfaLayout layout, DemosaicMethod method)
{
    switch (method) {
        case DemosaicMethod::bilinear: return demosaic_bilinear(raw, layout);
        case DemosaicMethod::smooth_hue: return demosaic_smooth_hue(raw, layout);
        case DemosaicMethod::gradient_corrected: return demosaic_gradient_corrected(raw, layout);
    }
    fail(Errc::argument, "unknown demosaic method");
}

RgbImage sharpen(const RgbImage& img, double amount)
{
    if (amount == 0.0) return img;
    const int w = img.width();
    const int h = img.height();
    RgbImage out(w, h);
    static constexpr double k[3] = {0.25, 0.5, 0.25};
    for (int ch = 0; ch < 3; ++ch) {
        Plane tmp(w, h);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                double s = 0.0;
                for (int d = -1; d <= 1; ++d) s += k[d + 1] * img(r, mirror(c + d, w), ch);
                tmp(r, c) = s;
            }
        }
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                double blur = 0.0;
                for (int d = -1; d <= 1; ++d) blur += k[d + 1] * tmp(mirror(r + d, h), c);
                out(r, c, ch) = img(r, c, ch) + amount * (img(r, c, ch) - blur);
            }
        }
    }
    return out;
}

RgbImage capture_radiance(const RgbImage& radiance, const DeviceSpec& device, const CameraModelSpec& model,
                          std::uint64_t noise_seed)
{
    if (radiance.width() != device.prnu_pattern.width() || radiance.height() != device.prnu_pattern.height()) {
        fail(Errc::dimension, "scene " + std::to_string(radiance.width()) + "x" + std::to_string(radiance.height()) +
                                  " does not match native resolution of device " + device.device_id);
    }
    Plane raw = mosaic(radiance, model.cfa);
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gamma(0.0, 1.0);
    auto px = raw.values();
    auto prnu = device.prnu_pattern.values();
    for (std::size_t i = 0; i < px.size(); ++i) {
        double v = px[i] * (1.0 + prnu[i]);
        if (device.sensor_noise_std > 0.0) v += device.sensor_noise_std * gamma(rng);
        px[i] = std::clamp(v, 0.0, 255.0);
    }

    RgbImage img = sharpen(demosaic(raw, model.cfa, model.demosaic), model.sharpen_amount);
    img.clamp();
    if (model.quant_table_scale > 1.0) {
        const double factor = (model.quant_table_scale - 1.0) / 10.0;
        QuantTable luma{};
        QuantTable chroma{};
        for (int i = 0; i < 64; ++i) {
            luma[i] = jpeg_luma_base()[i] * factor;
            chroma[i] = jpeg_chroma_base()[i] * factor;
        }
        img = dct_roundtrip(img, luma, chroma, true);
    }
    img.quantize();
    return img;
}

RgbImage capture(const SceneSpec& scene, const DeviceSpec& device, const CameraModelSpec& model)
{
    return capture_radiance(render_scene(scene), device, model, derive_seed(device.seed, "gamma", scene.seed));
}

// --- DCT quantization -------------------------------------------------------

const QuantTable& jpeg_luma_base()
{
    static const QuantTable t = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                 14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                 18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                 49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    return t;
}

const QuantTable& jpeg_chroma_base()
{
    static const QuantTable t = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
    return t;
}

QuantTable scaled_table(const QuantTable& base, int quality)
{
    if (quality < 1 || quality > 100) fail(Errc::argument, "JPEG quality must be in [1,100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    QuantTable out{};
    for (int i = 0; i < 64; ++i) {
        const long v = (static_cast<long>(base[i]) * scale + 50) / 100;
        out[i] = static_cast<double>(std::clamp(v, 1L, 255L));
    }
    return out;
}

namespace {

const std::array<double, 64>& dct_matrix()
{
    static const std::array<double, 64> m = [] {
        std::array<double, 64> a{};
        for (int u = 0; u < 8; ++u) {
            const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) a[u * 8 + x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
        }
        return a;
    }();
    return m;
}

void quantize_plane(Plane& p, const QuantTable& steps)
{
    const auto& m = dct_matrix();
    double block[64];
    double tmp[64];
    for (int by = 0; by < p.height(); by += 8) {
        for (int bx = 0; bx < p.width(); bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) block[y * 8 + x] = p(by + y, bx + x) - 128.0;
            // forward: M * B * M^T
            for (int u = 0; u < 8; ++u)
                for (int x = 0; x < 8; ++x) {
                    double s = 0.0;
                    for (int y = 0; y < 8; ++y) s += m[u * 8 + y] * block[y * 8 + x];
                    tmp[u * 8 + x] = s;
                }
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double s = 0.0;
                    for (int x = 0; x < 8; ++x) s += tmp[u * 8 + x] * m[v * 8 + x];
                    const double step = steps[u * 8 + v];
                    block[u * 8 + v] = step > 0.0 ? std::round(s / step) * step : s;
                }
            // inverse: M^T * C * M
            for (int y = 0; y < 8; ++y)
                for (int v = 0; v < 8; ++v) {
                    double s = 0.0;
                    for (int u = 0; u < 8; ++u) s += m[u * 8 + y] * block[u * 8 + v];
                    tmp[y * 8 + v] = s;
                }
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    double s = 0.0;
                    for (int v = 0; v < 8; ++v) s += tmp[y * 8 + v] * m[v * 8 + x];
                    p(by + y, bx + x) = std::clamp(std::round(s + 128.0), 0.0, 255.0);
                }
        }
    }
}

}  // namespace

RgbImage dct_roundtrip(const RgbImage& img, const QuantTable& luma, const QuantTable& chroma, bool subsample_chroma)
{
    const int w = img.width();
    const int h = img.height();
    const int pw = (w + 15) / 16 * 16;
    const int ph = (h + 15) / 16 * 16;

    Plane y(pw, ph), cb(pw, ph), cr(pw, ph);
    for (int r = 0; r < ph; ++r) {
        const int sr = std::min(r, h - 1);
        for (int c = 0; c < pw; ++c) {
            const int sc = std::min(c, w - 1);
            const double R = img(sr, sc, 0);
            const double G = img(sr, sc, 1);
            const double B = img(sr, sc, 2);
            y(r, c) = 0.299 * R + 0.587 * G + 0.114 * B;
            cb(r, c) = -0.168736 * R - 0.331264 * G + 0.5 * B + 128.0;
            cr(r, c) = 0.5 * R - 0.418688 * G - 0.081312 * B + 128.0;
        }
    }
    quantize_plane(y, luma);

    auto process_chroma = [&](Plane& plane) {
        if (!subsample_chroma) {
            quantize_plane(plane, chroma);
            return;
        }
        Plane small(pw / 2, ph / 2);
        for (int r = 0; r < ph / 2; ++r)
            for (int c = 0; c < pw / 2; ++c)
                small(r, c) = 0.25 * (plane(2 * r, 2 * c) + plane(2 * r, 2 * c + 1) + plane(2 * r + 1, 2 * c) +
                                      plane(2 * r + 1, 2 * c + 1));
        quantize_plane(small, chroma);
        for (int r = 0; r < ph; ++r)
            for (int c = 0; c < pw; ++c) plane(r, c) = small(r / 2, c / 2);
    };
    process_chroma(cb);
    process_chroma(cr);

    RgbImage out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double Y = y(r, c);
            const double Cb = cb(r, c) - 128.0;
            const double Cr = cr(r, c) - 128.0;
            out(r, c, 0) = std::clamp(std::round(Y + 1.402 * Cr), 0.0, 255.0);
            out(r, c, 1) = std::clamp(std::round(Y - 0.344136 * Cb - 0.714136 * Cr), 0.0, 255.0);
            out(r, c, 2) = std::clamp(std::round(Y + 1.772 * Cb), 0.0, 255.0);
        }
    }
    return out;
}

RgbImage recompress(const RgbImage& img, int quality)
{
    return dct_roundtrip(img, scaled_table(jpeg_luma_base(), quality), scaled_table(jpeg_chroma_base(), quality),
                         quality < kFullChromaQuality);
}

Forgery make_forgery(const RgbImage& host, const RgbImage& donor, int size, int row, int col)
{
    const BlockRef ref{row, col, 0, size};
    check_block(ref, host.width(), host.height());
    check_block(ref, donor.width(), donor.height());
    Forgery out{host, BinaryMask(host.width(), host.height())};
    for (int r = row; r < row + size; ++r) {
        for (int c = col; c < col + size; ++c) {
            for (int ch = 0; ch < 3; ++ch) out.image(r, c, ch) = donor(r, c, ch);
            out.mask(r, c) = 1;
        }
    }
    return out;
}

}  // namespace camfuse
